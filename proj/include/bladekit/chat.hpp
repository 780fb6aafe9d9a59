#pragma once

#include "bladekit/bridge.hpp"
#include "bladekit/knowledge.hpp"

#include <cstddef>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace bladekit::chat {

struct GenerationConfig {
    std::string endpoint_url;
    std::string model_id;
    double temperature = 0.2;
    int max_tokens = 1024;
    std::optional<long> seed;
    double timeout_s = 30.0;
    int max_retries = 2;
    int max_in_flight = 4;
    double initial_backoff_s = 0.5;
    std::string api_key_env = "PIPELINE_API_KEY";
};

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatResult {
    std::string content;
    int attempts = 1;
    std::string request_hash;
    std::string response_hash;
};

// Chat-completions client. Transport failures and 5xx responses are retried
// with exponential backoff; auth failures, other 4xx, and malformed bodies
// are not. Every failure surfaces as a typed HttpError.
class ChatClient {
public:
    using Logger = std::function<void(const std::string& json_line)>;

    explicit ChatClient(GenerationConfig cfg, Logger logger = {});

    ChatResult complete(const std::vector<ChatMessage>& messages) const;

    const GenerationConfig& config() const { return cfg_; }

private:
    GenerationConfig cfg_;
    Logger logger_;
};

// system message from the preamble, one user message from blocks + suffix
ChatResult chat_complete(const bridge::AssembledPrompt& prompt, const ChatClient& client);

// EmbeddingProvider backed by an embeddings endpoint
// (POST {input: [text], model} -> {data: [{embedding: [..]}]}).
// Vectors are L2-normalized locally; the dimension latches on first use.
// Single-threaded use only.
class RemoteEmbedder final : public knowledge::EmbeddingProvider {
public:
    explicit RemoteEmbedder(GenerationConfig cfg);

    std::vector<double> embed(const std::string& text) override;
    const std::string& embedder_id() const override { return id_; }
    std::size_t dimension() const override;

private:
    std::vector<double> fetch(const std::string& text) const;

    GenerationConfig cfg_;
    std::string id_;
    mutable std::mutex mutex_;
    mutable std::size_t dimension_ = 0;
};

}  // namespace bladekit::chat
