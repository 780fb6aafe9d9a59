#include "bladekit/chat.hpp"

#include "bladekit/errors.hpp"
#include "bladekit/util.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace bladekit {

std::string http_error_kind_name(HttpErrorKind kind) {
    switch (kind) {
        case HttpErrorKind::transport: return "transport";
        case HttpErrorKind::timeout: return "timeout";
        case HttpErrorKind::auth: return "auth";
        case HttpErrorKind::http_status: return "http_status";
        case HttpErrorKind::malformed: return "malformed";
        case HttpErrorKind::retries_exhausted: return "retries_exhausted";
    }
    return "unknown";
}

}  // namespace bladekit

namespace bladekit::chat {

using nlohmann::json;

namespace {

struct ParsedUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    const std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint URL must include a scheme: '" + url + "'");
    }
    const std::size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

void set_timeouts(httplib::Client& cli, double timeout_s) {
    const auto sec = static_cast<time_t>(timeout_s);
    const auto usec = static_cast<time_t>((timeout_s - static_cast<double>(sec)) * 1e6);
    cli.set_connection_timeout(sec, usec);
    cli.set_read_timeout(sec, usec);
    cli.set_write_timeout(sec, usec);
}

struct PostOutcome {
    json parsed;
    std::string raw_body;
    int attempts = 1;
};

// Shared POST with the retry policy; throws HttpError on every failure path.
PostOutcome post_json(const GenerationConfig& cfg, const std::string& body,
                      const ChatClient::Logger& logger) {
    const ParsedUrl url = parse_url(cfg.endpoint_url);
    const char* key = std::getenv(cfg.api_key_env.c_str());
    const std::string request_hash = util::fnv1a64_hex(body);

    std::string last_detail = "no attempt made";
    HttpErrorKind last_kind = HttpErrorKind::transport;
    int last_status = 0;

    const int total_attempts = cfg.max_retries + 1;
    for (int attempt = 1; attempt <= total_attempts; ++attempt) {
        if (attempt > 1) {
            const double backoff = cfg.initial_backoff_s * std::pow(2.0, attempt - 2);
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
        }

        httplib::Client cli(url.base);
        set_timeouts(cli, cfg.timeout_s);
        httplib::Headers headers;
        if (key != nullptr && *key != '\0') {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        auto res = cli.Post(url.path, headers, body, "application/json");

        const auto log_attempt = [&](bool ok, int status, const std::string& detail) {
            if (!logger) return;
            json line{{"event", "http_attempt"}, {"attempt", attempt},       {"ok", ok},
                      {"status", status},        {"request_hash", request_hash}};
            if (!detail.empty()) line["detail"] = detail;
            logger(line.dump());
        };

        if (!res) {
            const auto err = res.error();
            last_kind = (err == httplib::Error::ConnectionTimeout) ? HttpErrorKind::timeout
                                                                   : HttpErrorKind::transport;
            last_detail = httplib::to_string(err);
            last_status = 0;
            log_attempt(false, 0, last_detail);
            continue;  // transport problems are retryable
        }

        if (res->status == 401 || res->status == 403) {
            log_attempt(false, res->status, "auth");
            throw HttpError(HttpErrorKind::auth,
                            "endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")",
                            res->status, attempt);
        }
        if (res->status >= 500) {
            last_kind = HttpErrorKind::http_status;
            last_detail = "HTTP " + std::to_string(res->status);
            last_status = res->status;
            log_attempt(false, res->status, last_detail);
            continue;  // server errors are retryable
        }
        if (res->status != 200) {
            log_attempt(false, res->status, "client error");
            throw HttpError(HttpErrorKind::http_status, "HTTP " + std::to_string(res->status),
                            res->status, attempt);
        }

        json parsed;
        try {
            parsed = json::parse(res->body);
        } catch (const json::exception& e) {
            log_attempt(false, 200, "unparsable body");
            throw HttpError(HttpErrorKind::malformed,
                            std::string("response body is not JSON: ") + e.what(), 200, attempt);
        }
        log_attempt(true, 200, "");
        return {std::move(parsed), res->body, attempt};
    }

    if (cfg.max_retries > 0) {
        throw HttpError(HttpErrorKind::retries_exhausted,
                        "gave up after " + std::to_string(total_attempts) + " attempts; last: " +
                            last_detail,
                        last_status, total_attempts);
    }
    throw HttpError(last_kind, last_detail, last_status, total_attempts);
}

}  // namespace

ChatClient::ChatClient(GenerationConfig cfg, Logger logger)
    : cfg_(std::move(cfg)), logger_(std::move(logger)) {
    if (cfg_.endpoint_url.empty()) throw ConfigError("chat endpoint URL is empty");
    if (cfg_.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (cfg_.timeout_s <= 0) throw ConfigError("timeout_s must be positive");
    if (cfg_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

ChatResult ChatClient::complete(const std::vector<ChatMessage>& messages) const {
    if (messages.empty()) throw Error("no messages to send");

    json req{{"model", cfg_.model_id},
             {"messages", json::array()},
             {"temperature", cfg_.temperature},
             {"max_tokens", cfg_.max_tokens}};
    for (const ChatMessage& m : messages) {
        req["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }
    if (cfg_.seed.has_value()) req["seed"] = *cfg_.seed;
    const std::string body = req.dump();

    const PostOutcome outcome = post_json(cfg_, body, logger_);

    const json& doc = outcome.parsed;
    if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty() ||
        !doc["choices"][0].contains("message") || !doc["choices"][0]["message"].contains("content") ||
        !doc["choices"][0]["message"]["content"].is_string()) {
        throw HttpError(HttpErrorKind::malformed,
                        "response lacks choices[0].message.content", 200, outcome.attempts);
    }

    ChatResult result;
    result.content = doc["choices"][0]["message"]["content"].get<std::string>();
    result.attempts = outcome.attempts;
    result.request_hash = util::fnv1a64_hex(body);
    result.response_hash = util::fnv1a64_hex(outcome.raw_body);
    return result;
}

ChatResult chat_complete(const bridge::AssembledPrompt& prompt, const ChatClient& client) {
    std::vector<ChatMessage> messages;
    if (!prompt.system_preamble.empty()) {
        messages.push_back({"system", prompt.system_preamble});
    }
    std::string user;
    if (prompt.blocks.empty()) {
        user = std::string(bridge::kNoDefectsBlock);
    } else {
        for (std::size_t i = 0; i < prompt.blocks.size(); ++i) {
            if (i) user += "\n\n";
            user += prompt.blocks[i].rendered;
        }
    }
    user += "\n\n";
    user += prompt.query_suffix;
    messages.push_back({"user", std::move(user)});
    return client.complete(messages);
}

RemoteEmbedder::RemoteEmbedder(GenerationConfig cfg)
    : cfg_(std::move(cfg)), id_("remote:" + cfg_.model_id) {
    if (cfg_.endpoint_url.empty()) throw ConfigError("embedding endpoint URL is empty");
}

std::vector<double> RemoteEmbedder::fetch(const std::string& text) const {
    const json req{{"input", json::array({text})}, {"model", cfg_.model_id}};
    const PostOutcome outcome = post_json(cfg_, req.dump(), nullptr);

    const json& doc = outcome.parsed;
    if (!doc.contains("data") || !doc["data"].is_array() || doc["data"].empty() ||
        !doc["data"][0].contains("embedding") || !doc["data"][0]["embedding"].is_array()) {
        throw HttpError(HttpErrorKind::malformed, "response lacks data[0].embedding", 200,
                        outcome.attempts);
    }

    std::vector<double> vec;
    for (const auto& v : doc["data"][0]["embedding"]) {
        if (!v.is_number()) {
            throw HttpError(HttpErrorKind::malformed, "embedding contains a non-number", 200,
                            outcome.attempts);
        }
        vec.push_back(v.get<double>());
    }
    if (vec.empty()) {
        throw HttpError(HttpErrorKind::malformed, "embedding is empty", 200, outcome.attempts);
    }

    double norm_sq = 0.0;
    for (double v : vec) norm_sq += v * v;
    if (norm_sq > 0.0) {
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (double& v : vec) v *= inv;
    }
    return vec;
}

std::vector<double> RemoteEmbedder::embed(const std::string& text) {
    std::vector<double> vec = fetch(text);
    std::lock_guard<std::mutex> lock(mutex_);
    if (dimension_ == 0) {
        dimension_ = vec.size();
    } else if (vec.size() != dimension_) {
        throw Error("embedding dimension changed from " + std::to_string(dimension_) + " to " +
                    std::to_string(vec.size()));
    }
    return vec;
}

std::size_t RemoteEmbedder::dimension() const {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        if (dimension_ != 0) return dimension_;
    }
    const std::vector<double> probe = fetch("dimension probe");
    std::lock_guard<std::mutex> lock(mutex_);
    if (dimension_ == 0) dimension_ = probe.size();
    return dimension_;
}

}  // namespace bladekit::chat
