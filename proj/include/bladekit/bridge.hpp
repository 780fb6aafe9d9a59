#pragma once

#include "bladekit/geometry.hpp"
#include "bladekit/knowledge.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bladekit::bridge {

inline constexpr std::string_view kNoDefectsBlock =
    "No defects detected above the confidence threshold.";

struct ProtocolLine {
    std::string procedure_id;
    std::string excerpt;
};

struct DetectionBlock {
    int ordinal = 1;
    geometry::Detection detection;
    geometry::GridCell grid = geometry::GridCell::centre;
    std::optional<ProtocolLine> protocol;
    std::string rendered;
};

// rendered == system_preamble + blocks + query_suffix, blank-line separated
struct AssembledPrompt {
    std::string system_preamble;
    std::vector<DetectionBlock> blocks;
    std::string query_suffix;
    std::string rendered;
};

struct RetrievalOptions {
    const knowledge::KnowledgeBase* kb = nullptr;
    const knowledge::VectorIndex* index = nullptr;
    knowledge::EmbeddingProvider* provider = nullptr;
    int protocol_max_chars = 600;
    // optional; "{class}" is substituted, empty means the bare class label
    std::string query_template;
};

// Renders the fixed block template; confidence percent to one decimal,
// coordinates to two decimals, both half-up.
DetectionBlock encode_detection(const geometry::Detection& d, int ordinal);

// Appends the protocol line. The excerpt is the record body truncated at the
// last sentence boundary within max_chars; the procedure id is prepended when
// truncation removed it.
void attach_protocol(DetectionBlock& block, const knowledge::ProcedureRecord& record, int max_chars);

AssembledPrompt assemble_prompt(const std::vector<geometry::Detection>& detections,
                                const std::string& system_preamble, const std::string& query_suffix,
                                const RetrievalOptions* retrieval = nullptr, double conf_floor = 0.70);

}  // namespace bladekit::bridge
