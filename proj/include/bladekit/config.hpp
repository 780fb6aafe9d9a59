#pragma once

#include "bladekit/chat.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace bladekit::config {

struct TileConfig {
    int size_px = 640;
    double overlap = 0.20;
};

struct NmsConfig {
    double iou_threshold = 0.5;
};

struct BridgeConfig {
    double conf_floor = 0.70;
    std::size_t protocol_max_chars = 600;
    std::string query_template;  // empty = bare class label queries
};

struct ValidationConfig {
    double corner_tol = 0.05;
};

// One experiment manifest: every input the pipeline commands need, loaded
// from a single JSON file. Relative paths resolve against the file's parent.
struct RunConfig {
    std::filesystem::path manifest;
    std::filesystem::path detections_dir;
    std::filesystem::path kb;
    std::filesystem::path prompt_system;
    std::filesystem::path prompt_query;
    TileConfig tile;
    NmsConfig nms;
    BridgeConfig bridge;
    ValidationConfig validation;
    std::map<std::string, chat::GenerationConfig> endpoints;  // generate/teacher/judge/embed
    std::filesystem::path out_dir;

    // optional inputs, empty when absent
    std::filesystem::path equivalence_dict;
    std::filesystem::path references;
    std::filesystem::path annotations_dir;

    /// nullptr when the named endpoint block is absent.
    const chat::GenerationConfig* endpoint(const std::string& name) const;
};

/// Parses config JSON; relative paths resolve against base_dir. Every
/// referenced input path must exist. Throws ParseError on bad JSON,
/// ConfigError on structural problems, out-of-range values, or missing files.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir);

RunConfig load_run_config(const std::filesystem::path& file);

}  // namespace bladekit::config
