#include "bladekit/config.hpp"

#include "bladekit/errors.hpp"
#include "bladekit/util.hpp"

#include <nlohmann/json.hpp>

#include <set>

namespace bladekit::config {

using nlohmann::json;

namespace {

const json* member(const json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

std::string require_string(const json& obj, const std::string& key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_string() || it->get<std::string>().empty()) {
        throw ConfigError(where + " needs a non-empty string '" + key + "'");
    }
    return it->get<std::string>();
}

std::filesystem::path resolve(const std::string& raw, const std::filesystem::path& base_dir) {
    std::filesystem::path p(raw);
    if (p.is_relative()) p = base_dir / p;
    return p.lexically_normal();
}

std::filesystem::path input_path(const json& obj, const std::string& key,
                                 const std::filesystem::path& base_dir) {
    const auto p = resolve(require_string(obj, key, "config"), base_dir);
    if (!std::filesystem::exists(p)) {
        throw ConfigError("config path '" + key + "' does not exist: " + p.string());
    }
    return p;
}

double number_in(const json& obj, const char* key, double fallback, double lo, double hi,
                 const std::string& where) {
    const json* v = member(obj, key);
    if (v == nullptr) return fallback;
    if (!v->is_number()) throw ConfigError(where + "." + key + " must be a number");
    const double value = v->get<double>();
    if (value < lo || value > hi) {
        throw ConfigError(where + "." + key + " is out of range [" + util::format_shortest(lo) +
                          ", " + util::format_shortest(hi) + "]");
    }
    return value;
}

chat::GenerationConfig parse_endpoint(const json& block, const std::string& name) {
    if (!block.is_object()) throw ConfigError("endpoints." + name + " must be an object");
    chat::GenerationConfig cfg;
    cfg.endpoint_url = require_string(block, "url", "endpoints." + name);
    cfg.model_id = require_string(block, "model", "endpoints." + name);
    const std::string where = "endpoints." + name;
    cfg.temperature = number_in(block, "temperature", cfg.temperature, 0.0, 2.0, where);
    cfg.max_tokens =
        static_cast<int>(number_in(block, "max_tokens", cfg.max_tokens, 1, 1 << 20, where));
    if (const json* seed = member(block, "seed")) {
        if (!seed->is_number_integer()) throw ConfigError(where + ".seed must be an integer");
        cfg.seed = seed->get<long>();
    }
    cfg.timeout_s = number_in(block, "timeout_s", cfg.timeout_s, 1, 3600, where);
    cfg.max_retries =
        static_cast<int>(number_in(block, "max_retries", cfg.max_retries, 0, 100, where));
    cfg.max_in_flight =
        static_cast<int>(number_in(block, "max_in_flight", cfg.max_in_flight, 1, 1024, where));
    cfg.initial_backoff_s =
        number_in(block, "initial_backoff_s", cfg.initial_backoff_s, 0.0, 60.0, where);
    if (const json* env = member(block, "api_key_env")) {
        if (!env->is_string()) throw ConfigError(where + ".api_key_env must be a string");
        cfg.api_key_env = env->get<std::string>();
    }
    return cfg;
}

}  // namespace

const chat::GenerationConfig* RunConfig::endpoint(const std::string& name) const {
    const auto it = endpoints.find(name);
    return it == endpoints.end() ? nullptr : &it->second;
}

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("run config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("run config must be a JSON object");

    static const std::set<std::string> known{
        "manifest",   "detections_dir", "kb",      "prompts",          "tile",
        "nms",        "bridge",         "validation", "endpoints",     "out_dir",
        "equivalence_dict", "references", "annotations_dir"};
    for (const auto& [key, value] : doc.items()) {
        if (known.find(key) == known.end()) throw ConfigError("unknown config key '" + key + "'");
    }

    RunConfig cfg;
    cfg.manifest = input_path(doc, "manifest", base_dir);
    cfg.detections_dir = input_path(doc, "detections_dir", base_dir);
    cfg.kb = input_path(doc, "kb", base_dir);

    const json* prompts = member(doc, "prompts");
    if (prompts == nullptr || !prompts->is_object()) {
        throw ConfigError("config needs a 'prompts' object with 'system' and 'query'");
    }
    cfg.prompt_system = input_path(*prompts, "system", base_dir);
    cfg.prompt_query = input_path(*prompts, "query", base_dir);

    if (const json* tile = member(doc, "tile")) {
        if (!tile->is_object()) throw ConfigError("tile must be an object");
        cfg.tile.size_px = static_cast<int>(
            number_in(*tile, "size", cfg.tile.size_px, 1, 1 << 16, "tile"));
        cfg.tile.overlap = number_in(*tile, "overlap", cfg.tile.overlap, 0.0, 0.99, "tile");
    }
    if (const json* nms = member(doc, "nms")) {
        if (!nms->is_object()) throw ConfigError("nms must be an object");
        cfg.nms.iou_threshold =
            number_in(*nms, "iou_threshold", cfg.nms.iou_threshold, 0.0, 1.0, "nms");
    }
    if (const json* bridge = member(doc, "bridge")) {
        if (!bridge->is_object()) throw ConfigError("bridge must be an object");
        cfg.bridge.conf_floor =
            number_in(*bridge, "conf_floor", cfg.bridge.conf_floor, 0.0, 1.0, "bridge");
        cfg.bridge.protocol_max_chars = static_cast<std::size_t>(number_in(
            *bridge, "protocol_max_chars",
            static_cast<double>(cfg.bridge.protocol_max_chars), 1, 1 << 20, "bridge"));
        if (const json* tmpl = member(*bridge, "query_template")) {
            if (!tmpl->is_string()) throw ConfigError("bridge.query_template must be a string");
            cfg.bridge.query_template = tmpl->get<std::string>();
        }
    }
    if (const json* validation = member(doc, "validation")) {
        if (!validation->is_object()) throw ConfigError("validation must be an object");
        cfg.validation.corner_tol =
            number_in(*validation, "corner_tol", cfg.validation.corner_tol, 1e-9, 1.0,
                      "validation");
    }

    if (const json* endpoints = member(doc, "endpoints")) {
        if (!endpoints->is_object()) throw ConfigError("endpoints must be an object");
        static const std::set<std::string> roles{"generate", "teacher", "judge", "embed"};
        for (const auto& [name, block] : endpoints->items()) {
            if (roles.find(name) == roles.end()) {
                throw ConfigError("unknown endpoint role '" + name + "'");
            }
            cfg.endpoints.emplace(name, parse_endpoint(block, name));
        }
    }

    cfg.out_dir = resolve(require_string(doc, "out_dir", "config"), base_dir);

    if (member(doc, "equivalence_dict") != nullptr) {
        cfg.equivalence_dict = input_path(doc, "equivalence_dict", base_dir);
    }
    if (member(doc, "references") != nullptr) {
        cfg.references = input_path(doc, "references", base_dir);
    }
    if (member(doc, "annotations_dir") != nullptr) {
        cfg.annotations_dir = input_path(doc, "annotations_dir", base_dir);
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& file) {
    return parse_run_config(util::read_text_file(file.string()), file.parent_path());
}

}  // namespace bladekit::config
