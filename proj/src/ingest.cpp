#include "bladekit/ingest.hpp"

#include "bladekit/errors.hpp"
#include "bladekit/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace bladekit::ingest {

using geometry::Detection;
using nlohmann::json;

const ManifestImage* DatasetManifest::find(std::string_view image_id) const {
    for (const ManifestImage& img : images) {
        if (img.id == image_id) return &img;
    }
    return nullptr;
}

std::vector<const ManifestImage*> DatasetManifest::split_images(std::string_view split) const {
    std::vector<const ManifestImage*> out;
    for (const ManifestImage& img : images) {
        if (img.split == split) out.push_back(&img);
    }
    return out;
}

std::optional<std::size_t> DatasetManifest::class_index(std::string_view label) const {
    for (std::size_t i = 0; i < taxonomy.size(); ++i) {
        if (taxonomy[i] == label) return i;
    }
    return std::nullopt;
}

namespace {

double parse_double_field(std::string_view tok, const char* what, std::size_t line_no) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw ParseError(std::string(what) + " is not a number: '" + std::string(tok) + "'", line_no);
    }
    return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

}  // namespace

Detection parse_obb_line(std::string_view line, const std::vector<std::string>& taxonomy,
                         std::size_t line_no) {
    const auto fields = split_ws(line);
    if (fields.size() != 9 && fields.size() != 10) {
        throw ParseError("expected 9 or 10 fields, got " + std::to_string(fields.size()), line_no);
    }

    long cls = -1;
    {
        const auto tok = fields[0];
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), cls);
        if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
            throw ParseError("class index is not an integer: '" + std::string(tok) + "'", line_no);
        }
    }
    if (cls < 0 || static_cast<std::size_t>(cls) >= taxonomy.size()) {
        throw ParseError("class index " + std::to_string(cls) + " outside taxonomy of size " +
                             std::to_string(taxonomy.size()),
                         line_no);
    }

    Detection det;
    det.class_label = taxonomy[static_cast<std::size_t>(cls)];
    for (int k = 0; k < 4; ++k) {
        const double x = parse_double_field(fields[1 + 2 * k], "coordinate", line_no);
        const double y = parse_double_field(fields[2 + 2 * k], "coordinate", line_no);
        if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) {
            throw ParseError("coordinate outside [0,1]: (" + std::string(fields[1 + 2 * k]) + ", " +
                                 std::string(fields[2 + 2 * k]) + ")",
                             line_no);
        }
        det.box.corners[k] = {x, y};
    }
    if (fields.size() == 10) {
        det.confidence = parse_double_field(fields[9], "confidence", line_no);
        if (det.confidence < 0.0 || det.confidence > 1.0) {
            throw ParseError("confidence outside [0,1]: " + std::string(fields[9]), line_no);
        }
    } else {
        det.confidence = 1.0;
    }
    if (!geometry::box_valid(det.box)) {
        throw ParseError("corners do not form a convex quadrilateral", line_no);
    }
    return det;
}

std::string format_obb_line(const Detection& det, const std::vector<std::string>& taxonomy) {
    const auto it = std::find(taxonomy.begin(), taxonomy.end(), det.class_label);
    if (it == taxonomy.end()) {
        throw Error("class '" + det.class_label + "' not in taxonomy");
    }
    std::string out = std::to_string(it - taxonomy.begin());
    for (const auto& p : det.box.corners) {
        out += ' ';
        out += util::format_shortest(p.x);
        out += ' ';
        out += util::format_shortest(p.y);
    }
    out += ' ';
    out += util::format_shortest(det.confidence);
    return out;
}

std::vector<Detection> load_detections(const std::filesystem::path& file,
                                       const std::vector<std::string>& taxonomy) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open detection file: " + file.string());
    std::vector<Detection> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string trimmed = util::trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        out.push_back(parse_obb_line(trimmed, taxonomy, line_no));
    }
    return out;
}

void save_detections(const std::filesystem::path& file, const std::vector<Detection>& dets,
                     const std::vector<std::string>& taxonomy) {
    std::string text;
    for (const Detection& d : dets) {
        text += format_obb_line(d, taxonomy);
        text += '\n';
    }
    util::write_text_file(file, text);
}

DatasetManifest load_manifest(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("images") || !doc.contains("taxonomy")) {
        throw ParseError("manifest must be an object with 'images' and 'taxonomy'");
    }

    DatasetManifest manifest;
    for (const auto& t : doc["taxonomy"]) {
        if (!t.is_string() || t.get<std::string>().empty()) {
            throw ParseError("taxonomy entries must be non-empty strings");
        }
        manifest.taxonomy.push_back(t.get<std::string>());
    }
    if (manifest.taxonomy.empty()) throw ParseError("taxonomy is empty");

    if (!doc["images"].is_array() || doc["images"].empty()) {
        throw ParseError("manifest image list is empty");
    }
    for (const auto& entry : doc["images"]) {
        ManifestImage img;
        try {
            img.id = entry.at("id").get<std::string>();
            img.width_px = entry.at("width").get<int>();
            img.height_px = entry.at("height").get<int>();
            img.path = entry.at("path").get<std::string>();
            img.split = entry.at("split").get<std::string>();
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad image entry: ") + e.what());
        }
        if (img.id.empty()) throw ParseError("image id is empty");
        if (img.width_px <= 0 || img.height_px <= 0) {
            throw ParseError("image '" + img.id + "' has non-positive dimensions");
        }
        if (img.split != "train" && img.split != "val" && img.split != "test") {
            throw ParseError("image '" + img.id + "' has unknown split '" + img.split + "'");
        }
        if (manifest.find(img.id) != nullptr) {
            throw ParseError("duplicate image id '" + img.id + "'");
        }
        manifest.images.push_back(std::move(img));
    }
    return manifest;
}

DatasetManifest load_manifest_file(const std::filesystem::path& file) {
    return load_manifest(util::read_text_file(file));
}

}  // namespace bladekit::ingest
