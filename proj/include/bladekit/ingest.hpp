#pragma once

#include "bladekit/geometry.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bladekit::ingest {

struct ManifestImage {
    std::string id;
    int width_px = 0;
    int height_px = 0;
    std::string path;
    std::string split;  // train | val | test
};

struct DatasetManifest {
    std::vector<ManifestImage> images;
    std::vector<std::string> taxonomy;

    const ManifestImage* find(std::string_view image_id) const;
    std::vector<const ManifestImage*> split_images(std::string_view split) const;
    // index of `label` in the taxonomy, or nullopt
    std::optional<std::size_t> class_index(std::string_view label) const;
};

struct AnnotationSet {
    std::string image_id;
    std::vector<geometry::Detection> ground_truth;
};

// One whitespace-separated record:
//   class_index x1 y1 x2 y2 x3 y3 x4 y4 [confidence]
// Throws ParseError naming `line_no` on malformed input.
geometry::Detection parse_obb_line(std::string_view line, const std::vector<std::string>& taxonomy,
                                   std::size_t line_no = 0);

// Canonical form: 10 fields, shortest round-trip float text, single spaces.
std::string format_obb_line(const geometry::Detection& det, const std::vector<std::string>& taxonomy);

// One file per image; `#` comment lines and blank lines are skipped.
std::vector<geometry::Detection> load_detections(const std::filesystem::path& file,
                                                 const std::vector<std::string>& taxonomy);
void save_detections(const std::filesystem::path& file, const std::vector<geometry::Detection>& dets,
                     const std::vector<std::string>& taxonomy);

DatasetManifest load_manifest(const std::string& json_text);
DatasetManifest load_manifest_file(const std::filesystem::path& file);

}  // namespace bladekit::ingest
