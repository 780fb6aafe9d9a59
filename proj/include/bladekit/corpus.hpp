#pragma once

#include "bladekit/bridge.hpp"
#include "bladekit/chat.hpp"
#include "bladekit/ingest.hpp"
#include "bladekit/report.hpp"

#include <filesystem>
#include <string>

namespace bladekit::corpus {

struct CorpusStats {
    int accepted = 0;
    int rejected = 0;
};

struct CorpusOptions {
    std::filesystem::path detections_dir;  // one {image_id}.txt per image
    std::string split = "train";
    std::string system_preamble;
    std::string query_suffix;
    double conf_floor = 0.70;
    double nms_iou = 0.5;
    const bridge::RetrievalOptions* retrieval = nullptr;
    // taxonomy defaults to the manifest's when left empty
    report::ValidationParams validation;
    std::filesystem::path out_path;
    std::filesystem::path reject_path;
};

// Builds the distillation corpus: for every image in the chosen split, loads
// its detections, assembles the prompt, calls the teacher endpoint, and
// validates the returned report against the prompt's evidence. Accepted
// records land in out_path as JSON lines {image_id, prompt, report}; records
// that fail extraction or validation land in reject_path with their reasons.
// Output order is manifest order regardless of which call finishes first.
// Per-image failures are recorded and the run continues; only configuration
// errors abort. Both files are (re)written even when empty.
CorpusStats build_teacher_corpus(const ingest::DatasetManifest& manifest, const CorpusOptions& opts,
                                 const chat::ChatClient& teacher);

}  // namespace bladekit::corpus
