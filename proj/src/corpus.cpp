#include "bladekit/corpus.hpp"

#include "bladekit/errors.hpp"
#include "bladekit/util.hpp"

#include <nlohmann/json.hpp>

#include <mutex>
#include <optional>
#include <vector>

namespace bladekit::corpus {

using nlohmann::json;

namespace {

struct ImageOutcome {
    std::string accept_line;
    std::string reject_line;
};

}  // namespace

CorpusStats build_teacher_corpus(const ingest::DatasetManifest& manifest, const CorpusOptions& opts,
                                 const chat::ChatClient& teacher) {
    if (opts.out_path.empty()) throw ConfigError("corpus out_path is empty");
    if (opts.reject_path.empty()) throw ConfigError("corpus reject_path is empty");
    if (opts.detections_dir.empty()) throw ConfigError("corpus detections_dir is empty");

    report::ValidationParams vparams = opts.validation;
    if (vparams.taxonomy.empty()) vparams.taxonomy = manifest.taxonomy;

    const std::vector<const ingest::ManifestImage*> images = manifest.split_images(opts.split);
    std::vector<ImageOutcome> outcomes(images.size());

    // config problems are fatal for the whole run, not per-image rejects
    std::mutex fatal_mutex;
    std::optional<ConfigError> fatal;

    util::parallel_indexed(images.size(), teacher.config().max_in_flight, [&](std::size_t i) {
        const ingest::ManifestImage& image = *images[i];
        ImageOutcome& outcome = outcomes[i];
        try {
            auto detections = ingest::load_detections(
                opts.detections_dir / (image.id + ".txt"), manifest.taxonomy);
            detections = geometry::nms(detections, opts.nms_iou);

            const bridge::AssembledPrompt prompt = bridge::assemble_prompt(
                detections, opts.system_preamble, opts.query_suffix, opts.retrieval,
                opts.conf_floor);
            const chat::ChatResult result = chat::chat_complete(prompt, teacher);

            std::vector<std::string> reasons;
            json accepted_report;
            try {
                const report::ExtractedReport extracted = report::extract_json(result.content);
                std::vector<geometry::Detection> evidence;
                evidence.reserve(prompt.blocks.size());
                for (const bridge::DetectionBlock& block : prompt.blocks) {
                    evidence.push_back(block.detection);
                }
                const auto violations =
                    report::validate_report(extracted.report, evidence, vparams);
                if (violations.empty()) {
                    accepted_report = report::serialize_report(extracted.report);
                } else {
                    for (const report::Violation& v : violations) {
                        reasons.push_back(std::string(report::violation_kind_name(v.kind)) + ": " +
                                          v.detail);
                    }
                }
            } catch (const SchemaError& e) {
                for (const std::string& field : e.fields()) reasons.push_back("schema: " + field);
                if (e.fields().empty()) reasons.push_back(e.what());
            } catch (const ParseError& e) {
                reasons.push_back(e.what());
            }

            if (reasons.empty()) {
                outcome.accept_line = json{{"image_id", image.id},
                                           {"prompt", prompt.rendered},
                                           {"report", accepted_report}}
                                          .dump();
            } else {
                outcome.reject_line = json{{"image_id", image.id},
                                           {"prompt", prompt.rendered},
                                           {"raw", result.content},
                                           {"reasons", reasons}}
                                          .dump();
            }
        } catch (const ConfigError& e) {
            const std::lock_guard<std::mutex> lock(fatal_mutex);
            if (!fatal.has_value()) fatal = e;
        } catch (const std::exception& e) {
            // missing detections, endpoint failure after retries, ...
            outcome.reject_line =
                json{{"image_id", image.id}, {"reasons", {std::string(e.what())}}}.dump();
        }
    });

    if (fatal.has_value()) throw *fatal;

    CorpusStats stats;
    std::string accepted_text;
    std::string rejected_text;
    for (const ImageOutcome& outcome : outcomes) {
        if (!outcome.accept_line.empty()) {
            accepted_text += outcome.accept_line;
            accepted_text += '\n';
            ++stats.accepted;
        } else if (!outcome.reject_line.empty()) {
            rejected_text += outcome.reject_line;
            rejected_text += '\n';
            ++stats.rejected;
        }
    }
    util::write_text_file(opts.out_path.string(), accepted_text);
    util::write_text_file(opts.reject_path.string(), rejected_text);
    return stats;
}

}  // namespace bladekit::corpus
