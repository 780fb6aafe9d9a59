#include "bladekit/bridge.hpp"
#include "bladekit/chat.hpp"
#include "bladekit/config.hpp"
#include "bladekit/corpus.hpp"
#include "bladekit/errors.hpp"
#include "bladekit/evaluation.hpp"
#include "bladekit/geometry.hpp"
#include "bladekit/ingest.hpp"
#include "bladekit/knowledge.hpp"
#include "bladekit/metrics.hpp"
#include "bladekit/report.hpp"
#include "bladekit/util.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

using namespace bladekit;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitEndpoint = 3;

// Everything the pipeline commands share, loaded once per invocation.
struct Pipeline {
    config::RunConfig cfg;
    std::string config_bytes;
    ingest::DatasetManifest manifest;
    knowledge::KnowledgeBase kb;
    std::string system_preamble;
    std::string query_suffix;
};

Pipeline load_pipeline(const std::string& config_path) {
    Pipeline p;
    p.config_bytes = util::read_text_file(config_path);
    p.cfg = config::parse_run_config(p.config_bytes,
                                     std::filesystem::path(config_path).parent_path());
    p.manifest = ingest::load_manifest_file(p.cfg.manifest);
    p.kb = knowledge::load_knowledge_base_file(p.cfg.kb);
    p.system_preamble = util::read_text_file(p.cfg.prompt_system.string());
    p.query_suffix = util::read_text_file(p.cfg.prompt_query.string());
    return p;
}

// Deterministic run identity: config bytes plus the command line that ran.
std::string run_id_of(const Pipeline& p, const std::string& mode) {
    return util::fnv1a64_hex(p.config_bytes + "\n" + mode);
}

std::string retrieval_query(const std::string& tmpl, const std::string& cls) {
    if (tmpl.empty()) return cls;
    std::string query = tmpl;
    const std::size_t pos = query.find("{class}");
    if (pos != std::string::npos) query.replace(pos, 7, cls);
    return query;
}

// Serves cached vectors for the class-label queries the pipeline actually
// issues, so parallel commands never call a single-threaded remote embedder
// concurrently. warm() runs before any parallel section.
class WarmedEmbedder final : public knowledge::EmbeddingProvider {
public:
    explicit WarmedEmbedder(knowledge::EmbeddingProvider& inner) : inner_(inner) {}

    void warm(const std::string& text) { cache_.emplace(text, inner_.embed(text)); }

    std::vector<double> embed(const std::string& text) override {
        const auto it = cache_.find(text);
        if (it != cache_.end()) return it->second;
        return inner_.embed(text);
    }
    const std::string& embedder_id() const override { return inner_.embedder_id(); }
    std::size_t dimension() const override { return inner_.dimension(); }

private:
    knowledge::EmbeddingProvider& inner_;
    std::map<std::string, std::vector<double>> cache_;
};

// Owns the embedder, the vector index, and the options bridge needs.
struct Retrieval {
    std::unique_ptr<knowledge::EmbeddingProvider> base;
    std::unique_ptr<WarmedEmbedder> embedder;
    knowledge::VectorIndex index;
    bridge::RetrievalOptions options;
};

std::unique_ptr<Retrieval> make_retrieval(const Pipeline& p) {
    auto r = std::make_unique<Retrieval>();
    if (const auto* embed_cfg = p.cfg.endpoint("embed")) {
        r->base = std::make_unique<chat::RemoteEmbedder>(*embed_cfg);
    } else {
        r->base = std::make_unique<knowledge::LexicalEmbedder>();
    }
    r->embedder = std::make_unique<WarmedEmbedder>(*r->base);
    r->index = knowledge::build_index(p.kb.records, *r->embedder);
    for (const std::string& cls : p.manifest.taxonomy) {
        r->embedder->warm(retrieval_query(p.cfg.bridge.query_template, cls));
    }
    r->options.kb = &p.kb;
    r->options.index = &r->index;
    r->options.provider = r->embedder.get();
    r->options.protocol_max_chars = static_cast<int>(p.cfg.bridge.protocol_max_chars);
    r->options.query_template = p.cfg.bridge.query_template;
    return r;
}

std::filesystem::path detection_file(const Pipeline& p, const std::string& image_id) {
    return p.cfg.detections_dir / (image_id + ".txt");
}

// Detections the generation prompt was built from: NMS plus confidence floor,
// exactly the transform assemble_prompt applies.
std::vector<geometry::Detection> evidence_for(const Pipeline& p, const std::string& image_id) {
    const auto path = detection_file(p, image_id);
    if (!std::filesystem::exists(path)) {
        throw ConfigError("no detection file for image '" + image_id + "': " + path.string());
    }
    const auto raw = ingest::load_detections(path, p.manifest.taxonomy);
    const auto kept = geometry::nms(raw, p.cfg.nms.iou_threshold);
    std::vector<geometry::Detection> evidence;
    for (const auto& d : kept) {
        if (d.confidence >= p.cfg.bridge.conf_floor) evidence.push_back(d);
    }
    return evidence;
}

report::ValidationParams validation_params(const Pipeline& p) {
    report::ValidationParams params;
    params.taxonomy = p.manifest.taxonomy;
    params.kb = &p.kb;
    params.corner_tol = p.cfg.validation.corner_tol;
    return params;
}

json violations_json(const std::vector<report::Violation>& violations) {
    json arr = json::array();
    for (const auto& v : violations) {
        json entry{{"kind", std::string(report::violation_kind_name(v.kind))},
                   {"detail", v.detail}};
        if (v.defect_index.has_value()) entry["defect_index"] = *v.defect_index;
        arr.push_back(std::move(entry));
    }
    return arr;
}

std::string csv_field(const std::string& raw) {
    if (raw.find_first_of(",\"\n") == std::string::npos) return raw;
    std::string quoted = "\"";
    for (const char c : raw) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::string text;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i > 0) text += ',';
        text += csv_field(header[i]);
    }
    text += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) text += ',';
            text += csv_field(row[i]);
        }
        text += '\n';
    }
    util::write_text_file(path.string(), text);
}

std::string fmt(double value) { return util::format_shortest(value); }

// ---------------------------------------------------------------- tile-plan

int cmd_tile_plan(int width, int height, int size, double overlap) {
    const auto plan = geometry::tile_plan(width, height, size, overlap);
    json offsets = json::array();
    for (const auto& t : plan.offsets) {
        offsets.push_back({{"index", t.index}, {"col_px", t.col_px}, {"row_px", t.row_px}});
    }
    const json out{{"image_width_px", plan.image_width_px},
                   {"image_height_px", plan.image_height_px},
                   {"tile_px", plan.tile_size_px},
                   {"overlap", plan.overlap_ratio},
                   {"count", plan.offsets.size()},
                   {"offsets", offsets}};
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------- bridge

int cmd_bridge(const std::string& config_path, const std::string& image_id, bool raft) {
    const Pipeline p = load_pipeline(config_path);
    if (p.manifest.find(image_id) == nullptr) {
        throw ConfigError("image '" + image_id + "' is not in the manifest");
    }
    const auto path = detection_file(p, image_id);
    if (!std::filesystem::exists(path)) {
        throw ConfigError("no detection file for image '" + image_id + "': " + path.string());
    }
    auto detections = ingest::load_detections(path, p.manifest.taxonomy);
    detections = geometry::nms(detections, p.cfg.nms.iou_threshold);

    std::unique_ptr<Retrieval> retrieval;
    if (raft) retrieval = make_retrieval(p);
    const auto prompt =
        bridge::assemble_prompt(detections, p.system_preamble, p.query_suffix,
                                retrieval ? &retrieval->options : nullptr, p.cfg.bridge.conf_floor);
    std::cout << prompt.rendered;
    return kExitOk;
}

// ----------------------------------------------------------------- generate

int cmd_generate(const Pipeline& p, const std::string& split,
                 const std::filesystem::path& out_dir, bool raft) {
    const auto* gen_cfg = p.cfg.endpoint("generate");
    if (gen_cfg == nullptr) throw ConfigError("config has no 'generate' endpoint");
    const auto images = p.manifest.split_images(split);
    if (images.empty()) throw ConfigError("no images in split '" + split + "'");

    std::unique_ptr<Retrieval> retrieval;
    if (raft) retrieval = make_retrieval(p);
    const chat::ChatClient client(*gen_cfg);
    const auto params = validation_params(p);

    const auto reports_dir = out_dir / "reports";
    std::filesystem::create_directories(reports_dir);

    struct Outcome {
        json log;
        bool transport = false;
        bool failed = false;
        std::size_t violations = 0;
    };
    std::vector<Outcome> outcomes(images.size());

    util::parallel_indexed(images.size(), client.config().max_in_flight, [&](std::size_t i) {
        const std::string& image_id = images[i]->id;
        Outcome& slot = outcomes[i];
        try {
            const auto path = detection_file(p, image_id);
            if (!std::filesystem::exists(path)) {
                throw Error("no detection file: " + path.string());
            }
            auto detections = ingest::load_detections(path, p.manifest.taxonomy);
            detections = geometry::nms(detections, p.cfg.nms.iou_threshold);
            const auto prompt = bridge::assemble_prompt(
                detections, p.system_preamble, p.query_suffix,
                retrieval ? &retrieval->options : nullptr, p.cfg.bridge.conf_floor);
            const auto result = chat::chat_complete(prompt, client);
            const auto extracted = report::extract_json(result.content);

            std::vector<geometry::Detection> evidence;
            for (const auto& block : prompt.blocks) evidence.push_back(block.detection);
            const auto violations =
                report::validate_report(extracted.report, evidence, params);

            const auto report_path = reports_dir / (image_id + ".json");
            util::write_text_file(report_path.string(),
                                  report::serialize_report(extracted.report).dump(2) + "\n");

            slot.violations = violations.size();
            slot.log = json{{"image_id", image_id},
                            {"status", "ok"},
                            {"report", "reports/" + image_id + ".json"},
                            {"attempts", result.attempts},
                            {"request_hash", result.request_hash},
                            {"response_hash", result.response_hash},
                            {"violations", violations_json(violations)}};
            if (!extracted.unknown_fields.empty()) {
                slot.log["unknown_fields"] = extracted.unknown_fields;
            }
        } catch (const HttpError& e) {
            slot.transport = true;
            slot.log = json{{"image_id", image_id},
                            {"status", "transport_error"},
                            {"error", e.what()}};
        } catch (const std::exception& e) {
            slot.failed = true;
            slot.log = json{{"image_id", image_id},
                            {"status", "extraction_error"},
                            {"error", e.what()}};
        }
    });

    const std::string rid = run_id_of(p, "generate:" + split);
    std::string log_text =
        json{{"run_id", rid}, {"split", split}, {"images", images.size()}}.dump() + "\n";
    std::size_t written = 0;
    std::size_t transport = 0;
    std::size_t failed = 0;
    std::size_t violations = 0;
    for (const auto& slot : outcomes) {
        log_text += slot.log.dump() + "\n";
        if (slot.transport) {
            ++transport;
        } else if (slot.failed) {
            ++failed;
        } else {
            ++written;
            violations += slot.violations;
        }
    }
    util::write_text_file((out_dir / "generate_log.jsonl").string(), log_text);

    std::cout << "generated " << written << " reports, " << transport
              << " transport failures, " << failed << " extraction errors, " << violations
              << " violations\n";
    return transport > 0 ? kExitEndpoint : kExitOk;
}

// --------------------------------------------------------------------- eval

struct LoadedReport {
    std::string image_id;
    report::MaintenanceReport report;
};

std::vector<LoadedReport> load_reports(const Pipeline& p,
                                       const std::filesystem::path& reports_dir) {
    std::vector<LoadedReport> loaded;
    for (const auto& image : p.manifest.images) {
        const auto path = reports_dir / (image.id + ".json");
        if (!std::filesystem::exists(path)) continue;
        auto extracted = report::extract_json(util::read_text_file(path.string()));
        loaded.push_back({image.id, std::move(extracted.report)});
    }
    if (loaded.empty()) {
        throw ConfigError("no report files under " + reports_dir.string() +
                          " match the manifest");
    }
    return loaded;
}

// Prose the text metrics grade: the summary plus each recommendation.
std::string candidate_text(const report::MaintenanceReport& r) {
    std::string text = r.summary;
    for (const auto& d : r.defects) {
        if (!text.empty()) text += ' ';
        text += d.recommendation;
    }
    return text;
}

std::vector<double> load_score_series(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(util::read_text_file(path.string()));
    } catch (const json::exception& e) {
        throw ParseError("score file " + path.string() + " is not valid JSON: " + e.what());
    }
    const json* series = &doc;
    if (doc.is_object()) {
        if (!doc.contains("per_image")) {
            throw ConfigError("score file " + path.string() +
                              " has neither a top-level array nor 'per_image'");
        }
        series = &doc["per_image"];
    }
    if (!series->is_array()) throw ConfigError("score file " + path.string() + " is not a list");
    std::vector<double> values;
    for (const json& entry : *series) {
        if (entry.is_number()) {
            values.push_back(entry.get<double>());
        } else if (entry.is_object() && entry.contains("mean") && entry["mean"].is_number()) {
            values.push_back(entry["mean"].get<double>());
        } else {
            throw ConfigError("score file " + path.string() +
                              " holds an entry that is neither a number nor {mean: ...}");
        }
    }
    return values;
}

struct EvalOutput {
    json per_image = json::array();
    json aggregate = json::object();
    std::vector<std::string> csv_header;
    std::vector<std::vector<std::string>> csv_rows;
    std::string summary_line;
};

EvalOutput eval_text(const Pipeline& p, const std::vector<LoadedReport>& reports) {
    if (p.cfg.references.empty()) {
        throw ConfigError("eval text needs 'references' in the config");
    }
    const json refs = json::parse(util::read_text_file(p.cfg.references.string()));
    EvalOutput out;
    out.csv_header = {"image_id", "bleu4", "rouge_l"};
    double bleu_sum = 0.0;
    double rouge_sum = 0.0;
    for (const auto& entry : reports) {
        if (!refs.contains(entry.image_id)) {
            throw ConfigError("no reference text for image '" + entry.image_id + "'");
        }
        std::vector<std::string> references;
        for (const json& r : refs.at(entry.image_id)) references.push_back(r.get<std::string>());
        const std::string candidate = candidate_text(entry.report);
        const double bleu = metrics::bleu4(candidate, references);
        double rouge = 0.0;
        for (const auto& reference : references) {
            rouge = std::max(rouge, metrics::rouge_l(candidate, reference));
        }
        bleu_sum += bleu;
        rouge_sum += rouge;
        out.per_image.push_back(
            {{"image_id", entry.image_id}, {"bleu4", bleu}, {"rouge_l", rouge}});
        out.csv_rows.push_back({entry.image_id, fmt(bleu), fmt(rouge)});
    }
    const double n = static_cast<double>(reports.size());
    out.aggregate = {{"bleu4", bleu_sum / n}, {"rouge_l", rouge_sum / n}, {"images", reports.size()}};
    out.summary_line = "bleu4 " + fmt(bleu_sum / n) + " rouge_l " + fmt(rouge_sum / n) + " over " +
                       std::to_string(reports.size()) + " images";
    return out;
}

EvalOutput eval_recall(const Pipeline& p, const std::vector<LoadedReport>& reports) {
    if (p.cfg.annotations_dir.empty()) {
        throw ConfigError("eval recall needs 'annotations_dir' in the config");
    }
    evaluation::EquivalenceDictionary dict;
    if (!p.cfg.equivalence_dict.empty()) {
        dict = evaluation::EquivalenceDictionary::load_file(p.cfg.equivalence_dict,
                                                            p.manifest.taxonomy);
    }
    std::map<std::string, std::vector<std::string>> predicted;
    std::vector<ingest::AnnotationSet> truth;
    EvalOutput out;
    out.csv_header = {"image_id", "mentions", "truth_instances"};
    for (const auto& entry : reports) {
        auto& mentions = predicted[entry.image_id];
        for (const auto& d : entry.report.defects) mentions.push_back(d.defect_class);

        const auto path = p.cfg.annotations_dir / (entry.image_id + ".txt");
        if (!std::filesystem::exists(path)) {
            throw ConfigError("no annotation file for image '" + entry.image_id +
                              "': " + path.string());
        }
        ingest::AnnotationSet set;
        set.image_id = entry.image_id;
        set.ground_truth = ingest::load_detections(path, p.manifest.taxonomy);
        out.per_image.push_back({{"image_id", entry.image_id},
                                 {"mentions", mentions.size()},
                                 {"truth_instances", set.ground_truth.size()}});
        out.csv_rows.push_back({entry.image_id, std::to_string(mentions.size()),
                                std::to_string(set.ground_truth.size())});
        truth.push_back(std::move(set));
    }
    const auto scores = evaluation::per_class_recall(predicted, truth, dict, p.manifest.taxonomy);
    json per_class = json::object();
    for (const auto& [label, recall] : scores.per_class) per_class[label] = recall;
    out.aggregate = {{"per_class", per_class}, {"macro", scores.macro}};
    out.summary_line = "macro_recall " + fmt(scores.macro) + " over " +
                       std::to_string(scores.per_class.size()) + " classes";
    return out;
}

EvalOutput eval_hallucination(const Pipeline& p, const std::vector<LoadedReport>& reports) {
    const auto params = validation_params(p);
    std::vector<evaluation::GroundedReport> corpus;
    EvalOutput out;
    out.csv_header = {"image_id", "entries", "violations"};
    for (const auto& entry : reports) {
        evaluation::GroundedReport grounded{entry.report, evidence_for(p, entry.image_id)};
        const auto violations =
            report::validate_report(grounded.report, grounded.evidence, params);
        out.per_image.push_back({{"image_id", entry.image_id},
                                 {"entries", entry.report.defects.size()},
                                 {"violations", violations_json(violations)}});
        out.csv_rows.push_back({entry.image_id, std::to_string(entry.report.defects.size()),
                                std::to_string(violations.size())});
        corpus.push_back(std::move(grounded));
    }
    const auto rates = evaluation::hallucination_rates(corpus, params);
    out.aggregate = {{"shr", rates.shr},
                     {"hr", rates.hr},
                     {"entries", rates.entries},
                     {"spatially_flagged", rates.spatially_flagged},
                     {"flagged", rates.flagged}};
    out.summary_line = "shr " + fmt(rates.shr) + " hr " + fmt(rates.hr) + " over " +
                       std::to_string(rates.entries) + " entries";
    return out;
}

EvalOutput eval_pcr(const Pipeline& p, const std::vector<LoadedReport>& reports) {
    const auto retrieval = make_retrieval(p);
    std::vector<report::MaintenanceReport> plain;
    std::vector<const knowledge::ProcedureRecord*> retrieved;
    EvalOutput out;
    out.csv_header = {"image_id", "entries", "retrieved", "rate"};
    for (const auto& entry : reports) {
        const knowledge::ProcedureRecord* record = nullptr;
        if (!entry.report.defects.empty()) {
            const auto query = retrieval_query(p.cfg.bridge.query_template,
                                               entry.report.defects.front().defect_class);
            const auto top =
                knowledge::retrieve_top1(query, retrieval->index, *retrieval->embedder);
            record = p.kb.find(top.procedure_id);
        }
        const double rate = evaluation::pcr({entry.report}, {record});
        out.per_image.push_back({{"image_id", entry.image_id},
                                 {"entries", entry.report.defects.size()},
                                 {"retrieved", record ? record->procedure_id : ""},
                                 {"rate", rate}});
        out.csv_rows.push_back({entry.image_id, std::to_string(entry.report.defects.size()),
                                record ? record->procedure_id : "", fmt(rate)});
        plain.push_back(entry.report);
        retrieved.push_back(record);
    }
    const double rate = evaluation::pcr(plain, retrieved);
    std::size_t entries = 0;
    for (const auto& r : plain) entries += r.defects.size();
    out.aggregate = {{"pcr", rate}, {"entries", entries}};
    out.summary_line =
        "pcr " + fmt(rate) + " over " + std::to_string(entries) + " entries";
    return out;
}

EvalOutput eval_judge(const Pipeline& p, const std::vector<LoadedReport>& reports) {
    const auto* judge_cfg = p.cfg.endpoint("judge");
    if (judge_cfg == nullptr) throw ConfigError("config has no 'judge' endpoint");
    std::vector<evaluation::GroundedReport> corpus;
    for (const auto& entry : reports) {
        corpus.push_back({entry.report, evidence_for(p, entry.image_id)});
    }
    const chat::ChatClient judge(*judge_cfg);
    const auto scores = evaluation::judge_reports(corpus, judge);

    EvalOutput out;
    out.csv_header = {"image_id", "factuality", "domain_alignment", "actionability", "mean"};
    double f = 0.0;
    double d = 0.0;
    double a = 0.0;
    double m = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto& s = scores[i];
        out.per_image.push_back({{"image_id", reports[i].image_id},
                                 {"factuality", s.factuality},
                                 {"domain_alignment", s.domain_alignment},
                                 {"actionability", s.actionability},
                                 {"mean", s.mean},
                                 {"rationale", s.rationale}});
        out.csv_rows.push_back({reports[i].image_id, std::to_string(s.factuality),
                                std::to_string(s.domain_alignment),
                                std::to_string(s.actionability), fmt(s.mean)});
        f += s.factuality;
        d += s.domain_alignment;
        a += s.actionability;
        m += s.mean;
    }
    const double n = static_cast<double>(scores.size());
    out.aggregate = {{"factuality", f / n},
                     {"domain_alignment", d / n},
                     {"actionability", a / n},
                     {"mean", m / n},
                     {"reports", scores.size()}};
    out.summary_line =
        "judge_mean " + fmt(m / n) + " over " + std::to_string(scores.size()) + " reports";
    return out;
}

EvalOutput eval_agreement(const std::filesystem::path& xs_path,
                          const std::filesystem::path& ys_path) {
    if (xs_path.empty() || ys_path.empty()) {
        throw ConfigError("eval agreement needs --xs and --ys score files");
    }
    const auto xs = load_score_series(xs_path);
    const auto ys = load_score_series(ys_path);
    const auto result = evaluation::pearson_agreement(xs, ys);

    EvalOutput out;
    out.csv_header = {"index", "x", "y"};
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out.per_image.push_back({{"index", i}, {"x", xs[i]}, {"y", ys[i]}});
        out.csv_rows.push_back({std::to_string(i), fmt(xs[i]), fmt(ys[i])});
    }
    out.aggregate = {
        {"r", result.r}, {"ci_low", result.ci_low}, {"ci_high", result.ci_high}, {"n", xs.size()}};
    out.summary_line = "r " + fmt(result.r) + " ci95 [" + fmt(result.ci_low) + ", " +
                       fmt(result.ci_high) + "] n " + std::to_string(xs.size());
    return out;
}

int cmd_eval(const Pipeline& p, const std::string& mode, const std::filesystem::path& out_dir,
             const std::filesystem::path& reports_dir, const std::filesystem::path& xs_path,
             const std::filesystem::path& ys_path) {
    EvalOutput out;
    if (mode == "agreement") {
        out = eval_agreement(xs_path, ys_path);
    } else {
        const auto reports = load_reports(p, reports_dir);
        if (mode == "text") {
            out = eval_text(p, reports);
        } else if (mode == "recall") {
            out = eval_recall(p, reports);
        } else if (mode == "hallucination") {
            out = eval_hallucination(p, reports);
        } else if (mode == "pcr") {
            out = eval_pcr(p, reports);
        } else if (mode == "judge") {
            out = eval_judge(p, reports);
        } else {
            throw ConfigError("unknown eval mode '" + mode + "'");
        }
    }

    const auto eval_dir = out_dir / "eval";
    std::filesystem::create_directories(eval_dir);
    const json doc{{"run_id", run_id_of(p, "eval:" + mode)},
                   {"mode", mode},
                   {"per_image", out.per_image},
                   {"aggregate", out.aggregate}};
    util::write_text_file((eval_dir / (mode + ".json")).string(), doc.dump(2) + "\n");
    write_csv(eval_dir / (mode + ".csv"), out.csv_header, out.csv_rows);
    std::cout << out.summary_line << "\n";
    return kExitOk;
}

// ----------------------------------------------------------------- kb-index

int cmd_kb_index(const Pipeline& p) {
    const auto retrieval = make_retrieval(p);
    std::cout << retrieval->index.entries.size() << " records indexed\n";
    return kExitOk;
}

// ----------------------------------------------------------- corpus-teacher

int cmd_corpus_teacher(const Pipeline& p, const std::string& split,
                       const std::filesystem::path& out_dir) {
    const auto* teacher_cfg = p.cfg.endpoint("teacher");
    if (teacher_cfg == nullptr) throw ConfigError("config has no 'teacher' endpoint");

    const auto retrieval = make_retrieval(p);
    corpus::CorpusOptions opts;
    opts.detections_dir = p.cfg.detections_dir;
    opts.split = split;
    opts.system_preamble = p.system_preamble;
    opts.query_suffix = p.query_suffix;
    opts.conf_floor = p.cfg.bridge.conf_floor;
    opts.nms_iou = p.cfg.nms.iou_threshold;
    opts.retrieval = &retrieval->options;
    opts.validation = validation_params(p);
    std::filesystem::create_directories(out_dir);
    opts.out_path = out_dir / "teacher_corpus.jsonl";
    opts.reject_path = out_dir / "teacher_rejects.jsonl";

    const chat::ChatClient teacher(*teacher_cfg);
    const auto stats = corpus::build_teacher_corpus(p.manifest, opts, teacher);
    std::cout << stats.accepted << " accepted, " << stats.rejected << " rejected\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wind turbine blade inspection pipeline"};
    app.require_subcommand(1);

    // tile-plan
    int tp_width = 0;
    int tp_height = 0;
    int tp_size = 0;
    double tp_overlap = 0.0;
    auto* tile = app.add_subcommand("tile-plan", "Print the tiling plan for an image as JSON");
    tile->add_option("width", tp_width, "image width in pixels")->required();
    tile->add_option("height", tp_height, "image height in pixels")->required();
    tile->add_option("size", tp_size, "tile edge in pixels")->required();
    tile->add_option("overlap", tp_overlap, "overlap ratio in [0, 1)")->required();

    // shared options; --split keeps per-command defaults
    std::string config_path;
    std::string image_id;
    std::string gen_split = "test";
    std::string teacher_split = "train";
    std::string out_override;
    std::string reports_override;
    bool raft = false;
    bool no_raft = false;

    auto* bridge_cmd =
        app.add_subcommand("bridge", "Render the prompt for one image to stdout");
    bridge_cmd->add_option("--config", config_path, "run config JSON")->required();
    bridge_cmd->add_option("image_id", image_id, "manifest image id")->required();
    bridge_cmd->add_flag("--raft", raft, "attach retrieved procedure excerpts");

    auto* generate =
        app.add_subcommand("generate", "Generate one validated report per image in a split");
    generate->add_option("--config", config_path, "run config JSON")->required();
    generate->add_option("--split", gen_split, "manifest split (default test)");
    generate->add_option("--out", out_override, "output directory (default config out_dir)");
    generate->add_flag("--no-raft", no_raft, "disable retrieval augmentation");

    std::string eval_mode;
    std::string xs_path;
    std::string ys_path;
    auto* eval_cmd = app.add_subcommand("eval", "Score generated reports");
    eval_cmd->add_option("--config", config_path, "run config JSON")->required();
    eval_cmd
        ->add_option("mode", eval_mode,
                     "one of: text, recall, hallucination, pcr, judge, agreement")
        ->required()
        ->check(CLI::IsMember({"text", "recall", "hallucination", "pcr", "judge", "agreement"}));
    eval_cmd->add_option("--out", out_override, "output directory (default config out_dir)");
    eval_cmd->add_option("--reports", reports_override,
                         "reports directory (default <out>/reports)");
    eval_cmd->add_option("--xs", xs_path, "agreement mode: first score series");
    eval_cmd->add_option("--ys", ys_path, "agreement mode: second score series");

    auto* kb_index = app.add_subcommand("kb-index", "Build the retrieval index and print stats");
    kb_index->add_option("--config", config_path, "run config JSON")->required();

    auto* corpus_teacher =
        app.add_subcommand("corpus-teacher", "Distill the teacher corpus for a split");
    corpus_teacher->add_option("--config", config_path, "run config JSON")->required();
    corpus_teacher->add_option("--split", teacher_split, "manifest split (default train)");
    corpus_teacher->add_option("--out", out_override,
                               "output directory (default config out_dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (tile->parsed()) return cmd_tile_plan(tp_width, tp_height, tp_size, tp_overlap);
        if (bridge_cmd->parsed()) return cmd_bridge(config_path, image_id, raft);

        const Pipeline p = load_pipeline(config_path);
        const std::filesystem::path out_dir =
            out_override.empty() ? p.cfg.out_dir : std::filesystem::path(out_override);
        if (generate->parsed()) return cmd_generate(p, gen_split, out_dir, !no_raft);
        if (eval_cmd->parsed()) {
            const std::filesystem::path reports_dir = reports_override.empty()
                                                          ? out_dir / "reports"
                                                          : std::filesystem::path(reports_override);
            return cmd_eval(p, eval_mode, out_dir, reports_dir, xs_path, ys_path);
        }
        if (kb_index->parsed()) return cmd_kb_index(p);
        if (corpus_teacher->parsed()) return cmd_corpus_teacher(p, teacher_split, out_dir);
    } catch (const HttpError& e) {
        std::fprintf(stderr, "bladekit: endpoint failure: %s\n", e.what());
        return kExitEndpoint;
    } catch (const JudgeError& e) {
        std::fprintf(stderr, "bladekit: judge failure: %s\n", e.what());
        return kExitEndpoint;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "bladekit: %s\n", e.what());
        return kExitUsage;
    }
    return kExitOk;
}
