#include "bladekit/evaluation.hpp"

#include "bladekit/errors.hpp"
#include "bladekit/metrics.hpp"
#include "bladekit/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>
#include <utility>

namespace bladekit::evaluation {

using nlohmann::json;

EquivalenceDictionary EquivalenceDictionary::parse(const std::string& json_text,
                                                   const std::vector<std::string>& taxonomy) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("equivalence dictionary is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("equivalence dictionary must be a JSON object");

    EquivalenceDictionary dict;
    const auto add = [&dict](const std::string& phrase, const std::string& canonical) {
        const std::string key = util::to_lower(util::trim(phrase));
        if (key.empty()) throw ConfigError("equivalence dictionary phrase is empty");
        const auto [it, inserted] = dict.phrase_to_class_.emplace(key, canonical);
        if (!inserted && it->second != canonical) {
            throw ConfigError("phrase '" + key + "' is claimed by both '" + it->second +
                              "' and '" + canonical + "'");
        }
    };

    // class names always map to themselves, so no entry can claim another class
    for (const std::string& canonical : taxonomy) add(canonical, canonical);

    for (const auto& [canonical, phrases] : doc.items()) {
        if (std::find(taxonomy.begin(), taxonomy.end(), canonical) == taxonomy.end()) {
            throw ConfigError("equivalence dictionary class '" + canonical +
                              "' is not in the taxonomy");
        }
        if (!phrases.is_array()) {
            throw ConfigError("equivalence dictionary entry '" + canonical +
                              "' must be an array of phrases");
        }
        for (const json& phrase : phrases) {
            if (!phrase.is_string()) {
                throw ConfigError("equivalence dictionary entry '" + canonical +
                                  "' holds a non-string phrase");
            }
            add(phrase.get<std::string>(), canonical);
        }
    }
    return dict;
}

EquivalenceDictionary EquivalenceDictionary::load_file(const std::filesystem::path& path,
                                                       const std::vector<std::string>& taxonomy) {
    return parse(util::read_text_file(path.string()), taxonomy);
}

std::string EquivalenceDictionary::canonicalize(std::string_view mention) const {
    const auto hit = phrase_to_class_.find(util::to_lower(util::trim(mention)));
    if (hit != phrase_to_class_.end()) return hit->second;
    return std::string(mention);
}

RecallScores per_class_recall(const std::map<std::string, std::vector<std::string>>& predicted,
                              const std::vector<ingest::AnnotationSet>& truth,
                              const EquivalenceDictionary& dict,
                              const std::vector<std::string>& taxonomy) {
    // canonical prediction sets per image, lowercased for comparison
    std::map<std::string, std::set<std::string>> canonical_mentions;
    for (const auto& [image_id, mentions] : predicted) {
        auto& slot = canonical_mentions[image_id];
        for (const std::string& mention : mentions) {
            slot.insert(util::to_lower(dict.canonicalize(mention)));
        }
    }

    std::map<std::string, std::pair<long, long>> tallies;  // class -> {identified, total}
    for (const ingest::AnnotationSet& annotations : truth) {
        const auto mentions = canonical_mentions.find(annotations.image_id);
        for (const geometry::Detection& instance : annotations.ground_truth) {
            if (std::find(taxonomy.begin(), taxonomy.end(), instance.class_label) ==
                taxonomy.end()) {
                throw Error("ground-truth class '" + instance.class_label +
                            "' is not in the taxonomy");
            }
            auto& [identified, total] = tallies[instance.class_label];
            ++total;
            if (mentions != canonical_mentions.end() &&
                mentions->second.count(util::to_lower(instance.class_label)) > 0) {
                ++identified;
            }
        }
    }

    RecallScores scores;
    double sum = 0.0;
    for (const auto& [class_label, tally] : tallies) {
        const double recall = static_cast<double>(tally.first) / tally.second;
        scores.per_class[class_label] = recall;
        sum += recall;
    }
    scores.macro = tallies.empty() ? 0.0 : sum / static_cast<double>(tallies.size());
    return scores;
}

HallucinationRates hallucination_rates(const std::vector<GroundedReport>& corpus,
                                       const report::ValidationParams& params) {
    HallucinationRates rates;
    for (const GroundedReport& grounded : corpus) {
        rates.entries += static_cast<long>(grounded.report.defects.size());

        std::set<int> spatial;
        std::set<int> any;
        for (const report::Violation& v :
             report::validate_report(grounded.report, grounded.evidence, params)) {
            if (!v.defect_index.has_value()) continue;  // count_mismatch is not rate-bearing
            if (v.kind == report::ViolationKind::grid_mismatch ||
                v.kind == report::ViolationKind::corner_drift) {
                spatial.insert(*v.defect_index);
            }
            if (v.kind != report::ViolationKind::schema_error) {
                any.insert(*v.defect_index);
            }
        }
        rates.spatially_flagged += static_cast<long>(spatial.size());
        rates.flagged += static_cast<long>(any.size());
    }
    if (rates.entries > 0) {
        rates.shr = static_cast<double>(rates.spatially_flagged) / rates.entries;
        rates.hr = static_cast<double>(rates.flagged) / rates.entries;
    }
    return rates;
}

double pcr(const std::vector<report::MaintenanceReport>& reports,
           const std::vector<const knowledge::ProcedureRecord*>& retrieved) {
    if (reports.size() != retrieved.size()) {
        throw Error("pcr needs one retrieved record per report");
    }
    long total = 0;
    long compliant = 0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const knowledge::ProcedureRecord* record = retrieved[i];
        for (const report::ReportDefect& defect : reports[i].defects) {
            ++total;
            if (record != nullptr && defect.procedure_ref == record->procedure_id &&
                metrics::has_common_ngram(defect.recommendation, record->body, 5)) {
                ++compliant;
            }
        }
    }
    return total > 0 ? static_cast<double>(compliant) / total : 0.0;
}

const std::string kJudgeRubric =
    "You are a certified wind turbine maintenance engineer. Grade the maintenance report "
    "below against the detection evidence on three axes, each an integer from 1 to 10:\n"
    "- factuality: agreement of the reported defects with the detection evidence (classes, "
    "locations, counts).\n"
    "- domain_alignment: correct use of wind-energy maintenance terminology and IEC 61400 "
    "conventions.\n"
    "- actionability: whether the recommendations are specific enough to schedule work "
    "from.\n"
    "Return JSON: {\"factuality\": N, \"domain_alignment\": N, \"actionability\": N, "
    "\"mean\": N, \"rationale\": \"...\"}";

namespace {

json evidence_json(const std::vector<geometry::Detection>& evidence) {
    json arr = json::array();
    for (const geometry::Detection& d : evidence) {
        json corners = json::array();
        for (const geometry::Point& p : d.box.corners) corners.push_back({p.x, p.y});
        arr.push_back({{"class", d.class_label},
                       {"confidence", d.confidence},
                       {"obb_corners", corners}});
    }
    return arr;
}

// first balanced {...} span that parses; nullopt when none does
std::optional<json> first_json_object(const std::string& text) {
    std::size_t from = 0;
    while (true) {
        const std::size_t start = text.find('{', from);
        if (start == std::string::npos) return std::nullopt;
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        std::size_t end = std::string::npos;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}' && --depth == 0) {
                end = i;
                break;
            }
        }
        if (end == std::string::npos) return std::nullopt;
        try {
            return json::parse(text.substr(start, end - start + 1));
        } catch (const json::exception&) {
            from = start + 1;
        }
    }
}

std::optional<int> axis_value(const json& doc, const char* key) {
    if (!doc.contains(key) || !doc[key].is_number()) return std::nullopt;
    const double value = doc[key].get<double>();
    if (value != std::floor(value)) return std::nullopt;
    if (value < 1.0 || value > 10.0) return std::nullopt;
    return static_cast<int>(value);
}

std::optional<JudgeScores> scores_from(const std::string& raw) {
    const auto doc = first_json_object(raw);
    if (!doc.has_value()) return std::nullopt;
    const auto factuality = axis_value(*doc, "factuality");
    const auto domain_alignment = axis_value(*doc, "domain_alignment");
    const auto actionability = axis_value(*doc, "actionability");
    if (!factuality || !domain_alignment || !actionability) return std::nullopt;

    JudgeScores scores;
    scores.factuality = *factuality;
    scores.domain_alignment = *domain_alignment;
    scores.actionability = *actionability;
    // endpoints send inconsistent means; the local arithmetic wins
    scores.mean = (scores.factuality + scores.domain_alignment + scores.actionability) / 3.0;
    if (doc->contains("rationale") && (*doc)["rationale"].is_string()) {
        scores.rationale = (*doc)["rationale"].get<std::string>();
    }
    return scores;
}

}  // namespace

JudgeScores judge_report(const report::MaintenanceReport& r,
                         const std::vector<geometry::Detection>& evidence,
                         const chat::ChatClient& judge) {
    const std::string payload = kJudgeRubric + "\n\nMaintenance report:\n" +
                                report::serialize_report(r).dump(2) +
                                "\n\nDetection evidence:\n" + evidence_json(evidence).dump(2);

    const int attempts_allowed = judge.config().max_retries + 1;
    std::string last_raw;
    for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
        const chat::ChatResult result = judge.complete({{"user", payload}});
        last_raw = result.content;
        const auto scores = scores_from(result.content);
        if (scores.has_value()) return *scores;
    }
    throw JudgeError("judge output was not scorable after " + std::to_string(attempts_allowed) +
                         " attempt(s)",
                     last_raw);
}

std::vector<JudgeScores> judge_reports(const std::vector<GroundedReport>& corpus,
                                       const chat::ChatClient& judge) {
    std::vector<JudgeScores> scores(corpus.size());
    std::mutex failure_mutex;
    std::exception_ptr failure;

    util::parallel_indexed(corpus.size(), judge.config().max_in_flight, [&](std::size_t i) {
        try {
            scores[i] = judge_report(corpus[i].report, corpus[i].evidence, judge);
        } catch (...) {
            const std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    });
    if (failure) std::rethrow_exception(failure);
    return scores;
}

PearsonResult fisher_interval(double r, std::size_t n) {
    PearsonResult result;
    result.r = std::clamp(r, -1.0, 1.0);
    if (n < 3) throw Error("fisher interval needs n >= 3");
    const double z = std::atanh(result.r);
    const double half_width = 1.96 / std::sqrt(static_cast<double>(n) - 3.0);
    result.ci_low = std::tanh(z - half_width);
    result.ci_high = std::tanh(z + half_width);
    // inf - inf at the |r| = 1, n = 3 corner
    if (std::isnan(result.ci_low)) result.ci_low = -1.0;
    if (std::isnan(result.ci_high)) result.ci_high = 1.0;
    return result;
}

PearsonResult pearson_agreement(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw Error("pearson_agreement needs equal-length inputs");
    const std::size_t n = xs.size();
    if (n < 3) throw Error("pearson_agreement needs at least 3 points");

    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);

    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mean_x;
        const double dy = ys[i] - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw Error("pearson_agreement needs non-constant inputs");

    return fisher_interval(sxy / (std::sqrt(sxx) * std::sqrt(syy)), n);
}

}  // namespace bladekit::evaluation
