#pragma once

#include "bladekit/chat.hpp"
#include "bladekit/geometry.hpp"
#include "bladekit/ingest.hpp"
#include "bladekit/knowledge.hpp"
#include "bladekit/report.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bladekit::evaluation {

// Maps synonymous defect phrases onto canonical taxonomy classes. Matching
// is case-insensitive; a phrase may serve only one class, and every
// canonical label must come from the taxonomy.
class EquivalenceDictionary {
public:
    // empty dictionary: every mention canonicalizes to itself
    EquivalenceDictionary() = default;

    // json_text: object {canonical: [phrase, ...], ...}
    static EquivalenceDictionary parse(const std::string& json_text,
                                       const std::vector<std::string>& taxonomy);
    static EquivalenceDictionary load_file(const std::filesystem::path& path,
                                           const std::vector<std::string>& taxonomy);

    // canonical class for the mention, or the mention unchanged when no
    // phrase matches
    std::string canonicalize(std::string_view mention) const;

    std::size_t phrase_count() const { return phrase_to_class_.size(); }

private:
    std::map<std::string, std::string> phrase_to_class_;  // lowercased phrase -> canonical
};

struct RecallScores {
    std::map<std::string, double> per_class;  // classes with ground-truth instances only
    double macro = 0.0;                       // unweighted mean of per_class
};

// A ground-truth instance counts as identified when its image's mention set
// contains the instance's class after dictionary canonicalization
// (case-insensitive). Throws when a ground-truth class is missing from the
// taxonomy. Images absent from `predicted` count as predicting nothing.
RecallScores per_class_recall(const std::map<std::string, std::vector<std::string>>& predicted,
                              const std::vector<ingest::AnnotationSet>& truth,
                              const EquivalenceDictionary& dict,
                              const std::vector<std::string>& taxonomy);

// A report paired with the detection evidence its prompt was built from.
struct GroundedReport {
    report::MaintenanceReport report;
    std::vector<geometry::Detection> evidence;
};

// Micro-averaged over all defect entries in the corpus. An entry counts once
// toward shr when flagged with grid_mismatch or corner_drift, and once
// toward hr when flagged with any violation kind except schema_error.
// Report-level violations without a defect index (count_mismatch) are not
// rate-bearing, which keeps both rates in [0,1]. Zero entries -> zero rates.
struct HallucinationRates {
    double shr = 0.0;
    double hr = 0.0;
    long entries = 0;
    long spatially_flagged = 0;
    long flagged = 0;
};

HallucinationRates hallucination_rates(const std::vector<GroundedReport>& corpus,
                                       const report::ValidationParams& params);

// Fraction of defect entries that are traceable to their report's retrieved
// procedure: procedure_ref equals the retrieved id AND the recommendation
// shares at least one token 5-gram with the procedure body. retrieved runs
// parallel to reports; a null record makes that report's entries
// non-compliant. Zero entries -> 0.
double pcr(const std::vector<report::MaintenanceReport>& reports,
           const std::vector<const knowledge::ProcedureRecord*>& retrieved);

struct JudgeScores {
    int factuality = 0;       // 1..10
    int domain_alignment = 0; // 1..10
    int actionability = 0;    // 1..10
    double mean = 0.0;        // recomputed locally from the three axes
    std::string rationale;
};

// Grading instructions sent ahead of the report and its evidence.
extern const std::string kJudgeRubric;

// One judge call: rubric + serialized report + detection evidence. The
// returned JSON is re-validated here; outputs that stay unscorable through
// cfg.max_retries + 1 attempts raise JudgeError with the last raw text.
// Transport-level failures keep their HttpError types.
JudgeScores judge_report(const report::MaintenanceReport& r,
                         const std::vector<geometry::Detection>& evidence,
                         const chat::ChatClient& judge);

// Batch scoring with the client's max_in_flight bound; results are in input
// order regardless of completion order. The first failure aborts the batch.
std::vector<JudgeScores> judge_reports(const std::vector<GroundedReport>& corpus,
                                       const chat::ChatClient& judge);

struct PearsonResult {
    double r = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

// 95% confidence interval for a correlation via the Fisher z-transform:
// z = atanh(r), half-width 1.96/sqrt(n-3), bounds back-transformed by tanh.
PearsonResult fisher_interval(double r, std::size_t n);

// Sample Pearson correlation with the Fisher interval. Throws on length
// mismatch, n < 3, or zero variance in either argument.
PearsonResult pearson_agreement(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace bladekit::evaluation
