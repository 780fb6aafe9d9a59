#include "bladekit/evaluation.hpp"

#include "bladekit/errors.hpp"
#include "support/fixtures.hpp"
#include "support/mock_server.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

using namespace bladekit;
using evaluation::EquivalenceDictionary;
using evaluation::GroundedReport;
using nlohmann::json;

namespace {

const std::vector<std::string> kTaxonomy{"coating", "dirt", "VG-missing-teeth", "markings"};

const char* kDictJson = R"({
  "coating": ["paint peeling", "paint loss", "topcoat erosion"],
  "dirt": ["grime", "soiling"],
  "VG-missing-teeth": ["missing vortex generator teeth"],
  "markings": []
})";

const knowledge::KnowledgeBase& shipped_kb() {
    static const knowledge::KnowledgeBase kb =
        knowledge::load_knowledge_base_file(std::string(BLADEKIT_ASSETS_DIR) + "/procedures.json");
    return kb;
}

std::vector<std::string> shipped_procedure_ids() {
    std::vector<std::string> ids;
    for (const auto& rec : shipped_kb().records) ids.push_back(rec.procedure_id);
    return ids;
}

ingest::AnnotationSet truth_of(const std::string& image_id,
                               const std::vector<std::string>& classes) {
    ingest::AnnotationSet set;
    set.image_id = image_id;
    for (const std::string& label : classes) {
        geometry::Detection d;
        d.class_label = label;
        set.ground_truth.push_back(d);
    }
    return set;
}

// one-defect scenes make seeded corruption arithmetic exact
std::vector<GroundedReport> one_defect_corpus(int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<GroundedReport> corpus;
    for (int i = 0; i < count; ++i) {
        auto fx = testing::consistent_scene(rng, kTaxonomy, shipped_procedure_ids(), 1, 1);
        corpus.push_back({std::move(fx.report), std::move(fx.evidence)});
    }
    return corpus;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("equivalence dictionary canonicalizes case-insensitively") {
    const auto dict = EquivalenceDictionary::parse(kDictJson, kTaxonomy);
    CHECK(dict.canonicalize("paint peeling") == "coating");
    CHECK(dict.canonicalize("Paint Peeling") == "coating");
    CHECK(dict.canonicalize("  GRIME ") == "dirt");
    CHECK(dict.canonicalize("coating") == "coating");
    CHECK(dict.canonicalize("DIRT") == "dirt");
    CHECK(dict.canonicalize("lightning receptor") == "lightning receptor");  // unknown untouched
    CHECK(dict.phrase_count() == 10);  // 6 phrases + 4 canonical self-entries
}

TEST_CASE("dictionary structure is validated") {
    CHECK_THROWS_AS(EquivalenceDictionary::parse(R"({"rust": ["oxide"]})", kTaxonomy),
                    ConfigError);
    CHECK_THROWS_AS(EquivalenceDictionary::parse(
                        R"({"coating": ["smudge"], "dirt": ["smudge"]})", kTaxonomy),
                    ConfigError);
    CHECK_THROWS_AS(EquivalenceDictionary::parse(R"({"coating": ["dirt"]})", kTaxonomy),
                    ConfigError);  // phrase collides with another class name
    CHECK_THROWS_AS(EquivalenceDictionary::parse(R"({"coating": "paint"})", kTaxonomy),
                    ConfigError);
    CHECK_THROWS_AS(EquivalenceDictionary::parse(R"(["coating"])", kTaxonomy), ConfigError);
    CHECK_THROWS_AS(EquivalenceDictionary::parse("not json at all", kTaxonomy), ParseError);
    CHECK_THROWS_AS(EquivalenceDictionary::parse(R"({"coating": [""]})", kTaxonomy), ConfigError);
}

TEST_CASE("recall is perfect when predictions repeat the truth") {
    const std::vector<ingest::AnnotationSet> truth{
        truth_of("img-1", {"coating", "dirt"}),
        truth_of("img-2", {"coating"}),
        truth_of("img-3", {"markings", "VG-missing-teeth"}),
    };
    std::map<std::string, std::vector<std::string>> predicted{
        {"img-1", {"coating", "dirt"}},
        {"img-2", {"coating"}},
        {"img-3", {"markings", "VG-missing-teeth"}},
    };
    const auto scores =
        evaluation::per_class_recall(predicted, truth, EquivalenceDictionary{}, kTaxonomy);
    REQUIRE(scores.per_class.size() == 4);
    for (const auto& [label, recall] : scores.per_class) {
        CAPTURE(label);
        CHECK(recall == 1.0);
    }
    CHECK(scores.macro == 1.0);
}

TEST_CASE("synonyms count through the dictionary") {
    const auto dict = EquivalenceDictionary::parse(kDictJson, kTaxonomy);
    const std::vector<ingest::AnnotationSet> truth{truth_of("img-1", {"coating", "coating"}),
                                                   truth_of("img-2", {"dirt"})};
    std::map<std::string, std::vector<std::string>> predicted{
        {"img-1", {"paint peeling"}},  // both coating instances on img-1 are identified
        {"img-2", {"paint loss"}},     // maps to coating, not dirt
    };
    const auto scores = evaluation::per_class_recall(predicted, truth, dict, kTaxonomy);
    CHECK(scores.per_class.at("coating") == 1.0);
    CHECK(scores.per_class.at("dirt") == 0.0);
    CHECK(scores.macro == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("empty predictions give all-zero recall") {
    const std::vector<ingest::AnnotationSet> truth{truth_of("img-1", {"coating", "dirt"})};
    const auto scores = evaluation::per_class_recall({}, truth, EquivalenceDictionary{},
                                                     kTaxonomy);
    CHECK(scores.per_class.at("coating") == 0.0);
    CHECK(scores.per_class.at("dirt") == 0.0);
    CHECK(scores.macro == 0.0);
}

TEST_CASE("macro recall is the unweighted mean of per-class recall") {
    std::mt19937_64 rng(8003);
    std::vector<ingest::AnnotationSet> truth;
    std::map<std::string, std::vector<std::string>> predicted;
    for (int i = 0; i < 40; ++i) {
        const std::string id = "img-" + std::to_string(i);
        std::vector<std::string> classes;
        for (const auto& label : kTaxonomy) {
            if (rng() % 2 == 0) classes.push_back(label);
        }
        truth.push_back(truth_of(id, classes));
        std::vector<std::string> mentions;
        for (const auto& label : classes) {
            if (rng() % 3 != 0) mentions.push_back(label);
        }
        predicted[id] = mentions;
    }
    const auto scores =
        evaluation::per_class_recall(predicted, truth, EquivalenceDictionary{}, kTaxonomy);
    double sum = 0.0;
    for (const auto& [label, recall] : scores.per_class) sum += recall;
    CHECK(scores.macro ==
          doctest::Approx(sum / static_cast<double>(scores.per_class.size())).epsilon(1e-12));
}

TEST_CASE("ground truth outside the taxonomy is rejected") {
    const std::vector<ingest::AnnotationSet> truth{truth_of("img-1", {"corrosion"})};
    CHECK_THROWS_AS(
        evaluation::per_class_recall({}, truth, EquivalenceDictionary{}, kTaxonomy), Error);
}

TEST_CASE("hallucination rates are zero on a self-consistent corpus") {
    const auto corpus = one_defect_corpus(30, 8101);
    report::ValidationParams params;
    params.taxonomy = kTaxonomy;
    const auto rates = evaluation::hallucination_rates(corpus, params);
    CHECK(rates.entries == 30);
    CHECK(rates.shr == 0.0);
    CHECK(rates.hr == 0.0);
}

TEST_CASE("seven grid corruptions in fifty entries give exactly 0.14") {
    auto corpus = one_defect_corpus(50, 8102);
    for (const int idx : {3, 9, 17, 25, 33, 41, 49}) {
        testing::corrupt(corpus[static_cast<std::size_t>(idx)].report,
                         testing::Corruption::grid_swap);
    }
    report::ValidationParams params;
    params.taxonomy = kTaxonomy;
    const auto rates = evaluation::hallucination_rates(corpus, params);
    CHECK(rates.entries == 50);
    CHECK(rates.spatially_flagged == 7);
    CHECK(rates.shr == 0.14);
    CHECK(rates.hr == 0.14);
}

TEST_CASE("corrupting every entry drives shr to 1.0") {
    auto corpus = one_defect_corpus(12, 8103);
    for (auto& grounded : corpus) {
        testing::corrupt(grounded.report, testing::Corruption::grid_swap);
    }
    report::ValidationParams params;
    params.taxonomy = kTaxonomy;
    const auto rates = evaluation::hallucination_rates(corpus, params);
    CHECK(rates.shr == 1.0);
    CHECK(rates.hr == 1.0);
}

TEST_CASE("hr counts non-spatial hallucinations that shr ignores") {
    auto corpus = one_defect_corpus(20, 8104);
    testing::corrupt(corpus[2].report, testing::Corruption::grid_swap);
    testing::corrupt(corpus[7].report, testing::Corruption::fake_procedure);
    testing::corrupt(corpus[11].report, testing::Corruption::class_rename);
    report::ValidationParams params;
    params.taxonomy = kTaxonomy;
    params.kb = &shipped_kb();
    const auto rates = evaluation::hallucination_rates(corpus, params);
    CHECK(rates.shr == doctest::Approx(1.0 / 20).epsilon(1e-12));
    CHECK(rates.hr == doctest::Approx(3.0 / 20).epsilon(1e-12));
}

TEST_CASE("an entry flagged twice still counts once") {
    auto corpus = one_defect_corpus(1, 8105);
    testing::corrupt(corpus[0].report, testing::Corruption::grid_swap);
    testing::corrupt(corpus[0].report, testing::Corruption::corner_shift);
    report::ValidationParams params;
    params.taxonomy = kTaxonomy;
    const auto rates = evaluation::hallucination_rates(corpus, params);
    CHECK(rates.entries == 1);
    CHECK(rates.shr == 1.0);
    CHECK(rates.hr == 1.0);
}

TEST_CASE("count mismatches surface in validation but not in the rates") {
    auto corpus = one_defect_corpus(4, 8106);
    corpus[1].evidence.push_back(corpus[1].evidence[0]);  // entry count no longer matches
    report::ValidationParams params;
    params.taxonomy = kTaxonomy;
    const auto rates = evaluation::hallucination_rates(corpus, params);
    CHECK(rates.entries == 4);
    CHECK(rates.shr == 0.0);
    CHECK(rates.hr == 0.0);

    CHECK(evaluation::hallucination_rates({}, params).shr == 0.0);
    CHECK(evaluation::hallucination_rates({}, params).entries == 0);
}

TEST_CASE("pcr requires both the id match and a shared 5-gram") {
    const auto* record = shipped_kb().find("VG-402A");
    REQUIRE(record != nullptr);

    report::MaintenanceReport r;
    r.report_id = "R-1";
    r.image_id = "I-1";
    r.summary = "s";
    report::ReportDefect d;
    d.defect_class = "VG-missing-teeth";
    d.grid_label = "Centre";
    d.severity_code = "S1";
    d.urgency = report::Urgency::immediate;

    d.procedure_ref = "VG-402A";
    d.recommendation = "Replace the affected vortex generator strip within 14 days.";
    r.defects = {d};
    CHECK(evaluation::pcr({r}, {record}) == 1.0);

    r.defects[0].recommendation = "Perform an unrelated torque check on the hub bolts soon.";
    CHECK(evaluation::pcr({r}, {record}) == 0.0);

    r.defects[0].recommendation = "Replace the affected vortex generator strip within 14 days.";
    r.defects[0].procedure_ref = "VG-403";
    CHECK(evaluation::pcr({r}, {record}) == 0.0);

    CHECK(evaluation::pcr({r}, {nullptr}) == 0.0);
    CHECK(evaluation::pcr({}, {}) == 0.0);
    CHECK_THROWS_AS(evaluation::pcr({r}, {}), Error);
}

TEST_CASE("a hundred entries with 89 compliant give pcr 0.89 exactly") {
    const auto* record = shipped_kb().find("VG-402A");
    REQUIRE(record != nullptr);

    std::vector<report::MaintenanceReport> reports;
    std::vector<const knowledge::ProcedureRecord*> retrieved;
    for (int i = 0; i < 100; ++i) {
        report::MaintenanceReport r;
        r.report_id = "R-" + std::to_string(i);
        r.image_id = "I-" + std::to_string(i);
        r.summary = "s";
        report::ReportDefect d;
        d.defect_class = "VG-missing-teeth";
        d.grid_label = "Centre";
        d.severity_code = "S2";
        d.urgency = report::Urgency::scheduled;
        d.procedure_ref = "VG-402A";
        d.recommendation = "Replace the affected vortex generator strip within 14 days.";
        if (i >= 89 && i < 95) d.procedure_ref = "VG-405";  // wrong id
        if (i >= 95) d.recommendation = "General housekeeping of the nacelle area.";  // untraceable
        r.defects = {d};
        reports.push_back(std::move(r));
        retrieved.push_back(record);
    }
    CHECK(evaluation::pcr(reports, retrieved) == 0.89);
}

TEST_CASE("judge scores are parsed and the mean is recomputed locally") {
    testing::MockServer mock;
    std::atomic<int> hits{0};
    std::string seen_user;
    std::mutex seen_mutex;
    mock.server.Post("/v1/chat/completions", [&](const httplib::Request& req,
                                                 httplib::Response& res) {
        ++hits;
        const auto body = json::parse(req.body);
        {
            const std::lock_guard<std::mutex> lock(seen_mutex);
            seen_user = body["messages"].back()["content"].get<std::string>();
        }
        res.set_content(
            testing::chat_body("Here are my scores.\n"
                               "{\"factuality\": 8, \"domain_alignment\": 9, "
                               "\"actionability\": 9, \"mean\": 8.7, \"rationale\": \"solid\"}"),
            "application/json");
    });
    mock.start();

    chat::GenerationConfig cfg;
    cfg.endpoint_url = mock.url("/v1/chat/completions");
    cfg.model_id = "judge";
    const chat::ChatClient judge(cfg);

    std::mt19937_64 rng(8201);
    const auto fx = testing::consistent_scene(rng, kTaxonomy, shipped_procedure_ids(), 2, 2);
    const auto scores = evaluation::judge_report(fx.report, fx.evidence, judge);
    CHECK(scores.factuality == 8);
    CHECK(scores.domain_alignment == 9);
    CHECK(scores.actionability == 9);
    CHECK(scores.mean == doctest::Approx(26.0 / 3.0).epsilon(1e-12));
    CHECK(scores.rationale == "solid");
    CHECK(hits == 1);

    // the rubric leads the payload; report and evidence follow
    CHECK(seen_user.rfind(evaluation::kJudgeRubric, 0) == 0);
    CHECK(seen_user.find("Maintenance report:") != std::string::npos);
    CHECK(seen_user.find("Detection evidence:") != std::string::npos);
    CHECK(seen_user.find(fx.report.report_id) != std::string::npos);
    CHECK(seen_user.find(fx.evidence[0].class_label) != std::string::npos);
}

TEST_CASE("out-of-range axes and prose answers raise JudgeError after retries") {
    testing::MockServer mock;
    std::atomic<int> hits{0};
    mock.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        const int call = ++hits;
        if (call % 2 == 1) {
            res.set_content(testing::chat_body("{\"factuality\": 11, \"domain_alignment\": 9, "
                                               "\"actionability\": 9}"),
                            "application/json");
        } else {
            res.set_content(testing::chat_body("I would rate this report quite highly."),
                            "application/json");
        }
    });
    mock.start();

    chat::GenerationConfig cfg;
    cfg.endpoint_url = mock.url("/v1/chat/completions");
    cfg.model_id = "judge";
    cfg.max_retries = 2;
    const chat::ChatClient judge(cfg);

    std::mt19937_64 rng(8202);
    const auto fx = testing::consistent_scene(rng, kTaxonomy, shipped_procedure_ids(), 1, 1);
    try {
        evaluation::judge_report(fx.report, fx.evidence, judge);
        FAIL("expected JudgeError");
    } catch (const JudgeError& e) {
        CHECK(hits == 3);  // max_retries + 1 scoring attempts
        CHECK(e.raw().find("\"factuality\": 11") != std::string::npos);  // the last raw answer
        CHECK(std::string(e.what()).find("3 attempt(s)") != std::string::npos);
    }
}

TEST_CASE("fractional or missing axes are unscorable") {
    testing::MockServer mock;
    mock.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(testing::chat_body("{\"factuality\": 7.5, \"domain_alignment\": 9, "
                                           "\"actionability\": 9}"),
                        "application/json");
    });
    mock.start();

    chat::GenerationConfig cfg;
    cfg.endpoint_url = mock.url("/v1/chat/completions");
    cfg.model_id = "judge";
    cfg.max_retries = 0;
    const chat::ChatClient judge(cfg);

    std::mt19937_64 rng(8203);
    const auto fx = testing::consistent_scene(rng, kTaxonomy, shipped_procedure_ids(), 1, 1);
    CHECK_THROWS_AS(evaluation::judge_report(fx.report, fx.evidence, judge), JudgeError);
}

TEST_CASE("a judged batch keeps input order under concurrency") {
    testing::MockServer mock;
    mock.server.Post("/v1/chat/completions", [&](const httplib::Request& req,
                                                 httplib::Response& res) {
        const auto body = json::parse(req.body);
        const std::string user = body["messages"].back()["content"].get<std::string>();
        // echo the report id back through the rationale
        const std::string marker = "\"report_id\": \"";
        const auto at = user.find(marker);
        const auto end = user.find('"', at + marker.size());
        const std::string id = user.substr(at + marker.size(), end - at - marker.size());
        const int axis = 1 + static_cast<int>(id.size() % 9);
        const json scores{{"factuality", axis},
                          {"domain_alignment", 9},
                          {"actionability", 9},
                          {"rationale", id}};
        res.set_content(testing::chat_body(scores.dump()), "application/json");
    });
    mock.start();

    chat::GenerationConfig cfg;
    cfg.endpoint_url = mock.url("/v1/chat/completions");
    cfg.model_id = "judge";
    cfg.max_in_flight = 4;
    const chat::ChatClient judge(cfg);

    std::mt19937_64 rng(8204);
    std::vector<GroundedReport> corpus;
    for (int i = 0; i < 70; ++i) {
        auto fx = testing::consistent_scene(rng, kTaxonomy, shipped_procedure_ids(), 1, 2);
        fx.report.report_id = "JR-" + std::to_string(i);
        corpus.push_back({std::move(fx.report), std::move(fx.evidence)});
    }
    const auto scores = evaluation::judge_reports(corpus, judge);
    REQUIRE(scores.size() == 70);
    for (int i = 0; i < 70; ++i) {
        CHECK(scores[static_cast<std::size_t>(i)].rationale == "JR-" + std::to_string(i));
        CHECK(scores[static_cast<std::size_t>(i)].mean ==
              doctest::Approx((scores[static_cast<std::size_t>(i)].factuality + 18) / 3.0)
                  .epsilon(1e-12));
    }
}

TEST_CASE("pearson correlation hits the textbook anchors") {
    const auto perfect = evaluation::pearson_agreement({1, 2, 3}, {2, 4, 6});
    CHECK(perfect.r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(perfect.ci_high == doctest::Approx(1.0).epsilon(1e-9));

    const auto inverse = evaluation::pearson_agreement({1, 2, 3}, {3, 2, 1});
    CHECK(inverse.r == doctest::Approx(-1.0).epsilon(1e-12));

    std::mt19937_64 rng(8301);
    std::uniform_real_distribution<double> value(1.0, 10.0);
    std::vector<double> xs;
    for (int i = 0; i < 40; ++i) xs.push_back(value(rng));
    const auto self = evaluation::pearson_agreement(xs, xs);
    CHECK(self.r == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("correlation is invariant under positive affine transforms") {
    std::mt19937_64 rng(8302);
    std::uniform_real_distribution<double> value(0.0, 5.0);
    std::vector<double> xs;
    std::vector<double> ys;
    for (int i = 0; i < 25; ++i) {
        xs.push_back(value(rng));
        ys.push_back(value(rng));
    }
    const double base = evaluation::pearson_agreement(xs, ys).r;
    std::vector<double> scaled;
    for (const double y : ys) scaled.push_back(2.5 * y + 7.0);
    CHECK(evaluation::pearson_agreement(xs, scaled).r == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("fisher interval matches the worked example") {
    const auto result = evaluation::fisher_interval(0.91, 20);
    CHECK(result.r == 0.91);
    CHECK(result.ci_low == doctest::Approx(0.783).epsilon(1e-3));
    CHECK(result.ci_high == doctest::Approx(0.964).epsilon(1e-3));
}

TEST_CASE("degenerate correlation inputs are rejected") {
    CHECK_THROWS_AS(evaluation::pearson_agreement({1, 2}, {1, 2, 3}), Error);
    CHECK_THROWS_AS(evaluation::pearson_agreement({1, 2}, {1, 2}), Error);
    CHECK_THROWS_AS(evaluation::pearson_agreement({5, 5, 5}, {1, 2, 3}), Error);
    CHECK_THROWS_AS(evaluation::pearson_agreement({1, 2, 3}, {4, 4, 4}), Error);
}

}  // TEST_SUITE
