#pragma once

#include "bladekit/geometry.hpp"
#include "bladekit/knowledge.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bladekit::report {

enum class Urgency { routine, scheduled, immediate };

std::string_view urgency_name(Urgency u);
std::optional<Urgency> parse_urgency(std::string_view text);

struct ReportDefect {
    std::string defect_class;
    std::string grid_label;  // must parse as a grid cell name
    std::array<geometry::Point, 4> obb_corners{};
    std::string severity_code;
    std::string procedure_ref;
    Urgency urgency = Urgency::routine;
    std::string recommendation;
};

struct MaintenanceReport {
    std::string report_id;
    std::string image_id;
    std::vector<ReportDefect> defects;
    std::string summary;
    // unknown top-level fields, preserved verbatim
    nlohmann::json extras = nlohmann::json::object();
};

bool operator==(const ReportDefect& a, const ReportDefect& b);
bool operator==(const MaintenanceReport& a, const MaintenanceReport& b);

enum class ViolationKind {
    grid_mismatch,
    corner_drift,
    unknown_class,
    unknown_procedure,
    missing_field,
    count_mismatch,
    schema_error,
};

std::string_view violation_kind_name(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    std::string detail;
    std::optional<int> defect_index;
};

nlohmann::json serialize_report(const MaintenanceReport& r);

struct ExtractedReport {
    MaintenanceReport report;
    bool trailing_content = false;
    std::vector<std::string> unknown_fields;
};

// Strips prose and code fences, parses the first balanced top-level JSON
// object, and validates it. Throws ParseError when no object parses,
// SchemaError listing every failing field otherwise.
ExtractedReport extract_json(const std::string& raw);

struct ValidationParams {
    std::vector<std::string> taxonomy;
    const knowledge::KnowledgeBase* kb = nullptr;
    double corner_tol = 0.05;
};

// Checks the report against the detection evidence the prompt was built from.
// Violations are data; this never throws on report content.
std::vector<Violation> validate_report(const MaintenanceReport& r,
                                       const std::vector<geometry::Detection>& evidence,
                                       const ValidationParams& params);

}  // namespace bladekit::report
