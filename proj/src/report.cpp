#include "bladekit/report.hpp"

#include "bladekit/errors.hpp"
#include "bladekit/util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace bladekit::report {

using geometry::Detection;
using geometry::Point;
using nlohmann::json;

std::string_view urgency_name(Urgency u) {
    switch (u) {
        case Urgency::routine: return "routine";
        case Urgency::scheduled: return "scheduled";
        case Urgency::immediate: return "immediate";
    }
    return "routine";
}

std::optional<Urgency> parse_urgency(std::string_view text) {
    if (text == "routine") return Urgency::routine;
    if (text == "scheduled") return Urgency::scheduled;
    if (text == "immediate") return Urgency::immediate;
    return std::nullopt;
}

bool operator==(const ReportDefect& a, const ReportDefect& b) {
    for (int k = 0; k < 4; ++k) {
        if (a.obb_corners[k].x != b.obb_corners[k].x) return false;
        if (a.obb_corners[k].y != b.obb_corners[k].y) return false;
    }
    return a.defect_class == b.defect_class && a.grid_label == b.grid_label &&
           a.severity_code == b.severity_code && a.procedure_ref == b.procedure_ref &&
           a.urgency == b.urgency && a.recommendation == b.recommendation;
}

bool operator==(const MaintenanceReport& a, const MaintenanceReport& b) {
    return a.report_id == b.report_id && a.image_id == b.image_id && a.defects == b.defects &&
           a.summary == b.summary && a.extras == b.extras;
}

std::string_view violation_kind_name(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::grid_mismatch: return "grid_mismatch";
        case ViolationKind::corner_drift: return "corner_drift";
        case ViolationKind::unknown_class: return "unknown_class";
        case ViolationKind::unknown_procedure: return "unknown_procedure";
        case ViolationKind::missing_field: return "missing_field";
        case ViolationKind::count_mismatch: return "count_mismatch";
        case ViolationKind::schema_error: return "schema_error";
    }
    return "unknown";
}

json serialize_report(const MaintenanceReport& r) {
    json doc = json::object();
    doc["report_id"] = r.report_id;
    doc["image_id"] = r.image_id;
    doc["summary"] = r.summary;
    doc["defects"] = json::array();
    for (const ReportDefect& d : r.defects) {
        json corners = json::array();
        for (const Point& p : d.obb_corners) corners.push_back({p.x, p.y});
        doc["defects"].push_back({{"defect_class", d.defect_class},
                                  {"grid_label", d.grid_label},
                                  {"obb_corners", corners},
                                  {"severity_code", d.severity_code},
                                  {"procedure_ref", d.procedure_ref},
                                  {"urgency", std::string(urgency_name(d.urgency))},
                                  {"recommendation", d.recommendation}});
    }
    if (r.extras.is_object()) {
        for (const auto& [key, value] : r.extras.items()) {
            if (!doc.contains(key)) doc[key] = value;
        }
    }
    return doc;
}

namespace {

const std::set<std::string> kTopLevelKeys{"report_id", "image_id", "summary", "defects"};
const std::set<std::string> kDefectKeys{"defect_class", "grid_label",    "obb_corners",
                                        "severity_code", "procedure_ref", "urgency",
                                        "recommendation"};

// drop lines that are code-fence markers
std::string strip_fences(const std::string& raw) {
    std::string out;
    std::istringstream in(raw);
    std::string line;
    while (std::getline(in, line)) {
        if (util::trim(line).rfind("```", 0) == 0) continue;
        out += line;
        out += '\n';
    }
    return out;
}

// span of the balanced object starting at `start` (which must be '{'),
// honoring strings and escapes; npos when unbalanced
std::size_t balanced_end(const std::string& text, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
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
        } else if (c == '}') {
            if (--depth == 0) return i;
        }
    }
    return std::string::npos;
}

std::string field_path(int defect_index, const char* name) {
    return "defects[" + std::to_string(defect_index) + "]." + name;
}

// last `"key":` before the failure offset, for naming malformed fields
std::string key_before(const std::string& text, std::size_t byte_offset) {
    const std::size_t limit = std::min(byte_offset, text.size());
    std::string last;
    std::size_t i = 0;
    while (i < limit) {
        if (text[i] != '"') {
            ++i;
            continue;
        }
        std::string candidate;
        std::size_t j = i + 1;
        bool closed = false;
        for (; j < limit; ++j) {
            if (text[j] == '\\') {
                if (j + 1 < limit) candidate += text[j + 1];
                ++j;
            } else if (text[j] == '"') {
                closed = true;
                break;
            } else {
                candidate += text[j];
            }
        }
        if (!closed) break;
        std::size_t k = j + 1;
        while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
        if (k < text.size() && text[k] == ':') last = candidate;
        i = j + 1;
    }
    return last.empty() ? "document" : last;
}

MaintenanceReport from_json(const json& doc, std::vector<std::string>& unknown_fields) {
    std::vector<std::string> problems;
    MaintenanceReport out;

    const auto require_string = [&](const char* key, std::string& slot) {
        if (!doc.contains(key)) {
            problems.push_back(std::string(key) + ": missing");
        } else if (!doc[key].is_string()) {
            problems.push_back(std::string(key) + ": must be a string");
        } else {
            slot = doc[key].get<std::string>();
        }
    };
    require_string("report_id", out.report_id);
    require_string("image_id", out.image_id);
    require_string("summary", out.summary);

    if (!doc.contains("defects")) {
        problems.push_back("defects: missing");
    } else if (!doc["defects"].is_array()) {
        problems.push_back("defects: must be an array");
    } else {
        int idx = 0;
        for (const json& entry : doc["defects"]) {
            ReportDefect defect;
            if (!entry.is_object()) {
                problems.push_back("defects[" + std::to_string(idx) + "]: must be an object");
                ++idx;
                continue;
            }
            const auto defect_string = [&](const char* key, std::string& slot) {
                if (!entry.contains(key)) {
                    problems.push_back(field_path(idx, key) + ": missing");
                } else if (!entry[key].is_string()) {
                    problems.push_back(field_path(idx, key) + ": must be a string");
                } else {
                    slot = entry[key].get<std::string>();
                }
            };
            defect_string("defect_class", defect.defect_class);
            defect_string("severity_code", defect.severity_code);
            defect_string("procedure_ref", defect.procedure_ref);
            defect_string("recommendation", defect.recommendation);

            std::string grid;
            defect_string("grid_label", grid);
            if (!grid.empty() || entry.contains("grid_label")) {
                if (!geometry::parse_grid_label(grid).has_value()) {
                    problems.push_back(field_path(idx, "grid_label") + ": '" + grid +
                                       "' is not a grid cell name");
                }
                defect.grid_label = grid;
            }

            std::string urgency_text;
            defect_string("urgency", urgency_text);
            if (entry.contains("urgency") && entry["urgency"].is_string()) {
                const auto parsed = parse_urgency(urgency_text);
                if (!parsed.has_value()) {
                    problems.push_back(field_path(idx, "urgency") + ": '" + urgency_text +
                                       "' not one of routine/scheduled/immediate");
                } else {
                    defect.urgency = *parsed;
                }
            }

            if (!entry.contains("obb_corners")) {
                problems.push_back(field_path(idx, "obb_corners") + ": missing");
            } else if (!entry["obb_corners"].is_array() || entry["obb_corners"].size() != 4) {
                problems.push_back(field_path(idx, "obb_corners") + ": must be 4 [x, y] pairs");
            } else {
                bool corners_ok = true;
                for (int k = 0; k < 4; ++k) {
                    const json& pair = entry["obb_corners"][k];
                    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() ||
                        !pair[1].is_number()) {
                        problems.push_back(field_path(idx, "obb_corners") + "[" + std::to_string(k) +
                                           "]: must be [x, y] numbers");
                        corners_ok = false;
                        continue;
                    }
                    const double x = pair[0].get<double>();
                    const double y = pair[1].get<double>();
                    if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) {
                        problems.push_back(field_path(idx, "obb_corners") + "[" + std::to_string(k) +
                                           "]: outside [0,1]");
                        corners_ok = false;
                    }
                    defect.obb_corners[static_cast<std::size_t>(k)] = {x, y};
                }
                (void)corners_ok;
            }

            for (const auto& [key, value] : entry.items()) {
                (void)value;
                if (kDefectKeys.find(key) == kDefectKeys.end()) {
                    unknown_fields.push_back(field_path(idx, key.c_str()));
                }
            }
            out.defects.push_back(std::move(defect));
            ++idx;
        }
    }

    for (const auto& [key, value] : doc.items()) {
        if (kTopLevelKeys.find(key) == kTopLevelKeys.end()) {
            out.extras[key] = value;
            unknown_fields.push_back(key);
        }
    }

    if (!problems.empty()) {
        throw SchemaError("report failed schema validation", std::move(problems));
    }
    return out;
}

}  // namespace

ExtractedReport extract_json(const std::string& raw) {
    const std::string text = strip_fences(raw);

    // balanced spans that still fail to parse are near-misses worth naming
    std::optional<std::string> malformed_field;
    const auto give_up = [&]() -> ParseError {
        if (malformed_field.has_value()) {
            throw SchemaError("report JSON is malformed",
                              {*malformed_field + ": malformed value"});
        }
        return ParseError("no balanced JSON object found in the output");
    };

    std::size_t search_from = 0;
    while (true) {
        const std::size_t start = text.find('{', search_from);
        if (start == std::string::npos) throw give_up();
        const std::size_t end = balanced_end(text, start);
        if (end == std::string::npos) throw give_up();

        const std::string candidate = text.substr(start, end - start + 1);
        json doc;
        try {
            doc = json::parse(candidate);
        } catch (const json::parse_error& e) {
            if (!malformed_field.has_value()) {
                malformed_field = key_before(candidate, e.byte);
            }
            search_from = start + 1;  // prose brace, keep scanning
            continue;
        } catch (const json::exception&) {
            search_from = start + 1;
            continue;
        }

        ExtractedReport extracted;
        extracted.report = from_json(doc, extracted.unknown_fields);
        const std::string_view tail = std::string_view(text).substr(end + 1);
        extracted.trailing_content =
            std::any_of(tail.begin(), tail.end(), [](unsigned char c) { return !std::isspace(c); });
        return extracted;
    }
}

std::vector<Violation> validate_report(const MaintenanceReport& r,
                                       const std::vector<Detection>& evidence,
                                       const ValidationParams& params) {
    std::vector<Violation> violations;

    if (r.defects.size() != evidence.size()) {
        violations.push_back({ViolationKind::count_mismatch,
                              "report lists " + std::to_string(r.defects.size()) +
                                  " defects, evidence has " + std::to_string(evidence.size()),
                              std::nullopt});
    }

    for (std::size_t i = 0; i < r.defects.size(); ++i) {
        const ReportDefect& defect = r.defects[i];
        const int index = static_cast<int>(i);

        if (!params.taxonomy.empty() &&
            std::find(params.taxonomy.begin(), params.taxonomy.end(), defect.defect_class) ==
                params.taxonomy.end()) {
            violations.push_back({ViolationKind::unknown_class,
                                  "class '" + defect.defect_class + "' not in the taxonomy", index});
        }
        if (params.kb != nullptr && !defect.procedure_ref.empty() &&
            params.kb->find(defect.procedure_ref) == nullptr) {
            violations.push_back({ViolationKind::unknown_procedure,
                                  "procedure '" + defect.procedure_ref + "' not in the knowledge base",
                                  index});
        }
        if (defect.severity_code.empty()) {
            violations.push_back({ViolationKind::missing_field, "severity_code is empty", index});
        }
        if (defect.procedure_ref.empty()) {
            violations.push_back({ViolationKind::missing_field, "procedure_ref is empty", index});
        }
        if (defect.recommendation.empty()) {
            violations.push_back({ViolationKind::missing_field, "recommendation is empty", index});
        }

        if (evidence.empty()) continue;  // nothing to ground spatial checks against

        geometry::OrientedBox reported;
        std::copy(defect.obb_corners.begin(), defect.obb_corners.end(), reported.corners.begin());
        const Point rc = geometry::centroid(reported);

        // nearest evidence by centroid distance
        const Detection* nearest = nullptr;
        double nearest_d2 = std::numeric_limits<double>::infinity();
        for (const Detection& e : evidence) {
            const Point ec = geometry::centroid(e.box);
            const double d2 = (ec.x - rc.x) * (ec.x - rc.x) + (ec.y - rc.y) * (ec.y - rc.y);
            if (d2 < nearest_d2) {
                nearest_d2 = d2;
                nearest = &e;
            }
        }

        const auto stated = geometry::parse_grid_label(defect.grid_label);
        const auto expected = geometry::grid_cell(geometry::centroid(nearest->box));
        if (!stated.has_value() || *stated != expected) {
            violations.push_back({ViolationKind::grid_mismatch,
                                  "grid '" + defect.grid_label + "' vs evidence cell '" +
                                      std::string(geometry::grid_cell_name(expected)) + "'",
                                  index});
        }

        // corner drift: best positional match over all evidence boxes
        double drift = std::numeric_limits<double>::infinity();
        for (const Detection& e : evidence) {
            double max_corner = 0.0;
            for (int k = 0; k < 4; ++k) {
                const double dx = e.box.corners[k].x - defect.obb_corners[k].x;
                const double dy = e.box.corners[k].y - defect.obb_corners[k].y;
                max_corner = std::max(max_corner, std::sqrt(dx * dx + dy * dy));
            }
            drift = std::min(drift, max_corner);
        }
        if (drift > params.corner_tol) {
            std::ostringstream detail;
            detail << "corners drift " << drift << " beyond tolerance " << params.corner_tol;
            violations.push_back({ViolationKind::corner_drift, detail.str(), index});
        }
    }

    return violations;
}

}  // namespace bladekit::report
