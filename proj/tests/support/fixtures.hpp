#pragma once

#include "bladekit/geometry.hpp"
#include "bladekit/report.hpp"

#include <random>
#include <string>
#include <vector>

namespace bladekit::testing {

struct SceneFixture {
    std::vector<geometry::Detection> evidence;
    report::MaintenanceReport report;  // field-for-field consistent with evidence
};

// Boxes sit well inside distinct grid cells so single-field corruptions
// perturb exactly one validation check.
SceneFixture consistent_scene(std::mt19937_64& rng, const std::vector<std::string>& taxonomy,
                              const std::vector<std::string>& procedure_ids, int min_defects = 1,
                              int max_defects = 4);

enum class Corruption { grid_swap, corner_shift, fake_procedure, class_rename };

inline constexpr Corruption kAllCorruptions[] = {Corruption::grid_swap, Corruption::corner_shift,
                                                 Corruption::fake_procedure,
                                                 Corruption::class_rename};

// Applies one corruption to defect 0 of the report.
void corrupt(report::MaintenanceReport& r, Corruption kind);

}  // namespace bladekit::testing
