#include "support/fixtures.hpp"

#include <algorithm>
#include <cmath>

namespace bladekit::testing {

using geometry::Detection;
using geometry::GridCell;
using geometry::OrientedBox;
using geometry::Point;

namespace {

OrientedBox box_in_cell(std::mt19937_64& rng, int cell_index) {
    const double cx0 = (cell_index % 3) / 3.0 + 1.0 / 6.0;
    const double cy0 = (cell_index / 3) / 3.0 + 1.0 / 6.0;
    std::uniform_real_distribution<double> jitter(-0.02, 0.02);
    std::uniform_real_distribution<double> half(0.03, 0.06);
    const double cx = cx0 + jitter(rng);
    const double cy = cy0 + jitter(rng);
    const double hx = half(rng);
    const double hy = half(rng);
    OrientedBox b;
    b.corners = {Point{cx - hx, cy - hy}, Point{cx + hx, cy - hy}, Point{cx + hx, cy + hy},
                 Point{cx - hx, cy + hy}};
    return b;
}

}  // namespace

SceneFixture consistent_scene(std::mt19937_64& rng, const std::vector<std::string>& taxonomy,
                              const std::vector<std::string>& procedure_ids, int min_defects,
                              int max_defects) {
    std::uniform_int_distribution<int> count_dist(min_defects, max_defects);
    const int count = count_dist(rng);

    // one box per distinct cell keeps nearest-evidence matching unambiguous
    std::vector<int> cells{0, 1, 2, 3, 4, 5, 6, 7, 8};
    std::shuffle(cells.begin(), cells.end(), rng);

    SceneFixture fx;
    fx.report.report_id = "R-" + std::to_string(rng() % 100000);
    fx.report.image_id = "IMG-" + std::to_string(rng() % 100000);
    fx.report.summary = "Routine surface inspection findings.";

    std::uniform_real_distribution<double> conf(0.72, 0.99);
    for (int i = 0; i < count; ++i) {
        Detection d;
        d.box = box_in_cell(rng, cells[static_cast<std::size_t>(i)]);
        d.class_label = taxonomy[rng() % taxonomy.size()];
        d.confidence = conf(rng);
        fx.evidence.push_back(d);

        report::ReportDefect defect;
        defect.defect_class = d.class_label;
        defect.grid_label = std::string(geometry::grid_cell_name(geometry::grid_cell(
            geometry::centroid(d.box))));
        defect.obb_corners = d.box.corners;
        defect.severity_code = (i % 2 == 0) ? "S2" : "S3";
        defect.procedure_ref = procedure_ids[rng() % procedure_ids.size()];
        defect.urgency = report::Urgency::scheduled;
        defect.recommendation = "Schedule repair per " + defect.procedure_ref + ".";
        fx.report.defects.push_back(std::move(defect));
    }
    return fx;
}

void corrupt(report::MaintenanceReport& r, Corruption kind) {
    report::ReportDefect& defect = r.defects.at(0);
    switch (kind) {
        case Corruption::grid_swap: {
            const auto cell = geometry::parse_grid_label(defect.grid_label);
            const int next = (static_cast<int>(*cell) + 1) % geometry::kGridCellCount;
            defect.grid_label =
                std::string(geometry::grid_cell_name(static_cast<GridCell>(next)));
            break;
        }
        case Corruption::corner_shift: {
            // > default tolerance, pushed toward the image centre to stay in range
            double cx = 0.0;
            for (const Point& p : defect.obb_corners) cx += p.x;
            const double dx = (cx / 4.0 < 0.5) ? 0.07 : -0.07;
            for (Point& p : defect.obb_corners) p.x += dx;
            break;
        }
        case Corruption::fake_procedure:
            defect.procedure_ref = "ZZ-999";
            break;
        case Corruption::class_rename:
            defect.defect_class = "corrosion";
            break;
    }
}

}  // namespace bladekit::testing
