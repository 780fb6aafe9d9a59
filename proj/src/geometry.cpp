#include "bladekit/geometry.hpp"

#include "bladekit/errors.hpp"
#include "bladekit/util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace bladekit::geometry {

namespace {

constexpr std::array<std::string_view, kGridCellCount> kGridNames = {
    "Top-Left (Leading Edge)", "Top-Centre", "Top-Right (Trailing Edge)",
    "Mid-Left",                "Centre",     "Mid-Right",
    "Bottom-Left",             "Bottom-Centre", "Bottom-Right",
};

constexpr std::array<std::string_view, kGridCellCount> kGridPromptNames = {
    "Top-Left / Leading Edge", "Top-Centre", "Top-Right / Trailing Edge",
    "Mid-Left",                "Centre",     "Mid-Right",
    "Bottom-Left",             "Bottom-Centre", "Bottom-Right",
};

constexpr std::array<std::string_view, kGridCellCount> kGridBareNames = {
    "Top-Left",    "Top-Centre",    "Top-Right",
    "Mid-Left",    "Centre",        "Mid-Right",
    "Bottom-Left", "Bottom-Centre", "Bottom-Right",
};

double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Strict crossing: the open interiors of segments ab and cd intersect.
bool segments_cross(const Point& a, const Point& b, const Point& c, const Point& d) {
    const double d1 = cross(a, b, c);
    const double d2 = cross(a, b, d);
    const double d3 = cross(c, d, a);
    const double d4 = cross(c, d, b);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

using Poly = std::vector<Point>;

double signed_area(const Poly& poly) {
    double acc = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& p = poly[i];
        const Point& q = poly[(i + 1) % n];
        acc += p.x * q.y - q.x * p.y;
    }
    return 0.5 * acc;
}

Poly to_ccw(const OrientedBox& box) {
    Poly poly(box.corners.begin(), box.corners.end());
    if (signed_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
    return poly;
}

// Sutherland-Hodgman clip of a polygon against one directed edge (a,b) of a
// CCW clip polygon; points on the edge count as inside.
Poly clip_edge(const Poly& subject, const Point& a, const Point& b) {
    constexpr double kEps = 1e-12;
    Poly out;
    const std::size_t n = subject.size();
    if (n == 0) return out;
    out.reserve(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const Point& s = subject[i];
        const Point& e = subject[(i + 1) % n];
        const double side_s = cross(a, b, s);
        const double side_e = cross(a, b, e);
        const bool in_s = side_s >= -kEps;
        const bool in_e = side_e >= -kEps;
        if (in_s != in_e) {
            const double den = side_s - side_e;
            if (std::fabs(den) > kEps) {
                const double t = side_s / den;
                out.push_back({s.x + t * (e.x - s.x), s.y + t * (e.y - s.y)});
            }
        }
        if (in_e) out.push_back(e);
    }
    return out;
}

Poly clip_convex(const Poly& subject, const Poly& clip) {
    Poly out = subject;
    const std::size_t n = clip.size();
    for (std::size_t i = 0; i < n && !out.empty(); ++i) {
        out = clip_edge(out, clip[i], clip[(i + 1) % n]);
    }
    return out;
}

}  // namespace

std::string_view grid_cell_name(GridCell cell) {
    return kGridNames[static_cast<int>(cell)];
}

std::string_view grid_cell_prompt_name(GridCell cell) {
    return kGridPromptNames[static_cast<int>(cell)];
}

std::optional<GridCell> parse_grid_label(std::string_view text) {
    const std::string needle = util::to_lower(util::trim(text));
    for (int i = 0; i < kGridCellCount; ++i) {
        if (needle == util::to_lower(kGridNames[i]) || needle == util::to_lower(kGridPromptNames[i]) ||
            needle == util::to_lower(kGridBareNames[i])) {
            return static_cast<GridCell>(i);
        }
    }
    return std::nullopt;
}

bool box_valid(const OrientedBox& box) {
    for (const Point& p : box.corners) {
        if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) return false;
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
    }
    const auto& c = box.corners;
    // A quadrilateral is simple iff neither pair of opposite edges crosses.
    if (segments_cross(c[0], c[1], c[2], c[3])) return false;
    if (segments_cross(c[1], c[2], c[3], c[0])) return false;
    return true;
}

TilePlan tile_plan(int image_width_px, int image_height_px, int tile_size_px, double overlap_ratio) {
    if (tile_size_px < 1) throw Error("tile size must be >= 1");
    if (image_width_px < tile_size_px || image_height_px < tile_size_px) {
        throw Error("image " + std::to_string(image_width_px) + "x" + std::to_string(image_height_px) +
                    " is smaller than the tile size " + std::to_string(tile_size_px) +
                    "; pad or resize the input");
    }
    if (!(overlap_ratio >= 0.0 && overlap_ratio < 1.0)) {
        throw Error("overlap ratio must lie in [0,1)");
    }

    const int stride = std::max(1, static_cast<int>(std::llround(tile_size_px * (1.0 - overlap_ratio))));
    auto axis_offsets = [&](int dim) {
        std::vector<int> offs;
        int pos = 0;
        for (;;) {
            if (pos + tile_size_px >= dim) {
                offs.push_back(dim - tile_size_px);
                break;
            }
            offs.push_back(pos);
            pos += stride;
        }
        return offs;
    };

    const std::vector<int> cols = axis_offsets(image_width_px);
    const std::vector<int> rows = axis_offsets(image_height_px);

    TilePlan plan;
    plan.image_width_px = image_width_px;
    plan.image_height_px = image_height_px;
    plan.tile_size_px = tile_size_px;
    plan.overlap_ratio = overlap_ratio;
    plan.offsets.reserve(cols.size() * rows.size());
    int index = 0;
    for (int r : rows) {
        for (int c : cols) {
            plan.offsets.push_back({c, r, index++});
        }
    }
    return plan;
}

OrientedBox to_global(const OrientedBox& local_box, const TileOffset& offset, int tile_size_px,
                      int image_width_px, int image_height_px) {
    constexpr double kTol = 1e-9;
    OrientedBox out;
    for (std::size_t k = 0; k < 4; ++k) {
        const double gx = (local_box.corners[k].x * tile_size_px + offset.col_px) / image_width_px;
        const double gy = (local_box.corners[k].y * tile_size_px + offset.row_px) / image_height_px;
        if (gx < -kTol || gx > 1.0 + kTol || gy < -kTol || gy > 1.0 + kTol) {
            throw Error("tile offset (" + std::to_string(offset.col_px) + "," + std::to_string(offset.row_px) +
                        ") maps a corner outside the image frame");
        }
        out.corners[k] = {std::clamp(gx, 0.0, 1.0), std::clamp(gy, 0.0, 1.0)};
    }
    return out;
}

OrientedBox to_local(const OrientedBox& global_box, const TileOffset& offset, int tile_size_px,
                     int image_width_px, int image_height_px) {
    constexpr double kTol = 1e-9;
    OrientedBox out;
    for (std::size_t k = 0; k < 4; ++k) {
        const double lx = (global_box.corners[k].x * image_width_px - offset.col_px) / tile_size_px;
        const double ly = (global_box.corners[k].y * image_height_px - offset.row_px) / tile_size_px;
        if (lx < -kTol || lx > 1.0 + kTol || ly < -kTol || ly > 1.0 + kTol) {
            throw Error("box is not fully inside tile " + std::to_string(offset.index));
        }
        out.corners[k] = {std::clamp(lx, 0.0, 1.0), std::clamp(ly, 0.0, 1.0)};
    }
    return out;
}

Point centroid(const OrientedBox& box) {
    double sx = 0.0;
    double sy = 0.0;
    for (const Point& p : box.corners) {
        sx += p.x;
        sy += p.y;
    }
    return {sx / 4.0, sy / 4.0};
}

GridCell grid_cell(Point p) {
    const int u = std::clamp(static_cast<int>(std::floor(3.0 * p.x)), 0, 2);
    const int v = std::clamp(static_cast<int>(std::floor(3.0 * p.y)), 0, 2);
    return static_cast<GridCell>(v * 3 + u);
}

double rotated_iou(const OrientedBox& a, const OrientedBox& b) {
    const Poly pa = to_ccw(a);
    const Poly pb = to_ccw(b);
    const double area_a = std::fabs(signed_area(pa));
    const double area_b = std::fabs(signed_area(pb));
    const Poly inter = clip_convex(pa, pb);
    const double area_inter = inter.size() >= 3 ? std::fabs(signed_area(inter)) : 0.0;
    const double area_union = area_a + area_b - area_inter;
    if (area_union <= 0.0) return 0.0;
    return std::clamp(area_inter / area_union, 0.0, 1.0);
}

std::vector<Detection> nms(const std::vector<Detection>& detections, double iou_threshold) {
    std::vector<std::size_t> order(detections.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    constexpr long long kNoTile = std::numeric_limits<long long>::max();
    auto tile_of = [&](std::size_t i) -> long long {
        const auto& t = detections[i].source_tile;
        return t.has_value() ? static_cast<long long>(*t) : kNoTile;
    };
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (detections[i].confidence != detections[j].confidence) {
            return detections[i].confidence > detections[j].confidence;
        }
        if (tile_of(i) != tile_of(j)) return tile_of(i) < tile_of(j);
        return i < j;
    });

    std::vector<Detection> kept;
    kept.reserve(detections.size());
    for (std::size_t i : order) {
        const Detection& cand = detections[i];
        bool suppressed = false;
        for (const Detection& k : kept) {
            if (k.class_label == cand.class_label && rotated_iou(k.box, cand.box) >= iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(cand);
    }
    return kept;
}

}  // namespace bladekit::geometry
