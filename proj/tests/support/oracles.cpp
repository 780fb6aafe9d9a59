#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <string>

namespace oracles {

GridCell grid_cell_scan(Point p) {
    for (int v = 0; v < 3; ++v) {
        for (int u = 0; u < 3; ++u) {
            const double x_lo = u / 3.0;
            const double x_hi = (u + 1) / 3.0;
            const double y_lo = v / 3.0;
            const double y_hi = (v + 1) / 3.0;
            const bool x_in = (u == 2) ? (p.x >= x_lo && p.x <= 1.0) : (p.x >= x_lo && p.x < x_hi);
            const bool y_in = (v == 2) ? (p.y >= y_lo && p.y <= 1.0) : (p.y >= y_lo && p.y < y_hi);
            if (x_in && y_in) return static_cast<GridCell>(v * 3 + u);
        }
    }
    return GridCell::bottom_right;  // unreachable for p in [0,1]^2
}

bool point_in_convex(const std::vector<Point>& ccw_poly, Point p) {
    const std::size_t n = ccw_poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = ccw_poly[i];
        const Point& b = ccw_poly[(i + 1) % n];
        const double side = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if (side < 0.0) return false;
    }
    return true;
}

namespace {

std::vector<Point> ccw_corners(const OrientedBox& box) {
    std::vector<Point> poly(box.corners.begin(), box.corners.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point& p = poly[i];
        const Point& q = poly[(i + 1) % poly.size()];
        acc += p.x * q.y - q.x * p.y;
    }
    if (acc < 0.0) std::reverse(poly.begin(), poly.end());
    return poly;
}

}  // namespace

double mc_iou(const OrientedBox& a, const OrientedBox& b, int n, std::uint64_t seed) {
    const std::vector<Point> pa = ccw_corners(a);
    const std::vector<Point> pb = ccw_corners(b);

    // Sample the joint bounding box; the union lies inside it, so the
    // ratio estimator is unchanged but every draw lands where it counts.
    double x_lo = a.corners[0].x, x_hi = x_lo, y_lo = a.corners[0].y, y_hi = y_lo;
    for (const OrientedBox* box : {&a, &b}) {
        for (const Point& p : box->corners) {
            x_lo = std::min(x_lo, p.x);
            x_hi = std::max(x_hi, p.x);
            y_lo = std::min(y_lo, p.y);
            y_hi = std::max(y_hi, p.y);
        }
    }
    if (x_hi <= x_lo || y_hi <= y_lo) return 0.0;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(x_lo, x_hi);
    std::uniform_real_distribution<double> uy(y_lo, y_hi);
    long inter = 0;
    long uni_count = 0;
    for (int i = 0; i < n; ++i) {
        const Point p{ux(rng), uy(rng)};
        const bool in_a = point_in_convex(pa, p);
        const bool in_b = point_in_convex(pb, p);
        if (in_a && in_b) ++inter;
        if (in_a || in_b) ++uni_count;
    }
    if (uni_count == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni_count);
}

std::vector<Detection> nms_greedy(const std::vector<Detection>& dets, double iou_threshold) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (dets[i].confidence != dets[j].confidence) return dets[i].confidence > dets[j].confidence;
        const long long ti = dets[i].source_tile ? *dets[i].source_tile : std::numeric_limits<long long>::max();
        const long long tj = dets[j].source_tile ? *dets[j].source_tile : std::numeric_limits<long long>::max();
        return ti < tj;  // stable_sort keeps input order on full ties
    });
    std::vector<Detection> kept;
    for (std::size_t i : order) {
        bool ok = true;
        for (const Detection& k : kept) {
            if (k.class_label != dets[i].class_label) continue;
            if (bladekit::geometry::rotated_iou(k.box, dets[i].box) >= iou_threshold) {
                ok = false;
                break;
            }
        }
        if (ok) kept.push_back(dets[i]);
    }
    return kept;
}

OrientedBox random_rect_box(std::mt19937_64& rng, bool allow_rotation) {
    std::uniform_real_distribution<double> center(0.25, 0.75);
    std::uniform_real_distribution<double> extent(0.08, 0.45);
    std::uniform_real_distribution<double> angle(0.0, 3.14159265358979323846);
    for (;;) {
        const double cx = center(rng);
        const double cy = center(rng);
        const double hw = extent(rng) / 2.0;
        const double hh = extent(rng) / 2.0;
        const double th = allow_rotation ? angle(rng) : 0.0;
        const double c = std::cos(th);
        const double s = std::sin(th);
        OrientedBox box;
        const double dx[4] = {-hw, hw, hw, -hw};
        const double dy[4] = {-hh, -hh, hh, hh};
        for (int k = 0; k < 4; ++k) {
            box.corners[k] = {cx + dx[k] * c - dy[k] * s, cy + dx[k] * s + dy[k] * c};
        }
        if (bladekit::geometry::box_valid(box)) return box;
    }
}

std::vector<Detection> seam_duplicated_scene(std::mt19937_64& rng, const std::vector<std::string>& classes) {
    std::uniform_int_distribution<int> n_boxes(2, 8);
    std::uniform_int_distribution<std::size_t> pick_class(0, classes.size() - 1);
    std::uniform_real_distribution<double> conf(0.3, 1.0);
    std::uniform_real_distribution<double> jitter(-0.004, 0.004);
    std::bernoulli_distribution duplicated(0.6);

    std::vector<Detection> scene;
    const int n = n_boxes(rng);
    for (int i = 0; i < n; ++i) {
        Detection d;
        d.box = random_rect_box(rng);
        d.class_label = classes[pick_class(rng)];
        d.confidence = conf(rng);
        d.source_tile = i;
        scene.push_back(d);
        if (duplicated(rng)) {
            Detection dup = d;
            for (auto& p : dup.box.corners) {
                p.x = std::clamp(p.x + jitter(rng), 0.0, 1.0);
                p.y = std::clamp(p.y + jitter(rng), 0.0, 1.0);
            }
            dup.confidence = std::max(0.05, d.confidence - 0.07);
            dup.source_tile = i + 100;
            scene.push_back(dup);
        }
    }
    return scene;
}

namespace {

std::vector<std::string> metric_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (const char raw : text) {
        const unsigned char c = static_cast<unsigned char>(raw);
        const bool lower_alnum = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
        const bool upper = (c >= 'A' && c <= 'Z');
        if (lower_alnum) {
            current += static_cast<char>(c);
        } else if (upper) {
            current += static_cast<char>(c - 'A' + 'a');
        } else if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(current);
    return tokens;
}

using Gram = std::vector<std::string>;

std::vector<Gram> grams_of(const std::vector<std::string>& tokens, int n) {
    std::vector<Gram> grams;
    for (int i = 0; i + n <= static_cast<int>(tokens.size()); ++i) {
        grams.emplace_back(tokens.begin() + i, tokens.begin() + i + n);
    }
    return grams;
}

int count_gram(const std::vector<Gram>& grams, const Gram& g) {
    int count = 0;
    for (const Gram& candidate : grams) {
        if (candidate == g) ++count;
    }
    return count;
}

}  // namespace

double bleu4_ref(const std::string& candidate, const std::vector<std::string>& references) {
    const auto cand = metric_tokens(candidate);
    if (cand.empty() || references.empty()) return 0.0;

    std::vector<std::vector<std::string>> refs;
    for (const auto& r : references) refs.push_back(metric_tokens(r));

    double log_sum = 0.0;
    for (int n = 1; n <= 4; ++n) {
        const auto cand_grams = grams_of(cand, n);
        std::vector<std::vector<Gram>> ref_grams;
        for (const auto& ref : refs) ref_grams.push_back(grams_of(ref, n));

        // clipped count per distinct candidate n-gram, first occurrence only
        int matched = 0;
        for (std::size_t i = 0; i < cand_grams.size(); ++i) {
            bool first = true;
            for (std::size_t j = 0; j < i; ++j) {
                if (cand_grams[j] == cand_grams[i]) first = false;
            }
            if (!first) continue;
            const int in_cand = count_gram(cand_grams, cand_grams[i]);
            int best_ref = 0;
            for (const auto& rg : ref_grams) {
                best_ref = std::max(best_ref, count_gram(rg, cand_grams[i]));
            }
            matched += std::min(in_cand, best_ref);
        }
        const int total = static_cast<int>(cand_grams.size());
        const double p = (total == 0 || matched == 0) ? 1e-9 : static_cast<double>(matched) / total;
        log_sum += std::log(p);
    }

    const int c = static_cast<int>(cand.size());
    int r = static_cast<int>(refs.front().size());
    for (const auto& ref : refs) {
        const int len = static_cast<int>(ref.size());
        if (std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r)) {
            r = len;
        }
    }
    const double bp = (c > r) ? 1.0 : std::exp(1.0 - static_cast<double>(r) / c);
    return bp * std::exp(log_sum / 4.0);
}

double rouge_l_ref(const std::string& candidate, const std::string& reference) {
    const auto cand = metric_tokens(candidate);
    const auto ref = metric_tokens(reference);
    if (cand.empty() || ref.empty()) return 0.0;

    std::vector<std::vector<int>> table(cand.size() + 1, std::vector<int>(ref.size() + 1, 0));
    for (std::size_t i = 1; i <= cand.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            table[i][j] = (cand[i - 1] == ref[j - 1])
                              ? table[i - 1][j - 1] + 1
                              : std::max(table[i - 1][j], table[i][j - 1]);
        }
    }
    const int lcs = table[cand.size()][ref.size()];
    if (lcs == 0) return 0.0;
    const double precision = static_cast<double>(lcs) / cand.size();
    const double recall = static_cast<double>(lcs) / ref.size();
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace oracles
