#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bladekit::geometry {

/// Normalized image-plane coordinate, both components in [0,1].
struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Oriented box given by four corners in file order, normalized to [0,1]^2.
/// Valid boxes are simple (non-self-intersecting) quadrilaterals; degenerate
/// (zero-area) boxes are permitted.
struct OrientedBox {
    std::array<Point, 4> corners{};
};

/// One detector output: oriented box + class + confidence. source_tile is
/// set when the detection came from a tiled pass and is still traceable.
struct Detection {
    OrientedBox box;
    std::string class_label;
    double confidence = 1.0;
    std::optional<int> source_tile;
};

/// Top-left pixel position of one tile inside the full frame.
struct TileOffset {
    int col_px = 0;
    int row_px = 0;
    int index = 0;
};

/// Sliding-window decomposition of a full-resolution frame.
struct TilePlan {
    int image_width_px = 0;
    int image_height_px = 0;
    int tile_size_px = 0;
    double overlap_ratio = 0.0;
    std::vector<TileOffset> offsets;  // row-major: top row first, left first
};

/// The nine named cells of the 3x3 grid, row-major from top-left.
enum class GridCell : int {
    top_left = 0,
    top_centre,
    top_right,
    mid_left,
    centre,
    mid_right,
    bottom_left,
    bottom_centre,
    bottom_right,
};

inline constexpr int kGridCellCount = 9;

/// Canonical cell name, e.g. "Top-Right (Trailing Edge)".
std::string_view grid_cell_name(GridCell cell);

/// Prompt-facing rendering, e.g. "Top-Right / Trailing Edge".
std::string_view grid_cell_prompt_name(GridCell cell);

/// Accepts the canonical form, the prompt form, and the bare cell name
/// ("Top-Right"), case-insensitively. Returns nullopt for anything else.
std::optional<GridCell> parse_grid_label(std::string_view text);

/// True when the quadrilateral is simple and every coordinate is in [0,1].
bool box_valid(const OrientedBox& box);

/// Sliding-window plan with stride round(tile*(1-overlap)); the final offset
/// per axis is clamped to (dim - tile) so coverage is complete with no
/// partial tiles. Throws Error when a dimension is smaller than the tile
/// (caller must pad or resize) or overlap_ratio is outside [0,1).
TilePlan tile_plan(int image_width_px, int image_height_px, int tile_size_px, double overlap_ratio);

/// Maps a box from a tile's local [0,1]^2 frame into full-frame normalized
/// coordinates. Throws Error when a mapped coordinate leaves [0,1] by more
/// than 1e-9 (offset inconsistent with the plan).
OrientedBox to_global(const OrientedBox& local_box, const TileOffset& offset, int tile_size_px,
                      int image_width_px, int image_height_px);

/// Inverse of to_global, for boxes fully inside the given tile.
OrientedBox to_local(const OrientedBox& global_box, const TileOffset& offset, int tile_size_px,
                     int image_width_px, int image_height_px);

/// Arithmetic mean of the four corners.
Point centroid(const OrientedBox& box);

/// 3x3 cell for a point in [0,1]^2; the x=1 / y=1 boundary lands in the
/// last row/column.
GridCell grid_cell(Point p);

/// Intersection-over-union of two convex oriented boxes via convex polygon
/// clipping and shoelace areas. Zero-area union yields 0. Symmetric.
double rotated_iou(const OrientedBox& a, const OrientedBox& b);

/// Greedy class-aware non-maximum suppression. Candidates are visited by
/// confidence descending (ties: lower source_tile index, then input order);
/// a candidate is kept iff its IoU with every kept detection of the same
/// class is below iou_threshold. Output is sorted by confidence descending.
std::vector<Detection> nms(const std::vector<Detection>& detections, double iou_threshold);

}  // namespace bladekit::geometry
