#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "air/error.hpp"

namespace air {

/// Pixel dimensions of the source image a map or scene is registered to.
struct Frame {
    double width = 0.0;
    double height = 0.0;

    bool operator==(const Frame&) const = default;
};

/// Axis-aligned box in source-image pixels, (x, y) is the top-left corner.
struct BoundingBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double right() const noexcept { return x + w; }
    double bottom() const noexcept { return y + h; }
    double area() const noexcept { return std::max(0.0, w) * std::max(0.0, h); }
    double center_x() const noexcept { return x + 0.5 * w; }
    double center_y() const noexcept { return y + 0.5 * h; }

    bool valid() const noexcept
    {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && x >= 0.0 &&
               y >= 0.0 && w > 0.0 && h > 0.0;
    }

    bool operator==(const BoundingBox&) const = default;
};

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) noexcept
{
    const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) {
        return 0.0;
    }
    return iw * ih;
}

/// Intersection over union; 0 when the union is empty.
inline double iou(const BoundingBox& a, const BoundingBox& b) noexcept
{
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

/// Intersection over the smaller of the two areas.
inline double overlap_ratio(const BoundingBox& a, const BoundingBox& b) noexcept
{
    const double smaller = std::min(a.area(), b.area());
    return smaller > 0.0 ? intersection_area(a, b) / smaller : 0.0;
}

/// Box clipped to [0,width]x[0,height]; nullopt when nothing remains.
inline std::optional<BoundingBox> clip(const BoundingBox& b, const Frame& frame) noexcept
{
    const double x0 = std::clamp(b.x, 0.0, frame.width);
    const double y0 = std::clamp(b.y, 0.0, frame.height);
    const double x1 = std::clamp(b.right(), 0.0, frame.width);
    const double y1 = std::clamp(b.bottom(), 0.0, frame.height);
    if (x1 <= x0 || y1 <= y0) {
        return std::nullopt;
    }
    return BoundingBox{x0, y0, x1 - x0, y1 - y0};
}

/// Exact area of the union of a set of boxes (coordinate compression).
inline double union_area(std::span<const BoundingBox> boxes)
{
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& b : boxes) {
        if (b.area() <= 0.0) {
            continue;
        }
        xs.push_back(b.x);
        xs.push_back(b.right());
        ys.push_back(b.y);
        ys.push_back(b.bottom());
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

    double total = 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double mx = 0.5 * (xs[i] + xs[i + 1]);
        for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
            const double my = 0.5 * (ys[j] + ys[j + 1]);
            const bool covered = std::any_of(boxes.begin(), boxes.end(), [&](const BoundingBox& b) {
                return b.area() > 0.0 && mx > b.x && mx < b.right() && my > b.y && my < b.bottom();
            });
            if (covered) {
                total += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
            }
        }
    }
    return total;
}

/// Half-open rectangle of grid cells [row_begin,row_end) x [col_begin,col_end).
struct PixelSpan {
    std::size_t row_begin = 0;
    std::size_t row_end = 0;
    std::size_t col_begin = 0;
    std::size_t col_end = 0;

    std::size_t count() const noexcept { return (row_end - row_begin) * (col_end - col_begin); }
    bool empty() const noexcept { return count() == 0; }
};

namespace detail {

// Cells whose centre (i + 0.5) * scale lies in [lo, hi).
inline std::pair<std::size_t, std::size_t> center_range(double lo, double hi, double scale, std::size_t n)
{
    auto center = [scale](std::size_t i) { return (static_cast<double>(i) + 0.5) * scale; };
    const double guess = std::floor(lo / scale);
    std::size_t begin = guess <= 0.0 ? 0 : std::min(n, static_cast<std::size_t>(guess));
    while (begin > 0 && center(begin - 1) >= lo) {
        --begin;
    }
    while (begin < n && center(begin) < lo) {
        ++begin;
    }
    std::size_t end = begin;
    while (end < n && center(end) < hi) {
        ++end;
    }
    return {begin, end};
}

} // namespace detail

/// Grid cells of an rows x cols grid registered to `frame` whose centres lie
/// inside the clipped box. Empty when the clipped box has no area or covers
/// no centre.
inline PixelSpan covered_cells(const BoundingBox& box, const Frame& frame, std::size_t rows, std::size_t cols)
{
    const auto clipped = clip(box, frame);
    if (!clipped) {
        return {};
    }
    const auto [c0, c1] = detail::center_range(clipped->x, clipped->right(), frame.width / cols, cols);
    const auto [r0, r1] = detail::center_range(clipped->y, clipped->bottom(), frame.height / rows, rows);
    if (c0 >= c1 || r0 >= r1) {
        return {};
    }
    return {r0, r1, c0, c1};
}

/// Cells a box is rasterised onto: its covered cells, or the single cell under
/// the clipped box's centre when the box is too thin to cover any centre.
/// Empty only when the box has zero area after clipping.
inline PixelSpan raster_cells(const BoundingBox& box, const Frame& frame, std::size_t rows, std::size_t cols)
{
    PixelSpan span = covered_cells(box, frame, rows, cols);
    if (!span.empty()) {
        return span;
    }
    const auto clipped = clip(box, frame);
    if (!clipped) {
        return {};
    }
    const auto cell = [](double v, double extent, std::size_t n) {
        const double idx = std::floor(v * static_cast<double>(n) / extent);
        return std::min(n - 1, static_cast<std::size_t>(std::max(0.0, idx)));
    };
    const std::size_t c = cell(clipped->center_x(), frame.width, cols);
    const std::size_t r = cell(clipped->center_y(), frame.height, rows);
    return {r, r + 1, c, c + 1};
}

/// Grid cell containing a point in frame coordinates, clamped to the grid.
inline std::pair<std::size_t, std::size_t> cell_of(double x, double y, const Frame& frame, std::size_t rows,
                                                   std::size_t cols)
{
    const auto idx = [](double v, double extent, std::size_t n) {
        const double i = std::floor(v * static_cast<double>(n) / extent);
        return std::min(n - 1, static_cast<std::size_t>(std::max(0.0, i)));
    };
    return {idx(y, frame.height, rows), idx(x, frame.width, cols)};
}

} // namespace air
