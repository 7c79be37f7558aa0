#pragma once

// Dense attention maps and their construction from fixations, proposals and
// the centre prior.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "air/error.hpp"
#include "air/geometry.hpp"

namespace air {

/// Row-major rows x cols grid of non-negative importance values, registered
/// to the source image `frame`.
class AttentionMap {
public:
    AttentionMap() = default;

    AttentionMap(std::size_t rows, std::size_t cols, Frame frame, double fill = 0.0)
        : rows_(rows), cols_(cols), frame_(frame), values_(rows * cols, fill)
    {
        if (rows == 0 || cols == 0) {
            throw Error(ErrorKind::ShapeMismatch, "attention map needs at least one row and column");
        }
    }

    AttentionMap(std::size_t rows, std::size_t cols, Frame frame, std::vector<double> values)
        : rows_(rows), cols_(cols), frame_(frame), values_(std::move(values))
    {
        if (rows == 0 || cols == 0 || values_.size() != rows * cols) {
            throw Error(ErrorKind::ShapeMismatch, "attention map values do not match rows x cols");
        }
    }

    /// Square grid registered to a frame of the same pixel size.
    static AttentionMap square(std::size_t size, double fill = 0.0)
    {
        const auto s = static_cast<double>(size);
        return AttentionMap(size, size, Frame{s, s}, fill);
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    const Frame& frame() const noexcept { return frame_; }
    void set_frame(Frame frame) noexcept { frame_ = frame; }

    double& at(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    double sum() const noexcept
    {
        double s = 0.0;
        for (double v : values_) {
            s += v;
        }
        return s;
    }

    double max() const noexcept { return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end()); }

    bool same_shape(const AttentionMap& other) const noexcept
    {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    /// All values finite and non-negative.
    bool valid() const noexcept
    {
        return rows_ > 0 && cols_ > 0 &&
               std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v) && v >= 0.0; });
    }

    bool operator==(const AttentionMap&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Frame frame_{};
    std::vector<double> values_;
};

struct FixationRecord {
    double x = 0.0;
    double y = 0.0;
    double t_onset = 0.0;
    std::string subject_id;
    std::optional<bool> correct;

    bool operator==(const FixationRecord&) const = default;
};

/// Fixations of one question ordered by onset time.
struct FixationSequence {
    std::string question_id;
    std::vector<FixationRecord> fixations;

    bool operator==(const FixationSequence&) const = default;
};

// ---------------------------------------------------------------------------
// Gaussian smoothing

/// Normalised 1-D Gaussian truncated at 4 sigma.
inline std::vector<double> gaussian_kernel(double sigma)
{
    if (!(sigma > 0.0)) {
        return {1.0};
    }
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        total += v;
    }
    for (double& v : k) {
        v /= total;
    }
    return k;
}

/// Separable convolution with zero padding outside the grid.
inline void gaussian_blur(AttentionMap& map, double sigma)
{
    const auto kernel = gaussian_kernel(sigma);
    const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    const auto rows = static_cast<std::ptrdiff_t>(map.rows());
    const auto cols = static_cast<std::ptrdiff_t>(map.cols());
    std::vector<double> tmp(map.size(), 0.0);
    auto src = map.values();

    for (std::ptrdiff_t r = 0; r < rows; ++r) {
        for (std::ptrdiff_t c = 0; c < cols; ++c) {
            const double v = src[static_cast<std::size_t>(r * cols + c)];
            if (v == 0.0) {
                continue;
            }
            const auto lo = std::max<std::ptrdiff_t>(0, c - radius);
            const auto hi = std::min<std::ptrdiff_t>(cols - 1, c + radius);
            for (std::ptrdiff_t cc = lo; cc <= hi; ++cc) {
                tmp[static_cast<std::size_t>(r * cols + cc)] += v * kernel[static_cast<std::size_t>(cc - c + radius)];
            }
        }
    }
    std::fill(src.begin(), src.end(), 0.0);
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
        const auto lo = std::max<std::ptrdiff_t>(0, r - radius);
        const auto hi = std::min<std::ptrdiff_t>(rows - 1, r + radius);
        for (std::ptrdiff_t rr = lo; rr <= hi; ++rr) {
            const double w = kernel[static_cast<std::size_t>(rr - r + radius)];
            const double* in = &tmp[static_cast<std::size_t>(rr * cols)];
            double* out = &src[static_cast<std::size_t>(r * cols)];
            for (std::ptrdiff_t c = 0; c < cols; ++c) {
                out[c] += w * in[c];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Construction

struct FixationMapOptions {
    std::size_t out_size = 256;
    double sigma = 9.0;
};

/// Fixation map on an out_size x out_size grid: unit impulses at the scaled
/// fixation cells, Gaussian-smoothed, divided by the peak. Non-square frames
/// are stretched to the square grid.
inline AttentionMap build_fixation_map(std::span<const FixationRecord> fixations, const Frame& frame,
                                       const FixationMapOptions& options = {})
{
    if (fixations.empty()) {
        throw Error(ErrorKind::NoFixations, "cannot build a fixation map without fixations");
    }
    if (options.out_size == 0) {
        throw Error(ErrorKind::InvalidArgument, "fixation map size must be positive");
    }
    AttentionMap map(options.out_size, options.out_size, frame);
    for (const auto& f : fixations) {
        const auto [r, c] = cell_of(f.x, f.y, frame, map.rows(), map.cols());
        map.at(r, c) += 1.0;
    }
    gaussian_blur(map, options.sigma);
    const double peak = map.max();
    if (peak > 0.0) {
        for (double& v : map.values()) {
            v /= peak;
        }
    }
    return map;
}

struct TemporalBins {
    std::vector<std::vector<FixationRecord>> bins;
    std::size_t dropped = 0;
};

/// Half-open onset bins [edges[j], edges[j+1]). Fixations outside
/// [edges.front(), edges.back()) are dropped and counted.
inline TemporalBins temporal_bins(const FixationSequence& sequence, std::span<const double> edges)
{
    if (edges.size() < 2) {
        throw Error(ErrorKind::BadEdges, "need at least two bin edges");
    }
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        if (!(edges[i] < edges[i + 1])) {
            throw Error(ErrorKind::BadEdges, "bin edges must be strictly increasing");
        }
    }
    TemporalBins out;
    out.bins.resize(edges.size() - 1);
    for (const auto& f : sequence.fixations) {
        const auto it = std::upper_bound(edges.begin(), edges.end(), f.t_onset);
        if (it == edges.begin() || it == edges.end()) {
            ++out.dropped;
            continue;
        }
        out.bins[static_cast<std::size_t>(it - edges.begin()) - 1].push_back(f);
    }
    return out;
}

inline TemporalBins temporal_bins(const FixationSequence& sequence)
{
    static constexpr double kDefaultEdges[] = {0.0, 1.0, 2.0, 3.0};
    return temporal_bins(sequence, kDefaultEdges);
}

/// Bilinear resampling (pixel-centre alignment, edge clamping) followed by a
/// rescale that preserves the total mass.
inline AttentionMap resample_map(const AttentionMap& map, std::size_t out_rows, std::size_t out_cols)
{
    if (out_rows == 0 || out_cols == 0) {
        throw Error(ErrorKind::InvalidArgument, "resample target must be at least 1x1");
    }
    if (out_rows == map.rows() && out_cols == map.cols()) {
        return map;
    }
    const auto source_coord = [](std::size_t i, std::size_t in, std::size_t out) {
        const double s = (static_cast<double>(i) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
        return std::clamp(s, 0.0, static_cast<double>(in - 1));
    };
    AttentionMap out(out_rows, out_cols, map.frame());
    for (std::size_t r = 0; r < out_rows; ++r) {
        const double sr = source_coord(r, map.rows(), out_rows);
        const auto r0 = static_cast<std::size_t>(std::floor(sr));
        const std::size_t r1 = std::min(r0 + 1, map.rows() - 1);
        const double fr = sr - static_cast<double>(r0);
        for (std::size_t c = 0; c < out_cols; ++c) {
            const double sc = source_coord(c, map.cols(), out_cols);
            const auto c0 = static_cast<std::size_t>(std::floor(sc));
            const std::size_t c1 = std::min(c0 + 1, map.cols() - 1);
            const double fc = sc - static_cast<double>(c0);
            const double top = (1.0 - fc) * map.at(r0, c0) + fc * map.at(r0, c1);
            const double bottom = (1.0 - fc) * map.at(r1, c0) + fc * map.at(r1, c1);
            out.at(r, c) = (1.0 - fr) * top + fr * bottom;
        }
    }
    const double in_mass = map.sum();
    const double out_mass = out.sum();
    if (out_mass > 0.0) {
        const double scale = in_mass / out_mass;
        for (double& v : out.values()) {
            v *= scale;
        }
    }
    return out;
}

/// Object attention rendered spatially: each proposal spreads its weight
/// uniformly over the grid cells it covers, accumulating where boxes overlap.
inline AttentionMap proposals_to_map(std::span<const double> weights, std::span<const BoundingBox> proposals,
                                     const Frame& frame, std::size_t out_size = 256)
{
    if (weights.size() != proposals.size()) {
        throw Error(ErrorKind::LengthMismatch, "got " + std::to_string(weights.size()) + " weights for " +
                                                   std::to_string(proposals.size()) + " proposals");
    }
    AttentionMap map(out_size, out_size, frame);
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
            throw Error(ErrorKind::InvalidArgument, "proposal weights must be finite and non-negative");
        }
        const PixelSpan span = raster_cells(proposals[i], frame, map.rows(), map.cols());
        if (span.empty() || weights[i] == 0.0) {
            continue;
        }
        const double density = weights[i] / static_cast<double>(span.count());
        for (std::size_t r = span.row_begin; r < span.row_end; ++r) {
            for (std::size_t c = span.col_begin; c < span.col_end; ++c) {
                map.at(r, c) += density;
            }
        }
    }
    return map;
}

/// Isotropic Gaussian centred at ((cols-1)/2, (rows-1)/2) with peak 1.
inline AttentionMap center_prior(std::size_t out_size = 256, double sigma = 15.0)
{
    AttentionMap map = AttentionMap::square(out_size);
    const double centre = (static_cast<double>(out_size) - 1.0) / 2.0;
    double peak = 0.0;
    for (std::size_t r = 0; r < out_size; ++r) {
        for (std::size_t c = 0; c < out_size; ++c) {
            const double dy = static_cast<double>(r) - centre;
            const double dx = static_cast<double>(c) - centre;
            const double v = std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma));
            map.at(r, c) = v;
            peak = std::max(peak, v);
        }
    }
    for (double& v : map.values()) {
        v /= peak;
    }
    return map;
}

// ---------------------------------------------------------------------------
// Raw gaze

struct GazeSample {
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;
};

struct DispersionOptions {
    double max_dispersion = 25.0; ///< (max x - min x) + (max y - min y), pixels
    double min_duration = 0.1;    ///< seconds
};

/// Dispersion-threshold (I-DT) fixation detection for users starting from raw
/// gaze samples. Not the fixation extraction used for the reference dataset.
inline std::vector<FixationRecord> detect_fixations(std::span<const GazeSample> samples, const std::string& subject,
                                                    const DispersionOptions& options = {})
{
    std::vector<FixationRecord> out;
    std::size_t start = 0;
    const auto dispersion = [&](std::size_t b, std::size_t e) {
        double x0 = samples[b].x, x1 = x0, y0 = samples[b].y, y1 = y0;
        for (std::size_t i = b + 1; i < e; ++i) {
            x0 = std::min(x0, samples[i].x);
            x1 = std::max(x1, samples[i].x);
            y0 = std::min(y0, samples[i].y);
            y1 = std::max(y1, samples[i].y);
        }
        return (x1 - x0) + (y1 - y0);
    };
    while (start < samples.size()) {
        std::size_t end = start;
        while (end < samples.size() && samples[end].t - samples[start].t < options.min_duration) {
            ++end;
        }
        if (end >= samples.size()) {
            break;
        }
        ++end; // window [start, end) now spans at least min_duration
        if (dispersion(start, end) > options.max_dispersion) {
            ++start;
            continue;
        }
        while (end < samples.size() && dispersion(start, end + 1) <= options.max_dispersion) {
            ++end;
        }
        double sx = 0.0, sy = 0.0;
        for (std::size_t i = start; i < end; ++i) {
            sx += samples[i].x;
            sy += samples[i].y;
        }
        const auto n = static_cast<double>(end - start);
        out.push_back({sx / n, sy / n, samples[start].t, subject, std::nullopt});
        start = end;
    }
    return out;
}

} // namespace air
