#pragma once

// Attention supervision targets: IoU-weighted step targets over region
// proposals, hard-negative mining, and the attention losses.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "air/attention.hpp"
#include "air/error.hpp"
#include "air/geometry.hpp"
#include "air/scene.hpp"

namespace air {

inline constexpr double kProbabilityClamp = 1e-12;

struct ProposalSet {
    std::vector<BoundingBox> boxes;
    std::optional<std::vector<std::vector<double>>> features;

    bool consistent() const
    {
        if (!features) {
            return true;
        }
        if (features->size() != boxes.size()) {
            return false;
        }
        return features->empty() || std::all_of(features->begin(), features->end(), [&](const auto& f) {
                   return f.size() == features->front().size();
               });
    }
};

struct StepAttentionTarget {
    std::size_t step_index = 0;
    std::vector<double> weights;
    bool all_zero = false; ///< no proposal overlaps any ROI
};

struct NegativeAttentionMap {
    AttentionMap map;
    std::vector<BoundingBox> source_boxes;
};

struct LossConfig {
    double theta = 1.0;
    double phi = 1.0;
};

namespace detail {

inline std::vector<double> iou_weights(std::span<const BoundingBox> rois, std::span<const BoundingBox> proposals)
{
    std::vector<double> w(proposals.size(), 0.0);
    for (std::size_t j = 0; j < proposals.size(); ++j) {
        for (const auto& r : rois) {
            w[j] += iou(proposals[j], r);
        }
    }
    return w;
}

inline bool normalize_in_place(std::vector<double>& w)
{
    double total = 0.0;
    for (double v : w) {
        total += v;
    }
    if (total <= 0.0) {
        return false;
    }
    for (double& v : w) {
        v /= total;
    }
    return true;
}

} // namespace detail

/// Per-proposal weight = sum of IoUs with every ROI box of the step (all
/// sets), normalised to sum 1.
inline StepAttentionTarget gt_attention(const StepROIs& rois, const SceneGraph& scene, const ProposalSet& proposals)
{
    if (proposals.boxes.empty()) {
        throw Error(ErrorKind::NoProposals, "ground-truth attention needs at least one proposal");
    }
    std::vector<BoundingBox> boxes;
    for (const auto& set : rois.roi_sets) {
        for (std::size_t idx : set) {
            boxes.push_back(scene.objects.at(idx).box);
        }
    }
    StepAttentionTarget target{rois.step_index, detail::iou_weights(boxes, proposals.boxes), false};
    target.all_zero = !detail::normalize_in_place(target.weights);
    return target;
}

/// Proposal-indexed form of a negative map: IoU-weighted like gt_attention,
/// normalised to sum 1, all zero when nothing overlaps.
inline std::vector<double> negative_weights(std::span<const BoundingBox> negatives, const ProposalSet& proposals)
{
    auto w = detail::iou_weights(negatives, proposals.boxes);
    detail::normalize_in_place(w);
    return w;
}

struct MinedNegative {
    std::string object_id;
    BoundingBox box;
    std::size_t mentions = 0;
};

/// Hard negatives for `target_question`: objects of the image most often
/// referenced by the other questions' steps (one count per step), kept only
/// when their overlap ratio with every positive box is below tau, at most k.
inline std::vector<MinedNegative> mine_hard_negatives(const std::string& target_question,
                                                      const std::map<std::string, std::vector<StepROIs>>& all_rois,
                                                      const SceneGraph& scene,
                                                      std::span<const BoundingBox> positives, std::size_t k = 3,
                                                      double tau = 0.3)
{
    std::map<std::size_t, std::size_t> mentions;
    for (const auto& [qid, steps] : all_rois) {
        if (qid == target_question) {
            continue;
        }
        for (const auto& step : steps) {
            for (std::size_t idx : step.combined()) {
                ++mentions[idx];
            }
        }
    }
    std::vector<MinedNegative> ranked;
    for (const auto& [idx, n] : mentions) {
        const auto& obj = scene.objects.at(idx);
        ranked.push_back({obj.id, obj.box, n});
    }
    std::sort(ranked.begin(), ranked.end(), [](const MinedNegative& a, const MinedNegative& b) {
        return a.mentions != b.mentions ? a.mentions > b.mentions : a.object_id < b.object_id;
    });

    std::vector<MinedNegative> kept;
    for (auto& candidate : ranked) {
        if (kept.size() >= k) {
            break;
        }
        double worst = 0.0;
        for (const auto& p : positives) {
            worst = std::max(worst, overlap_ratio(candidate.box, p));
        }
        if (worst < tau) {
            kept.push_back(std::move(candidate));
        }
    }
    return kept;
}

/// Box indicators summed per cell and normalised to sum 1; the zero map for
/// no boxes.
inline NegativeAttentionMap negative_map(std::span<const BoundingBox> boxes, const Frame& frame,
                                         std::size_t out_size = 256)
{
    NegativeAttentionMap out{AttentionMap(out_size, out_size, frame), {boxes.begin(), boxes.end()}};
    for (const auto& b : boxes) {
        const PixelSpan span = raster_cells(b, frame, out_size, out_size);
        for (std::size_t r = span.row_begin; r < span.row_end; ++r) {
            for (std::size_t c = span.col_begin; c < span.col_end; ++c) {
                out.map.at(r, c) += 1.0;
            }
        }
    }
    const double total = out.map.sum();
    if (total > 0.0) {
        for (double& v : out.map.values()) {
            v /= total;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Losses

inline void require_distribution(std::span<const double> p, const char* what)
{
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw Error(ErrorKind::NotADistribution, std::string(what) + " has a negative or non-finite entry");
        }
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-6) {
        throw Error(ErrorKind::NotADistribution, std::string(what) + " sums to " + std::to_string(total));
    }
}

/// KL(target || pred), with 0 log 0 = 0 and pred clamped at 1e-12.
inline double kl_attention_loss(std::span<const double> target, std::span<const double> pred)
{
    if (target.size() != pred.size()) {
        throw Error(ErrorKind::ShapeMismatch, "KL inputs differ in length");
    }
    require_distribution(target, "KL target");
    require_distribution(pred, "KL prediction");
    double loss = 0.0;
    for (std::size_t j = 0; j < target.size(); ++j) {
        if (target[j] > 0.0) {
            loss += target[j] * std::log(target[j] / std::max(pred[j], kProbabilityClamp));
        }
    }
    return loss;
}

/// Cross-entropy -sum target * log pred, pred clamped at 1e-12.
inline double pos_ce_loss(std::span<const double> target, std::span<const double> pred)
{
    if (target.size() != pred.size()) {
        throw Error(ErrorKind::ShapeMismatch, "cross-entropy inputs differ in length");
    }
    double loss = 0.0;
    for (std::size_t j = 0; j < target.size(); ++j) {
        if (target[j] != 0.0) {
            loss -= target[j] * std::log(std::max(pred[j], kProbabilityClamp));
        }
    }
    return loss;
}

/// L- = sum_p M-_p log alpha_p. Non-positive; minimising it moves predicted
/// mass away from the negative positions. Positions are proposal indices or
/// map cells, whichever the caller supplies.
inline double neg_ce_loss(std::span<const double> negative, std::span<const double> pred)
{
    if (negative.size() != pred.size()) {
        throw Error(ErrorKind::ShapeMismatch, "negative map and prediction differ in size");
    }
    double loss = 0.0;
    for (std::size_t p = 0; p < negative.size(); ++p) {
        if (negative[p] != 0.0) {
            loss += negative[p] * std::log(std::max(pred[p], kProbabilityClamp));
        }
    }
    return loss;
}

inline double neg_ce_loss(const NegativeAttentionMap& negative, const AttentionMap& pred)
{
    if (!negative.map.same_shape(pred)) {
        throw Error(ErrorKind::ShapeMismatch, "negative map and predicted map differ in shape");
    }
    return neg_ce_loss(negative.map.values(), pred.values());
}

/// L = l_ans + theta * sum_t l_alpha[t] + phi * sum_t l_r[t]
inline double airm_total_loss(double l_ans, std::span<const double> l_alpha, std::span<const double> l_r,
                              const LossConfig& cfg)
{
    if (l_alpha.size() != l_r.size()) {
        throw Error(ErrorKind::LengthMismatch, "attention and operation losses cover different step counts");
    }
    double sum_alpha = 0.0;
    double sum_r = 0.0;
    for (std::size_t t = 0; t < l_alpha.size(); ++t) {
        sum_alpha += l_alpha[t];
        sum_r += l_r[t];
    }
    return l_ans + cfg.theta * sum_alpha + cfg.phi * sum_r;
}

/// L = l_ans + theta * l_pos + phi * l_neg
inline double airc_total_loss(double l_ans, double l_pos, double l_neg, const LossConfig& cfg)
{
    return l_ans + cfg.theta * l_pos + cfg.phi * l_neg;
}

} // namespace air
