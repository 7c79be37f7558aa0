#pragma once

// AiR-E scoring of attention maps against reasoning-step ROIs, plus the
// saliency and sequence metrics used by the analyses.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "air/attention.hpp"
#include "air/error.hpp"
#include "air/geometry.hpp"
#include "air/program.hpp"
#include "air/random.hpp"
#include "air/scene.hpp"

namespace air {

struct Moments {
    double mean = 0.0;
    double stddev = 0.0; ///< population standard deviation
};

inline Moments moments(std::span<const double> values)
{
    if (values.empty()) {
        return {};
    }
    const auto n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return {mean, std::sqrt(ss / n)};
}

/// (A - mean) / stddev over all cells; the zero map when stddev is 0.
inline AttentionMap standardize(const AttentionMap& map)
{
    AttentionMap out = map;
    const Moments m = moments(map.values());
    auto values = out.values();
    if (m.stddev == 0.0) {
        std::fill(values.begin(), values.end(), 0.0);
        return out;
    }
    for (double& v : values) {
        v = (v - m.mean) / m.stddev;
    }
    return out;
}

/// Mean standardized value over the cells whose centres fall in the box
/// (clipped to the map's frame). A box thinner than one cell uses the cell
/// under its centre. Throws ZeroAreaBox when nothing remains after clipping.
inline double aire_box(const AttentionMap& standardized, const BoundingBox& box)
{
    const PixelSpan span = raster_cells(box, standardized.frame(), standardized.rows(), standardized.cols());
    if (span.empty()) {
        throw Error(ErrorKind::ZeroAreaBox, "box has no area inside the map frame");
    }
    double total = 0.0;
    for (std::size_t r = span.row_begin; r < span.row_end; ++r) {
        for (std::size_t c = span.col_begin; c < span.col_end; ++c) {
            total += standardized.at(r, c);
        }
    }
    return total / static_cast<double>(span.count());
}

/// Select/Query/Verify/Filter/Or take the best box anywhere; Relate/Compare/And
/// average the best box of each set.
constexpr bool averages_sets(AtomicOp op) noexcept
{
    return op == AtomicOp::Relate || op == AtomicOp::Compare || op == AtomicOp::And;
}

struct StepScore {
    std::size_t step_index = 0;
    AtomicOp op = AtomicOp::Select;
    std::optional<double> aire; ///< nullopt: Missing (no scorable ROI)
    std::size_t n_sets = 0;
    bool fallback_used = false;
};

struct QuestionScore {
    std::string question_id;
    std::vector<StepScore> steps;
    std::map<AtomicOp, double> by_op;
};

/// Step score from an already standardized map registered to the scene frame.
inline StepScore aire_step_standardized(const AttentionMap& standardized, const SceneGraph& scene,
                                        const StepROIs& rois, AtomicOp op)
{
    StepScore score{rois.step_index, op, std::nullopt, rois.roi_sets.size(), rois.fallback_used};

    std::vector<double> set_best;
    for (const auto& set : rois.roi_sets) {
        std::optional<double> best;
        for (std::size_t idx : set) {
            const auto& box = scene.objects.at(idx).box;
            if (raster_cells(box, standardized.frame(), standardized.rows(), standardized.cols()).empty()) {
                continue;
            }
            const double s = aire_box(standardized, box);
            best = best ? std::max(*best, s) : s;
        }
        if (best) {
            set_best.push_back(*best);
        }
    }
    if (set_best.empty()) {
        return score;
    }
    if (averages_sets(op)) {
        score.aire = std::accumulate(set_best.begin(), set_best.end(), 0.0) / static_cast<double>(set_best.size());
    } else {
        score.aire = *std::max_element(set_best.begin(), set_best.end());
    }
    return score;
}

/// AiR-E of one reasoning step. The map's grid is taken to cover the scene frame.
inline StepScore aire_step(const AttentionMap& map, const SceneGraph& scene, const StepROIs& rois, AtomicOp op)
{
    AttentionMap standardized = standardize(map);
    standardized.set_frame(scene.frame());
    return aire_step_standardized(standardized, scene, rois, op);
}

/// Step scores for a whole program plus the per-operation mean over
/// non-missing steps.
inline QuestionScore score_question(const AttentionMap& map, const SceneGraph& scene,
                                    const ReasoningProgram& program, std::span<const StepROIs> rois)
{
    if (rois.size() != program.steps.size()) {
        throw Error(ErrorKind::LengthMismatch, program.question_id + ": ROI list does not match program length");
    }
    AttentionMap standardized = standardize(map);
    standardized.set_frame(scene.frame());

    QuestionScore out;
    out.question_id = program.question_id;
    std::map<AtomicOp, std::pair<double, std::size_t>> sums;
    for (std::size_t i = 0; i < rois.size(); ++i) {
        const AtomicOp op = program.steps[i].triplet.op;
        StepScore s = aire_step_standardized(standardized, scene, rois[i], op);
        if (s.aire) {
            sums[op].first += *s.aire;
            sums[op].second += 1;
        }
        out.steps.push_back(s);
    }
    for (const auto& [op, acc] : sums) {
        out.by_op[op] = acc.first / static_cast<double>(acc.second);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Saliency metrics

/// Mean standardized map value at the fixated cells.
inline double nss(const AttentionMap& map, std::span<const FixationRecord> fixations)
{
    if (fixations.empty()) {
        throw Error(ErrorKind::NoFixations, "NSS needs at least one fixation");
    }
    const AttentionMap standardized = standardize(map);
    double total = 0.0;
    for (const auto& f : fixations) {
        const auto [r, c] = cell_of(f.x, f.y, map.frame(), map.rows(), map.cols());
        total += standardized.at(r, c);
    }
    return total / static_cast<double>(fixations.size());
}

inline double pearson(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) {
        throw Error(ErrorKind::LengthMismatch, "pearson inputs differ in length");
    }
    if (x.size() < 2) {
        throw Error(ErrorKind::InsufficientData, "pearson needs at least two points");
    }
    const Moments mx = moments(x);
    const Moments my = moments(y);
    if (mx.stddev == 0.0 || my.stddev == 0.0) {
        throw Error(ErrorKind::ConstantInput, "pearson input is constant");
    }
    double cov = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cov += (x[i] - mx.mean) * (y[i] - my.mean);
    }
    cov /= static_cast<double>(x.size());
    return std::clamp(cov / (mx.stddev * my.stddev), -1.0, 1.0);
}

/// Linear correlation coefficient between two maps of equal shape.
inline double cc(const AttentionMap& a, const AttentionMap& b)
{
    if (!a.same_shape(b)) {
        throw Error(ErrorKind::ShapeMismatch, "cc needs maps of equal shape");
    }
    return pearson(a.values(), b.values());
}

/// 1-based ranks with ties sharing their average rank.
inline std::vector<double> average_ranks(std::span<const double> values)
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = rank;
        }
        i = j + 1;
    }
    return ranks;
}

inline double spearman(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) {
        throw Error(ErrorKind::LengthMismatch, "spearman inputs differ in length");
    }
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    return pearson(ra, rb);
}

inline double spearman(const AttentionMap& a, const AttentionMap& b)
{
    if (!a.same_shape(b)) {
        throw Error(ErrorKind::ShapeMismatch, "spearman needs maps of equal shape");
    }
    return spearman(a.values(), b.values());
}

/// AUC-Judd: fixated values as thresholds (>= convention), TPR over
/// fixations, FPR over all cells, trapezoid from (0,0) to (1,1).
inline double auc_judd(const AttentionMap& map, std::span<const FixationRecord> fixations)
{
    if (fixations.empty()) {
        throw Error(ErrorKind::NoFixations, "AUC-Judd needs at least one fixation");
    }
    std::vector<double> fixated;
    fixated.reserve(fixations.size());
    for (const auto& f : fixations) {
        const auto [r, c] = cell_of(f.x, f.y, map.frame(), map.rows(), map.cols());
        fixated.push_back(map.at(r, c));
    }
    std::vector<double> all(map.values().begin(), map.values().end());
    std::sort(all.begin(), all.end());
    std::sort(fixated.begin(), fixated.end());

    const auto n_fix = static_cast<double>(fixated.size());
    const auto n_all = static_cast<double>(all.size());
    const auto at_least = [](const std::vector<double>& sorted, double theta) {
        return static_cast<double>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), theta));
    };

    std::vector<double> thresholds = fixated;
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    double area = 0.0;
    double prev_fpr = 0.0;
    double prev_tpr = 0.0;
    for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
        const double tpr = at_least(fixated, *it) / n_fix;
        const double fpr = at_least(all, *it) / n_all;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    area += (1.0 - prev_fpr) * (1.0 + prev_tpr) / 2.0;
    return area;
}

/// Unnormalised EDR cost: edits needed when points within eps match for free.
inline std::size_t edr_cost(std::span<const FixationRecord> a, std::span<const FixationRecord> b, double eps)
{
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const double dx = a[i - 1].x - b[j - 1].x;
            const double dy = a[i - 1].y - b[j - 1].y;
            const std::size_t subst = std::hypot(dx, dy) <= eps ? 0 : 1;
            cur[j] = std::min({prev[j - 1] + subst, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

/// Edit distance on real sequences normalised by the longer length; 0 for two
/// empty sequences.
inline double edr(std::span<const FixationRecord> a, std::span<const FixationRecord> b, double eps = 9.0)
{
    if (!(eps > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "EDR eps must be positive");
    }
    const std::size_t longest = std::max(a.size(), b.size());
    if (longest == 0) {
        return 0.0;
    }
    return static_cast<double>(edr_cost(a, b, eps)) / static_cast<double>(longest);
}

inline double edr(const FixationSequence& a, const FixationSequence& b, double eps = 9.0)
{
    return edr(a.fixations, b.fixations, eps);
}

/// Fixations rescaled from `frame` pixels onto a size x size grid, so that
/// distances are measured in grid pixels.
inline FixationSequence to_grid(const FixationSequence& seq, const Frame& frame, std::size_t size = 256)
{
    FixationSequence out = seq;
    for (auto& f : out.fixations) {
        f.x = f.x * static_cast<double>(size) / frame.width;
        f.y = f.y * static_cast<double>(size) / frame.height;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Semantic alignment

/// Mean map value over the union of each category's boxes.
inline std::map<std::string, double> category_scores(const AttentionMap& map, const SceneGraph& scene)
{
    std::map<std::string, std::vector<bool>> masks;
    for (const auto& o : scene.objects) {
        auto& mask = masks[o.category];
        if (mask.empty()) {
            mask.assign(map.size(), false);
        }
        const PixelSpan span = raster_cells(o.box, scene.frame(), map.rows(), map.cols());
        for (std::size_t r = span.row_begin; r < span.row_end; ++r) {
            for (std::size_t c = span.col_begin; c < span.col_end; ++c) {
                mask[r * map.cols() + c] = true;
            }
        }
    }
    std::map<std::string, double> out;
    for (const auto& [category, mask] : masks) {
        double total = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (mask[i]) {
                total += map.values()[i];
                ++n;
            }
        }
        if (n > 0) {
            out[category] = total / static_cast<double>(n);
        }
    }
    return out;
}

/// The k highest-scoring categories, ties broken by name.
inline std::set<std::string> top_categories(const std::map<std::string, double>& scores, std::size_t k)
{
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& [name, s] : scores) {
        ranked.emplace_back(s, name);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::set<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
        out.insert(ranked[i].second);
    }
    return out;
}

struct SemanticAlignment {
    double iou = 0.0;
    /// The scene had fewer than topk categories; all of them were used.
    bool fewer_categories_than_topk = false;
};

inline SemanticAlignment semantic_alignment(const AttentionMap& a, const AttentionMap& b, const SceneGraph& scene,
                                            std::size_t topk = 5)
{
    const auto sa = category_scores(a, scene);
    const auto sb = category_scores(b, scene);
    SemanticAlignment out;
    out.fewer_categories_than_topk = sa.size() < topk;
    const auto ta = top_categories(sa, topk);
    const auto tb = top_categories(sb, topk);
    std::size_t inter = 0;
    for (const auto& c : ta) {
        inter += tb.count(c);
    }
    const std::size_t uni = ta.size() + tb.size() - inter;
    out.iou = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
    return out;
}

// ---------------------------------------------------------------------------
// Inter-subject consistency

/// Mean AUC-Judd of one random half of the subjects' fixation map against the
/// other half's fixations, over n_splits splits per question. Sequences are
/// grouped by question_id; questions with fewer than two subjects are skipped.
inline double split_half_consistency(std::span<const FixationSequence> sequences, const Frame& frame,
                                     std::size_t n_splits = 10, std::uint64_t seed = 0,
                                     const FixationMapOptions& map_options = {})
{
    std::map<std::string, std::map<std::string, std::vector<FixationRecord>>> by_question;
    for (const auto& seq : sequences) {
        for (const auto& f : seq.fixations) {
            by_question[seq.question_id][f.subject_id].push_back(f);
        }
    }
    Rng rng(seed);
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& [qid, by_subject] : by_question) {
        if (by_subject.size() < 2) {
            continue;
        }
        std::vector<std::string> subjects;
        for (const auto& [s, _] : by_subject) {
            subjects.push_back(s);
        }
        for (std::size_t split = 0; split < n_splits; ++split) {
            rng.shuffle(std::span<std::string>(subjects));
            const std::size_t half = subjects.size() / 2;
            std::vector<FixationRecord> build;
            std::vector<FixationRecord> held_out;
            for (std::size_t i = 0; i < subjects.size(); ++i) {
                const auto& fx = by_subject.at(subjects[i]);
                auto& dst = i < half ? build : held_out;
                dst.insert(dst.end(), fx.begin(), fx.end());
            }
            const AttentionMap map = build_fixation_map(build, frame, map_options);
            total += auc_judd(map, held_out);
            ++count;
        }
    }
    if (count == 0) {
        throw Error(ErrorKind::TooFewSubjects, "split-half consistency needs a question with at least two subjects");
    }
    return total / static_cast<double>(count);
}

} // namespace air
