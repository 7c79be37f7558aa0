#pragma once

// Corpus-level analyses of attention sources: per-operation AiR-E, accuracy
// correlations, spatiotemporal heatmaps, question-pair alignment,
// correctness-grouped pairwise comparisons and centre-bias similarity.
// Every number is a metric from metrics.hpp followed by grouping and means.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "air/attention.hpp"
#include "air/corpus.hpp"
#include "air/map_io.hpp"
#include "air/metrics.hpp"
#include "air/png_io.hpp"

namespace air {

// ---------------------------------------------------------------------------
// Tables

/// Fixed six-decimal rendering; non-finite values print as n/a.
inline std::string format_real(double v)
{
    if (!std::isfinite(v)) {
        return "n/a";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    std::string s = buf;
    return s == "-0.000000" ? "0.000000" : s;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string to_csv() const
    {
        std::string out;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                out += (i ? "," : "") + cells[i];
            }
            out += '\n';
        };
        line(header);
        for (const auto& r : rows) {
            line(r);
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Attention sources

enum class SourceKind { HumanCorrect, HumanIncorrect, HumanTotal, Model };

constexpr std::string_view to_string(SourceKind k) noexcept
{
    switch (k) {
    case SourceKind::HumanCorrect: return "human_correct";
    case SourceKind::HumanIncorrect: return "human_incorrect";
    case SourceKind::HumanTotal: return "human_total";
    case SourceKind::Model: return "model";
    }
    return "?";
}

inline std::optional<SourceKind> parse_source_kind(std::string_view s)
{
    for (auto k : {SourceKind::HumanCorrect, SourceKind::HumanIncorrect, SourceKind::HumanTotal, SourceKind::Model}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

struct AttentionSource {
    std::string name;
    SourceKind kind = SourceKind::Model;
    /// Per question one map, or one per glimpse in glimpse order.
    std::map<std::string, std::vector<AttentionMap>> maps;
    /// Task performance per question (models: score of the correct answer,
    /// humans: proportion correct).
    std::map<std::string, double> performance;
    /// Answer correctness per question, used for grouping.
    std::map<std::string, bool> correct;
};

/// Mean of the glimpse maps on the first glimpse's grid.
inline AttentionMap aggregate_glimpses(std::span<const AttentionMap> glimpses)
{
    if (glimpses.empty()) {
        throw Error(ErrorKind::InvalidArgument, "no glimpse maps to aggregate");
    }
    AttentionMap out = glimpses.front();
    for (std::size_t g = 1; g < glimpses.size(); ++g) {
        const AttentionMap m = glimpses[g].same_shape(out) ? glimpses[g]
                                                            : resample_map(glimpses[g], out.rows(), out.cols());
        for (std::size_t i = 0; i < out.size(); ++i) {
            out.values()[i] += m.values()[i];
        }
    }
    for (double& v : out.values()) {
        v /= static_cast<double>(glimpses.size());
    }
    return out;
}

namespace detail {

inline bool keeps(SourceKind kind, const FixationRecord& f)
{
    switch (kind) {
    case SourceKind::HumanCorrect: return f.correct == true;
    case SourceKind::HumanIncorrect: return f.correct == false;
    default: return true;
    }
}

inline void check_source(const AttentionSource& src, const Corpus& corpus)
{
    for (const auto& [qid, glimpses] : src.maps) {
        if (!corpus.questions.count(qid)) {
            throw Error(ErrorKind::CrossReference, "source " + src.name + " refers to unknown question " + qid);
        }
        if (glimpses.empty()) {
            throw Error(ErrorKind::SchemaViolation, "source " + src.name + " has no map for " + qid);
        }
    }
}

} // namespace detail

/// Human source from the corpus fixations: fixations of the subjects in the
/// group, pooled per question. Performance is the proportion of labelled
/// subjects answering correctly.
inline AttentionSource human_source(const Corpus& corpus, SourceKind kind, const FixationMapOptions& options = {})
{
    if (kind == SourceKind::Model) {
        throw Error(ErrorKind::InvalidArgument, "human_source needs a human kind");
    }
    AttentionSource src;
    src.name = std::string(to_string(kind));
    src.kind = kind;
    std::map<std::string, std::vector<FixationRecord>> pooled;
    std::map<std::string, std::pair<std::size_t, std::size_t>> votes;
    for (const auto& seq : corpus.fixations) {
        for (const auto& f : seq.fixations) {
            if (detail::keeps(kind, f)) {
                pooled[seq.question_id].push_back(f);
            }
        }
        if (!seq.fixations.empty() && seq.fixations.front().correct) {
            auto& v = votes[seq.question_id];
            v.first += *seq.fixations.front().correct ? 1 : 0;
            v.second += 1;
        }
    }
    for (const auto& [qid, fx] : pooled) {
        src.maps[qid] = {build_fixation_map(fx, corpus.scene_of(qid).frame(), options)};
    }
    for (const auto& [qid, v] : votes) {
        src.performance[qid] = static_cast<double>(v.first) / static_cast<double>(v.second);
    }
    return src;
}

/// Source description file: {"name", "kind", "maps": dir, "performance": {qid: real},
/// "correct": {qid: bool}}. The maps directory holds <qid>.airm or, for
/// glimpses, <qid>.<g>.airm; relative paths resolve against the file.
/// Human kinds without a maps entry are built from the corpus fixations.
inline AttentionSource load_source(const std::filesystem::path& path, const Corpus& corpus,
                                   const FixationMapOptions& options = {})
{
    namespace fs = std::filesystem;
    const Json j = detail::read_json_file(path);
    const std::string where = path.filename().string();
    AttentionSource src;
    try {
        const auto kind = parse_source_kind(j.value("kind", std::string("model")));
        if (!kind) {
            detail::schema_error(where, "unknown kind " + j.at("kind").dump());
        }
        if (j.contains("maps")) {
            src.kind = *kind;
            const fs::path dir = path.parent_path() / j.at("maps").get<std::string>();
            if (!fs::is_directory(dir)) {
                throw Error(ErrorKind::Io, "maps directory " + dir.string() + " does not exist");
            }
            std::map<std::string, std::map<std::size_t, fs::path>> files;
            for (const auto& entry : fs::directory_iterator(dir)) {
                if (entry.path().extension() != ".airm") {
                    continue;
                }
                std::string stem = entry.path().stem().string();
                std::size_t glimpse = 0;
                const auto dot = stem.rfind('.');
                if (dot != std::string::npos && dot + 1 < stem.size() &&
                    std::all_of(stem.begin() + static_cast<std::ptrdiff_t>(dot) + 1, stem.end(),
                                [](char c) { return c >= '0' && c <= '9'; })) {
                    glimpse = std::stoul(stem.substr(dot + 1));
                    stem.resize(dot);
                }
                files[stem][glimpse] = entry.path();
            }
            for (const auto& [qid, by_glimpse] : files) {
                if (!corpus.questions.count(qid)) {
                    throw Error(ErrorKind::CrossReference, where + " has a map for unknown question " + qid);
                }
                for (const auto& [_, file] : by_glimpse) {
                    src.maps[qid].push_back(load_airm(file, corpus.scene_of(qid).frame()));
                }
            }
        } else if (*kind != SourceKind::Model) {
            src = human_source(corpus, *kind, options);
        } else {
            detail::schema_error(where, "model sources need a maps directory");
        }
        src.name = j.value("name", path.stem().string());
        if (j.contains("performance")) {
            src.performance = j.at("performance").get<std::map<std::string, double>>();
        }
        if (j.contains("correct")) {
            src.correct = j.at("correct").get<std::map<std::string, bool>>();
        }
    } catch (const Json::exception& e) {
        detail::schema_error(where, e.what());
    }
    for (const auto& [qid, _] : src.performance) {
        if (!corpus.questions.count(qid)) {
            throw Error(ErrorKind::CrossReference, where + " scores unknown question " + qid);
        }
    }
    for (const auto& [qid, _] : src.correct) {
        if (!corpus.questions.count(qid)) {
            throw Error(ErrorKind::CrossReference, where + " labels unknown question " + qid);
        }
    }
    detail::check_source(src, corpus);
    return src;
}

// ---------------------------------------------------------------------------
// Per-operation AiR-E

/// Question scores of the source's aggregate maps, keyed by question id.
inline std::map<std::string, QuestionScore> score_source(const AttentionSource& src, const Corpus& corpus)
{
    detail::check_source(src, corpus);
    std::map<std::string, QuestionScore> out;
    for (const auto& [qid, glimpses] : src.maps) {
        const Question& q = corpus.questions.at(qid);
        out.emplace(qid, score_question(aggregate_glimpses(glimpses), corpus.scene_of(q), q.program, q.rois));
    }
    return out;
}

struct OpBreakdownRow {
    AtomicOp op = AtomicOp::Select;
    double mean_of_questions = std::numeric_limits<double>::quiet_NaN(); ///< mean of question-level op means
    std::size_t n_questions = 0;
    double pooled_steps = std::numeric_limits<double>::quiet_NaN(); ///< mean over all scored steps
    std::size_t n_steps = 0;
    std::size_t n_missing = 0;
};

/// One row per operation kind; missing steps are excluded and counted.
inline std::vector<OpBreakdownRow> op_breakdown(const AttentionSource& src, const Corpus& corpus)
{
    std::map<AtomicOp, OpBreakdownRow> rows;
    std::map<AtomicOp, std::pair<double, double>> sums;
    for (AtomicOp op : kAllOps) {
        rows[op].op = op;
    }
    for (const auto& [qid, qs] : score_source(src, corpus)) {
        for (const auto& s : qs.steps) {
            auto& row = rows[s.op];
            if (s.aire) {
                sums[s.op].second += *s.aire;
                ++row.n_steps;
            } else {
                ++row.n_missing;
            }
        }
        for (const auto& [op, v] : qs.by_op) {
            sums[op].first += v;
            ++rows[op].n_questions;
        }
    }
    std::vector<OpBreakdownRow> out;
    for (AtomicOp op : kAllOps) {
        auto row = rows[op];
        if (row.n_questions) {
            row.mean_of_questions = sums[op].first / static_cast<double>(row.n_questions);
        }
        if (row.n_steps) {
            row.pooled_steps = sums[op].second / static_cast<double>(row.n_steps);
        }
        out.push_back(row);
    }
    return out;
}

inline CsvTable to_table(std::span<const OpBreakdownRow> rows)
{
    CsvTable t{{"op", "mean_of_questions", "n_questions", "pooled_steps", "n_steps", "n_missing"}, {}};
    for (const auto& r : rows) {
        t.rows.push_back({std::string(to_string(r.op)), format_real(r.mean_of_questions), std::to_string(r.n_questions),
                          format_real(r.pooled_steps), std::to_string(r.n_steps), std::to_string(r.n_missing)});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Accuracy correlation

struct CorrelationRow {
    std::string label; ///< operation name or "overall"
    std::size_t n = 0;
    std::optional<double> r;
    std::optional<double> p; ///< two-tailed
    bool significant = false;
    std::string note; ///< why r is n/a
};

/// Two-tailed p-value of Pearson r over n points (t test, n - 2 dof).
inline double pearson_p_value(double r, std::size_t n)
{
    if (n < 3) {
        throw Error(ErrorKind::InsufficientData, "p-value needs at least three points");
    }
    const double dof = static_cast<double>(n - 2);
    if (std::abs(r) >= 1.0) {
        return 0.0;
    }
    const double t = r * std::sqrt(dof / (1.0 - r * r));
    const boost::math::students_t dist(dof);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

namespace detail {

inline CorrelationRow correlate(std::string label, const std::vector<double>& x, const std::vector<double>& y,
                                double alpha)
{
    CorrelationRow row{std::move(label), x.size(), {}, {}, false, {}};
    if (x.size() < 3) {
        row.note = "insufficient_data";
        return row;
    }
    try {
        row.r = pearson(x, y);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::ConstantInput) {
            throw;
        }
        row.note = "constant_input";
        return row;
    }
    row.p = pearson_p_value(*row.r, x.size());
    row.significant = *row.p < alpha;
    return row;
}

} // namespace detail

/// Per-operation Pearson r between question-level AiR-E and performance,
/// plus an overall row on the question mean over scored steps.
inline std::vector<CorrelationRow> accuracy_correlation(const AttentionSource& src, const Corpus& corpus,
                                                        const std::map<std::string, double>& performance,
                                                        double alpha = 0.05)
{
    std::map<AtomicOp, std::pair<std::vector<double>, std::vector<double>>> per_op;
    std::vector<double> all_x;
    std::vector<double> all_y;
    for (const auto& [qid, qs] : score_source(src, corpus)) {
        const auto perf = performance.find(qid);
        if (perf == performance.end()) {
            continue;
        }
        double total = 0.0;
        std::size_t n = 0;
        for (const auto& s : qs.steps) {
            if (s.aire) {
                total += *s.aire;
                ++n;
            }
        }
        for (const auto& [op, v] : qs.by_op) {
            per_op[op].first.push_back(v);
            per_op[op].second.push_back(perf->second);
        }
        if (n) {
            all_x.push_back(total / static_cast<double>(n));
            all_y.push_back(perf->second);
        }
    }
    std::vector<CorrelationRow> out;
    for (AtomicOp op : kAllOps) {
        const auto& xy = per_op[op];
        out.push_back(detail::correlate(std::string(to_string(op)), xy.first, xy.second, alpha));
    }
    out.push_back(detail::correlate("overall", all_x, all_y, alpha));
    return out;
}

inline std::vector<CorrelationRow> accuracy_correlation(const AttentionSource& src, const Corpus& corpus)
{
    return accuracy_correlation(src, corpus, src.performance);
}

inline CsvTable to_table(std::span<const CorrelationRow> rows)
{
    CsvTable t{{"op", "n", "r", "p", "significant", "note"}, {}};
    for (const auto& r : rows) {
        t.rows.push_back({r.label, std::to_string(r.n), r.r ? format_real(*r.r) : "n/a",
                          r.p ? format_real(*r.p) : "n/a", r.significant ? "1" : "0", r.note});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Spatiotemporal heatmap

/// Per question, one map per temporal bin or glimpse; nullopt for an empty bin.
using TemporalMaps = std::map<std::string, std::vector<std::optional<AttentionMap>>>;

struct Heatmap {
    std::vector<std::vector<double>> mean;     ///< [bin][step], NaN where no question contributes
    std::vector<std::vector<std::size_t>> n;   ///< contributing questions per cell

    std::size_t rows() const noexcept { return mean.size(); }
    std::size_t cols() const noexcept { return mean.empty() ? 0 : mean.front().size(); }
};

/// Fixation maps of one question per half-open onset bin, pooled over the
/// selected subjects.
inline std::vector<std::optional<AttentionMap>> fixation_bin_maps(const Corpus& corpus, const std::string& question_id,
                                                                  std::span<const double> edges,
                                                                  SourceKind kind = SourceKind::HumanTotal,
                                                                  const FixationMapOptions& options = {})
{
    std::vector<std::vector<FixationRecord>> pooled(edges.size() - 1);
    for (const auto& seq : corpus.fixations_of(question_id)) {
        FixationSequence kept{seq.question_id, {}};
        std::copy_if(seq.fixations.begin(), seq.fixations.end(), std::back_inserter(kept.fixations),
                     [&](const FixationRecord& f) { return detail::keeps(kind, f); });
        const auto bins = temporal_bins(kept, edges);
        for (std::size_t b = 0; b < bins.bins.size(); ++b) {
            pooled[b].insert(pooled[b].end(), bins.bins[b].begin(), bins.bins[b].end());
        }
    }
    std::vector<std::optional<AttentionMap>> out;
    const Frame frame = corpus.scene_of(question_id).frame();
    for (const auto& fx : pooled) {
        out.push_back(fx.empty() ? std::nullopt : std::optional(build_fixation_map(fx, frame, options)));
    }
    return out;
}

/// Glimpse maps of a source in the same layout.
inline TemporalMaps glimpse_maps(const AttentionSource& src)
{
    TemporalMaps out;
    for (const auto& [qid, glimpses] : src.maps) {
        out[qid].assign(glimpses.begin(), glimpses.end());
    }
    return out;
}

/// Cell (i, j): mean AiR-E of bin/glimpse i's map against step j's ROIs over
/// the questions that have both, excluding missing steps.
inline Heatmap temporal_heatmap(const TemporalMaps& seqs, const Corpus& corpus)
{
    std::size_t n_bins = 0;
    std::size_t n_steps = 0;
    for (const auto& [qid, maps] : seqs) {
        const auto it = corpus.questions.find(qid);
        if (it == corpus.questions.end()) {
            throw Error(ErrorKind::CrossReference, "heatmap input refers to unknown question " + qid);
        }
        n_bins = std::max(n_bins, maps.size());
        n_steps = std::max(n_steps, it->second.program.steps.size());
    }
    std::vector<std::vector<double>> sum(n_bins, std::vector<double>(n_steps, 0.0));
    Heatmap h{std::vector<std::vector<double>>(n_bins, std::vector<double>(n_steps, 0.0)),
              std::vector<std::vector<std::size_t>>(n_bins, std::vector<std::size_t>(n_steps, 0))};
    for (const auto& [qid, maps] : seqs) {
        const Question& q = corpus.questions.at(qid);
        const SceneGraph& scene = corpus.scene_of(q);
        for (std::size_t i = 0; i < maps.size(); ++i) {
            if (!maps[i]) {
                continue;
            }
            AttentionMap z = standardize(*maps[i]);
            z.set_frame(scene.frame());
            for (std::size_t j = 0; j < q.program.steps.size(); ++j) {
                const StepScore s = aire_step_standardized(z, scene, q.rois[j], q.program.steps[j].triplet.op);
                if (s.aire) {
                    sum[i][j] += *s.aire;
                    ++h.n[i][j];
                }
            }
        }
    }
    for (std::size_t i = 0; i < n_bins; ++i) {
        for (std::size_t j = 0; j < n_steps; ++j) {
            h.mean[i][j] = h.n[i][j] ? sum[i][j] / static_cast<double>(h.n[i][j])
                                     : std::numeric_limits<double>::quiet_NaN();
        }
    }
    return h;
}

inline CsvTable to_table(const Heatmap& h, const std::string& row_label = "bin")
{
    CsvTable t{{row_label}, {}};
    for (std::size_t j = 0; j < h.cols(); ++j) {
        t.header.push_back("step" + std::to_string(j + 1));
    }
    for (std::size_t j = 0; j < h.cols(); ++j) {
        t.header.push_back("n_step" + std::to_string(j + 1));
    }
    for (std::size_t i = 0; i < h.rows(); ++i) {
        std::vector<std::string> row = {std::to_string(i)};
        for (double v : h.mean[i]) {
            row.push_back(format_real(v));
        }
        for (std::size_t n : h.n[i]) {
            row.push_back(std::to_string(n));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

// ---------------------------------------------------------------------------
// Question-pair alignment

struct PairAlignmentRow {
    std::string image_id;
    std::string question_a;
    std::string question_b;
    std::optional<std::size_t> bin; ///< nullopt: all fixations
    double spatial = 0.0;           ///< Spearman between the two fixation maps
    double semantic = 0.0;          ///< top-k category IoU
};

struct PairAlignmentSummary {
    std::optional<std::size_t> bin;
    std::size_t n = 0;
    double spatial = std::numeric_limits<double>::quiet_NaN();
    double semantic = std::numeric_limits<double>::quiet_NaN();
};

struct PairAlignment {
    std::vector<PairAlignmentRow> pairs;
    std::vector<PairAlignmentSummary> summary; ///< overall first, then one per bin
};

/// Alignment of every pair of questions asked on the same image, from the
/// pooled fixations of all subjects, overall and per temporal bin. Pairs with
/// an empty map on either side, or a constant map, are left out of that row.
inline PairAlignment question_pair_alignment(const Corpus& corpus, std::span<const double> edges,
                                             const FixationMapOptions& options = {}, std::size_t topk = 5)
{
    std::map<std::string, std::vector<std::string>> by_image;
    for (const auto& seq : corpus.fixations) {
        auto& qs = by_image[corpus.questions.at(seq.question_id).image_id];
        if (std::find(qs.begin(), qs.end(), seq.question_id) == qs.end()) {
            qs.push_back(seq.question_id);
        }
    }
    const std::size_t n_bins = edges.size() - 1;
    struct Maps {
        std::optional<AttentionMap> all;
        std::vector<std::optional<AttentionMap>> bins;
    };
    std::map<std::string, Maps> maps;
    for (auto& [image, qs] : by_image) {
        std::sort(qs.begin(), qs.end());
        if (qs.size() < 2) {
            continue;
        }
        for (const auto& qid : qs) {
            std::vector<FixationRecord> all;
            for (const auto& seq : corpus.fixations_of(qid)) {
                all.insert(all.end(), seq.fixations.begin(), seq.fixations.end());
            }
            Maps m;
            if (!all.empty()) {
                m.all = build_fixation_map(all, corpus.scenes.at(image).frame(), options);
            }
            m.bins = fixation_bin_maps(corpus, qid, edges, SourceKind::HumanTotal, options);
            maps.emplace(qid, std::move(m));
        }
    }

    PairAlignment out;
    std::vector<std::array<double, 3>> acc(n_bins + 1, {0.0, 0.0, 0.0});
    auto add = [&](const std::string& image, const std::string& a, const std::string& b, std::optional<std::size_t> bin,
                   const std::optional<AttentionMap>& ma, const std::optional<AttentionMap>& mb) {
        if (!ma || !mb) {
            return;
        }
        double spatial = 0.0;
        try {
            spatial = spearman(*ma, *mb);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::ConstantInput) {
                throw;
            }
            return;
        }
        const double semantic = semantic_alignment(*ma, *mb, corpus.scenes.at(image), topk).iou;
        out.pairs.push_back({image, a, b, bin, spatial, semantic});
        auto& s = acc[bin ? *bin + 1 : 0];
        s[0] += 1.0;
        s[1] += spatial;
        s[2] += semantic;
    };
    for (const auto& [image, qs] : by_image) {
        for (std::size_t i = 0; i < qs.size(); ++i) {
            for (std::size_t j = i + 1; j < qs.size(); ++j) {
                const Maps& a = maps.at(qs[i]);
                const Maps& b = maps.at(qs[j]);
                add(image, qs[i], qs[j], std::nullopt, a.all, b.all);
                for (std::size_t bin = 0; bin < n_bins; ++bin) {
                    add(image, qs[i], qs[j], bin, a.bins[bin], b.bins[bin]);
                }
            }
        }
    }
    for (std::size_t k = 0; k <= n_bins; ++k) {
        PairAlignmentSummary s;
        if (k > 0) {
            s.bin = k - 1;
        }
        s.n = static_cast<std::size_t>(acc[k][0]);
        if (s.n) {
            s.spatial = acc[k][1] / acc[k][0];
            s.semantic = acc[k][2] / acc[k][0];
        }
        out.summary.push_back(s);
    }
    return out;
}

inline CsvTable pairs_table(const PairAlignment& pa)
{
    CsvTable t{{"image_id", "question_a", "question_b", "bin", "spatial", "semantic"}, {}};
    for (const auto& r : pa.pairs) {
        t.rows.push_back({r.image_id, r.question_a, r.question_b, r.bin ? std::to_string(*r.bin) : "all",
                          format_real(r.spatial), format_real(r.semantic)});
    }
    return t;
}

inline CsvTable summary_table(const PairAlignment& pa)
{
    CsvTable t{{"bin", "n_pairs", "spatial", "semantic"}, {}};
    for (const auto& s : pa.summary) {
        t.rows.push_back({s.bin ? std::to_string(*s.bin) : "all", std::to_string(s.n), format_real(s.spatial),
                          format_real(s.semantic)});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Correctness-grouped pairwise comparison

enum class AnswerGroup { Inter, Correct, Incorrect };

constexpr std::string_view to_string(AnswerGroup g) noexcept
{
    switch (g) {
    case AnswerGroup::Inter: return "Inter";
    case AnswerGroup::Correct: return "Correct";
    case AnswerGroup::Incorrect: return "Incorrect";
    }
    return "?";
}

constexpr AnswerGroup answer_group(bool a, bool b) noexcept
{
    return a != b ? AnswerGroup::Inter : (a ? AnswerGroup::Correct : AnswerGroup::Incorrect);
}

struct GroupRow {
    AnswerGroup group = AnswerGroup::Inter;
    std::size_t n = 0;
    /// Metric name -> mean over the group's pairs; NaN for an empty group.
    std::map<std::string, double> values;
};

namespace detail {

inline std::vector<GroupRow> group_rows(const std::map<AnswerGroup, std::map<std::string, std::vector<double>>>& acc,
                                        const std::vector<std::string>& metrics)
{
    std::vector<GroupRow> out;
    for (AnswerGroup g : {AnswerGroup::Inter, AnswerGroup::Correct, AnswerGroup::Incorrect}) {
        GroupRow row{g, 0, {}};
        for (const auto& m : metrics) {
            row.values[m] = std::numeric_limits<double>::quiet_NaN();
        }
        if (const auto it = acc.find(g); it != acc.end()) {
            for (const auto& [m, v] : it->second) {
                row.n = v.size();
                if (!v.empty()) {
                    row.values[m] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
                }
            }
        }
        out.push_back(std::move(row));
    }
    return out;
}

} // namespace detail

/// Model pair: Spearman between the two sources' aggregate maps per question,
/// grouped by the pair of answer labels. Questions lacking a map or a label
/// on either side are skipped; b's map is resampled onto a's grid.
inline std::vector<GroupRow> pairwise_group_comparison(const AttentionSource& a, const AttentionSource& b)
{
    std::map<AnswerGroup, std::map<std::string, std::vector<double>>> acc;
    for (const auto& [qid, ga] : a.maps) {
        const auto gb = b.maps.find(qid);
        const auto ca = a.correct.find(qid);
        const auto cb = b.correct.find(qid);
        if (gb == b.maps.end() || ca == a.correct.end() || cb == b.correct.end()) {
            continue;
        }
        const AttentionMap ma = aggregate_glimpses(ga);
        AttentionMap mb = aggregate_glimpses(gb->second);
        if (!mb.same_shape(ma)) {
            mb = resample_map(mb, ma.rows(), ma.cols());
        }
        acc[answer_group(ca->second, cb->second)]["spearman"].push_back(spearman(ma, mb));
    }
    return detail::group_rows(acc, {"spearman"});
}

struct HumanPairOptions {
    double edr_eps = 9.0;
    FixationMapOptions map;
};

/// Human pairs: every two labelled subjects on a question. EDR between their
/// sequences on the square grid, and AUC-Judd of each subject's fixation map
/// against the other's fixations, averaged over both directions.
inline std::vector<GroupRow> pairwise_group_comparison(const Corpus& corpus, const HumanPairOptions& options = {})
{
    std::map<std::string, std::vector<const FixationSequence*>> by_question;
    for (const auto& seq : corpus.fixations) {
        if (!seq.fixations.empty() && seq.fixations.front().correct) {
            by_question[seq.question_id].push_back(&seq);
        }
    }
    const Frame grid{static_cast<double>(options.map.out_size), static_cast<double>(options.map.out_size)};
    std::map<AnswerGroup, std::map<std::string, std::vector<double>>> acc;
    for (const auto& [qid, seqs] : by_question) {
        const Frame frame = corpus.scene_of(qid).frame();
        std::vector<FixationSequence> gridded;
        std::vector<AttentionMap> maps;
        for (const auto* s : seqs) {
            gridded.push_back(to_grid(*s, frame, options.map.out_size));
            maps.push_back(build_fixation_map(gridded.back().fixations, grid, options.map));
        }
        for (std::size_t i = 0; i < seqs.size(); ++i) {
            for (std::size_t j = i + 1; j < seqs.size(); ++j) {
                const AnswerGroup g =
                    answer_group(*seqs[i]->fixations.front().correct, *seqs[j]->fixations.front().correct);
                acc[g]["edr"].push_back(edr(gridded[i], gridded[j], options.edr_eps));
                acc[g]["auc_judd"].push_back(
                    0.5 * (auc_judd(maps[i], gridded[j].fixations) + auc_judd(maps[j], gridded[i].fixations)));
            }
        }
    }
    return detail::group_rows(acc, {"edr", "auc_judd"});
}

inline CsvTable to_table(std::span<const GroupRow> rows)
{
    CsvTable t{{"group", "n"}, {}};
    if (!rows.empty()) {
        for (const auto& [m, _] : rows.front().values) {
            t.header.push_back(m);
        }
    }
    for (const auto& r : rows) {
        std::vector<std::string> row = {std::string(to_string(r.group)), std::to_string(r.n)};
        for (const auto& [_, v] : r.values) {
            row.push_back(format_real(v));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

// ---------------------------------------------------------------------------
// Centre bias

/// Fixations of the corpus on the square out_size grid, optionally restricted
/// to one correctness label.
inline std::vector<FixationRecord> grid_fixations(const Corpus& corpus, std::optional<bool> correct,
                                                  std::size_t out_size = 256)
{
    std::vector<FixationRecord> out;
    for (const auto& seq : corpus.fixations) {
        const auto g = to_grid(seq, corpus.scene_of(seq.question_id).frame(), out_size);
        for (const auto& f : g.fixations) {
            if (!correct || f.correct == correct) {
                out.push_back(f);
            }
        }
    }
    return out;
}

/// cc between the aggregate fixation maps of the two groups, given in grid
/// coordinates.
inline double center_bias_similarity(std::span<const FixationRecord> correct,
                                     std::span<const FixationRecord> incorrect,
                                     const FixationMapOptions& options = {})
{
    if (correct.empty() || incorrect.empty()) {
        throw Error(ErrorKind::EmptyGroup, "centre-bias similarity needs fixations in both groups");
    }
    const auto s = static_cast<double>(options.out_size);
    const Frame grid{s, s};
    return cc(build_fixation_map(correct, grid, options), build_fixation_map(incorrect, grid, options));
}

// ---------------------------------------------------------------------------
// Report

struct AnalysisReport {
    std::map<std::string, CsvTable> tables;
    /// Rendered with per-panel min-max normalisation.
    std::map<std::string, AttentionMap> figures;
    Json meta = Json::object();

    /// <name>.csv per table, <name>.png per figure, meta.json.
    void write(const std::filesystem::path& dir) const
    {
        std::filesystem::create_directories(dir);
        for (const auto& [name, t] : tables) {
            detail::write_text_file(dir / (name + ".csv"), t.to_csv());
        }
        for (const auto& [name, fig] : figures) {
            save_png(dir / (name + ".png"), normalized_panel(fig));
        }
        detail::write_text_file(dir / "meta.json", meta.dump(2) + "\n");
    }

    /// Values mapped to [0, 1] by the panel's finite min and max; non-finite
    /// cells become 0.
    static AttentionMap normalized_panel(const AttentionMap& m)
    {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (double v : m.values()) {
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        AttentionMap out = m;
        for (double& v : out.values()) {
            v = (std::isfinite(v) && hi > lo) ? (v - lo) / (hi - lo) : 0.0;
        }
        return out;
    }
};

/// Heatmap as an image, each cell a cell_px square block.
inline AttentionMap heatmap_figure(const Heatmap& h, std::size_t cell_px = 32)
{
    const std::size_t rows = std::max<std::size_t>(h.rows(), 1) * cell_px;
    const std::size_t cols = std::max<std::size_t>(h.cols(), 1) * cell_px;
    AttentionMap fig(rows, cols, Frame{static_cast<double>(cols), static_cast<double>(rows)},
                     std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r = 0; r < rows && h.rows(); ++r) {
        for (std::size_t c = 0; c < cols && h.cols(); ++c) {
            fig.at(r, c) = h.mean[r / cell_px][c / cell_px];
        }
    }
    return fig;
}

struct AnalysisOptions {
    std::vector<double> edges = {0.0, 1.0, 2.0, 3.0};
    FixationMapOptions map;
    double edr_eps = 9.0;
    std::size_t topk = 5;
    double alpha = 0.05;
    std::size_t consistency_splits = 10;
    std::uint64_t seed = 0;
    bool figures = true;
};

/// Every analysis the inputs support: per-source tables, corpus-level human
/// analyses when fixations exist, pairwise tables for each pair of sources.
inline AnalysisReport run_analysis(const Corpus& corpus, std::span<const AttentionSource> sources,
                                   const AnalysisOptions& options = {})
{
    AnalysisReport rep;
    for (const auto& src : sources) {
        rep.tables[src.name + "_op_breakdown"] = to_table(op_breakdown(src, corpus));
        if (!src.performance.empty()) {
            rep.tables[src.name + "_accuracy_correlation"] =
                to_table(accuracy_correlation(src, corpus, src.performance, options.alpha));
        }
        const bool multi = std::any_of(src.maps.begin(), src.maps.end(), [](const auto& kv) { return kv.second.size() > 1; });
        if (multi) {
            const Heatmap h = temporal_heatmap(glimpse_maps(src), corpus);
            rep.tables[src.name + "_glimpse_heatmap"] = to_table(h, "glimpse");
            if (options.figures) {
                rep.figures[src.name + "_glimpse_heatmap"] = heatmap_figure(h);
            }
        }
    }
    for (std::size_t i = 0; i < sources.size(); ++i) {
        for (std::size_t j = i + 1; j < sources.size(); ++j) {
            if (!sources[i].correct.empty() && !sources[j].correct.empty()) {
                rep.tables[sources[i].name + "_vs_" + sources[j].name + "_pairwise"] =
                    to_table(pairwise_group_comparison(sources[i], sources[j]));
            }
        }
    }

    if (!corpus.fixations.empty()) {
        TemporalMaps bins;
        for (const auto& [qid, _] : corpus.questions) {
            if (!corpus.fixations_of(qid).empty()) {
                bins[qid] = fixation_bin_maps(corpus, qid, options.edges, SourceKind::HumanTotal, options.map);
            }
        }
        const Heatmap h = temporal_heatmap(bins, corpus);
        rep.tables["human_temporal_heatmap"] = to_table(h, "bin");
        if (options.figures) {
            rep.figures["human_temporal_heatmap"] = heatmap_figure(h);
        }
        const PairAlignment pa = question_pair_alignment(corpus, options.edges, options.map, options.topk);
        rep.tables["question_pair_alignment"] = pairs_table(pa);
        rep.tables["question_pair_alignment_summary"] = summary_table(pa);
        rep.tables["human_pairwise"] = to_table(pairwise_group_comparison(corpus, {options.edr_eps, options.map}));

        const auto fc = grid_fixations(corpus, true, options.map.out_size);
        const auto fi = grid_fixations(corpus, false, options.map.out_size);
        CsvTable consistency{{"measure", "value"}, {}};
        if (!fc.empty() && !fi.empty()) {
            consistency.rows.push_back({"center_bias_cc", format_real(center_bias_similarity(fc, fi, options.map))});
        }
        std::vector<FixationSequence> gridded;
        for (const auto& seq : corpus.fixations) {
            gridded.push_back(to_grid(seq, corpus.scene_of(seq.question_id).frame(), options.map.out_size));
        }
        try {
            const auto s = static_cast<double>(options.map.out_size);
            consistency.rows.push_back(
                {"split_half_auc_judd", format_real(split_half_consistency(gridded, Frame{s, s},
                                                                            options.consistency_splits,
                                                                            options.seed, options.map))});
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::TooFewSubjects) {
                throw;
            }
        }
        rep.tables["consistency"] = consistency;
    }

    rep.meta["config"] = {{"temporal_edges", options.edges},
                          {"map_size", options.map.out_size},
                          {"sigma_fix", options.map.sigma},
                          {"edr_eps", options.edr_eps},
                          {"semantic_topk", options.topk},
                          {"significance_alpha", options.alpha},
                          {"consistency_splits", options.consistency_splits},
                          {"seed", options.seed}};
    Json srcs = Json::array();
    for (const auto& s : sources) {
        srcs.push_back({{"name", s.name}, {"kind", std::string(to_string(s.kind))}, {"questions", s.maps.size()}});
    }
    rep.meta["sources"] = srcs;
    rep.meta["decisions"] = {
        "non-square images are stretched to the square fixation grid",
        "op breakdown reports both the mean of question-level means and the mean pooled over steps",
        "multi-glimpse sources are scored on the mean of their glimpse maps",
        "heatmap CSVs carry raw AiR-E; figures are min-max normalised per panel",
        "human pairs: EDR on the square grid, AUC-Judd averaged over both directions",
        "significance: two-tailed t test on Pearson r, p < alpha"};
    return rep;
}

} // namespace air
