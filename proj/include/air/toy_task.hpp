#pragma once

// Synthetic reasoning task for the toy model, plus its training loop and
// evaluation (operation accuracy, attention KL, AiR-E of the aggregated
// attention, mass on mined negatives, attention-swap ablation).
//
// Every image holds eight objects with distinct categories. The question
// names a target and a partner category (one-hot plus Gaussian noise) and a
// program template; the answer is the target's colour. Two other questions on
// the same image reference the "salient" objects, which become the target's
// mined hard negatives.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "air/attention.hpp"
#include "air/metrics.hpp"
#include "air/program.hpp"
#include "air/random.hpp"
#include "air/scene.hpp"
#include "air/supervision.hpp"
#include "air/toy_model.hpp"

namespace air::toy {

inline const std::vector<std::string>& task_categories()
{
    static const std::vector<std::string> v = {"cat", "dog", "table", "cup", "plate", "chair", "lamp", "book"};
    return v;
}

inline const std::vector<std::string>& task_colors()
{
    static const std::vector<std::string> v = {"red", "blue", "green", "yellow"};
    return v;
}

inline constexpr std::size_t kNumTemplates = 6;

struct TaskConfig {
    std::size_t n_train = 1000;
    std::size_t n_test = 1000;
    double question_noise = 0.25; ///< std of the noise on the category slots of q
    double supervised_fraction = 1.0; ///< share of training questions with step targets
    std::pair<double, double> shadow_overlap{0.15, 0.28}; ///< overlap ratio of the shadowing distractor
    double image_size = 320.0;
    std::uint64_t seed = 0;
};

struct Example {
    Sample sample;
    SceneGraph scene;
    ReasoningProgram program;
    std::vector<StepROIs> rois;
    std::vector<BoundingBox> proposals;
    std::vector<BoundingBox> negatives;
    std::size_t template_id = 0;
};

struct TaskData {
    std::vector<Example> train;
    std::vector<Example> test;
};

/// Dimensions matching the generated features and questions.
inline Dims task_dims()
{
    Dims d;
    d.dq = kNumTemplates + 2 * task_categories().size();
    d.d = task_categories().size() + task_colors().size() + 2;
    d.a = task_colors().size();
    d.k = task_categories().size();
    return d;
}

/// Program lines of a template over target c1 and partner c2.
inline std::vector<RawProgramEntry> template_program(std::size_t id, const std::string& c1, const std::string& c2)
{
    switch (id) {
    case 0: return {{"select " + c1, {}}, {"query color " + c1, {0}}};
    case 1:
        return {{"select " + c2, {}}, {"relate near " + c1, {0}}, {"verify color " + c1, {1}},
                {"query color " + c1, {2}}};
    case 2:
        return {{"select " + c1, {}}, {"select " + c2, {}}, {"compare color " + c1 + " and " + c2, {0, 1}},
                {"verify color " + c1, {0}}};
    case 3: return {{"select " + c2, {}}, {"select " + c1, {}}, {"or", {0, 1}}, {"query color " + c1, {2}}};
    case 4: return {{"select " + c1, {}}, {"filter large", {0}}, {"query color " + c1, {1}}};
    case 5: return {{"select " + c1, {}}, {"select " + c2, {}}, {"and", {0, 1}}, {"query color " + c1, {2}}};
    default: break;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown template " + std::to_string(id));
}

namespace detail {

inline Example make_example(Rng& rng, std::size_t index, const TaskConfig& cfg)
{
    const auto& cats = task_categories();
    const auto& colors = task_colors();
    const std::size_t n = cats.size();

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    // perm[0] target, perm[1] partner, perm[2..3] salient, rest plain.
    const std::size_t tmpl = rng.index(kNumTemplates);

    Example ex;
    ex.template_id = tmpl;
    ex.scene.image_id = "img" + std::to_string(index);
    ex.scene.width = cfg.image_size;
    ex.scene.height = cfg.image_size;
    std::vector<std::size_t> cells(9);
    std::iota(cells.begin(), cells.end(), 0);
    rng.shuffle(std::span<std::size_t>(cells));
    const double cell = cfg.image_size / 3.0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t slot = 0; slot < n; ++slot) {
        const std::size_t role = order[slot];
        SceneObject o;
        o.id = "o" + std::to_string(slot);
        o.category = cats[perm[role]];
        o.attributes.insert(colors[rng.index(colors.size())]);
        const bool large = (tmpl == 4 && role == 0) || rng.bernoulli(0.5);
        o.attributes.insert(large ? "large" : "small");
        if (role == 2 || role == 3) {
            o.attributes.insert("salient");
        }
        const double w = rng.uniform(0.55, 0.85) * cell;
        const double h = rng.uniform(0.55, 0.85) * cell;
        const double cx = static_cast<double>(cells[slot] % 3) * cell;
        const double cy = static_cast<double>(cells[slot] / 3) * cell;
        o.box = {cx + rng.uniform(0.0, cell - w), cy + rng.uniform(0.0, cell - h), w, h};
        ex.scene.objects.push_back(std::move(o));
    }
    // The first salient object shadows the target: same size, overlap ratio below tau.
    {
        auto role_of = [&](std::size_t role) -> SceneObject& {
            return ex.scene.objects[static_cast<std::size_t>(std::find(order.begin(), order.end(), role) - order.begin())];
        };
        const BoundingBox t = role_of(0).box;
        const double shift = (1.0 - rng.uniform(cfg.shadow_overlap.first, cfg.shadow_overlap.second)) * t.w;
        const double x = t.x + t.w + shift <= cfg.image_size ? t.x + shift : t.x - shift;
        role_of(2).box = {x, t.y, t.w, t.h};
    }
    for (std::size_t i = 0; i < n; ++i) {
        ex.scene.objects[i].relations.push_back({"near", ex.scene.objects[(i + 1) % n].id});
    }

    const std::string& c1 = cats[perm[0]];
    const std::string& c2 = cats[perm[1]];
    const std::string qid = "q" + std::to_string(index);
    ex.program = parse_program(qid, template_program(tmpl, c1, c2));
    const CoOccurrenceTable cooc;
    ex.rois = resolve_rois(ex.program, ex.scene, cooc);

    for (const auto& o : ex.scene.objects) {
        const double jx = rng.uniform(-3.0, 3.0);
        const double jy = rng.uniform(-3.0, 3.0);
        ex.proposals.push_back({std::max(0.0, o.box.x + jx), std::max(0.0, o.box.y + jy), o.box.w, o.box.h});
    }
    const ProposalSet proposals{ex.proposals, std::nullopt};

    // Other questions on the image refer to the salient objects.
    std::map<std::string, std::vector<StepROIs>> image_rois;
    image_rois[qid] = ex.rois;
    const std::string& s1 = cats[perm[2]];
    const std::string& s2 = cats[perm[3]];
    for (const auto& [other, lines] :
         {std::pair{qid + "_a", template_program(0, s1, s2)}, std::pair{qid + "_b", template_program(5, s2, s1)}}) {
        image_rois[other] = resolve_rois(parse_program(other, lines), ex.scene, cooc);
    }
    std::vector<BoundingBox> positives;
    for (const auto& step : ex.rois) {
        for (std::size_t idx : step.combined()) {
            positives.push_back(ex.scene.objects[idx].box);
        }
    }
    for (const auto& m : mine_hard_negatives(qid, image_rois, ex.scene, positives)) {
        ex.negatives.push_back(m.box);
    }

    Sample& s = ex.sample;
    const Dims d = task_dims();
    s.q.assign(d.dq, 0.0);
    s.q[tmpl] = 1.0;
    for (std::size_t slot = 0; slot < 2; ++slot) {
        double* cat_slot = &s.q[kNumTemplates + slot * n];
        cat_slot[perm[slot]] = 1.0;
        for (std::size_t c = 0; c < n; ++c) {
            cat_slot[c] += rng.normal(0.0, cfg.question_noise);
        }
    }
    s.v.assign(d.k * d.d, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& o = ex.scene.objects[k];
        double* row = &s.v[k * d.d];
        row[static_cast<std::size_t>(std::find(cats.begin(), cats.end(), o.category) - cats.begin())] = 1.0;
        for (std::size_t c = 0; c < colors.size(); ++c) {
            if (o.attributes.count(colors[c])) {
                row[n + c] = 1.0;
                if (o.category == c1) {
                    s.answer = c;
                }
            }
        }
        row[n + colors.size()] = o.attributes.count("large") ? 1.0 : 0.0;
        row[n + colors.size() + 1] = o.attributes.count("salient") ? 1.0 : 0.0;
    }
    for (const auto& step : ex.program.steps) {
        s.ops.push_back(op_index(step.triplet.op));
    }
    for (const auto& r : ex.rois) {
        const auto t = gt_attention(r, ex.scene, proposals);
        s.targets.push_back(t.all_zero ? std::vector<double>{} : t.weights);
    }
    s.negative = negative_weights(ex.negatives, proposals);
    return ex;
}

} // namespace detail

inline TaskData make_task(const TaskConfig& cfg)
{
    Rng rng(cfg.seed);
    TaskData out;
    for (std::size_t i = 0; i < cfg.n_train + cfg.n_test; ++i) {
        auto ex = detail::make_example(rng, i, cfg);
        const bool annotated = rng.uniform(0.0, 1.0) < cfg.supervised_fraction;
        if (i < cfg.n_train && !annotated) {
            for (auto& t : ex.sample.targets) {
                t.clear();
            }
        }
        (i < cfg.n_train ? out.train : out.test).push_back(std::move(ex));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalStats {
    double answer_accuracy = 0.0;
    double op_accuracy = 0.0;     ///< over program steps plus the end step
    double mean_kl = 0.0;         ///< over supervised steps
    double aire = 0.0;            ///< mean over examples of mean step AiR-E of alpha^r
    double negative_mass = 0.0;   ///< mean alpha^r mass on proposals matching a mined negative (IoU >= 0.5)
};

namespace detail {

inline std::vector<StepCache> trace(const Sample& s, const Params& p)
{
    const Dims& d = p.dims();
    const auto u = project_features(s.v, p);
    std::vector<double> h = matvec(p.mat(Block::Wq), s.q);
    std::vector<double> x(d.e, 0.0);
    std::vector<StepCache> out;
    for (std::size_t t = 0; t < unroll_length(s, d); ++t) {
        out.push_back(forward_step(x, h, u, p));
        h = out.back().h;
        x = matvec(p.mat(Block::Wop), out.back().r);
    }
    return out;
}

inline double aire_of_attention(std::span<const double> alpha, const Example& ex, std::size_t render_size)
{
    const AttentionMap map = proposals_to_map(alpha, ex.proposals, ex.scene.frame(), render_size);
    const QuestionScore q = score_question(map, ex.scene, ex.program, ex.rois);
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& s : q.steps) {
        if (s.aire) {
            total += *s.aire;
            ++n;
        }
    }
    return n == 0 ? 0.0 : total / static_cast<double>(n);
}

} // namespace detail

inline EvalStats evaluate(const Params& p, std::span<const Example> data, std::size_t render_size = 64)
{
    EvalStats st;
    std::size_t op_total = 0, op_hit = 0, kl_n = 0, neg_n = 0;
    for (const auto& ex : data) {
        const Sample& s = ex.sample;
        const auto steps = detail::trace(s, p);
        for (std::size_t t = 0; t < steps.size(); ++t) {
            const std::size_t label = t < s.ops.size() ? s.ops[t] : kEndToken;
            op_hit += detail::argmax(steps[t].r) == label;
            ++op_total;
            if (t < s.ops.size() && !s.targets[t].empty()) {
                st.mean_kl += kl_attention_loss(s.targets[t], steps[t].alpha);
                ++kl_n;
            }
        }
        const Inference inf = infer(s, p);
        st.answer_accuracy += detail::argmax(inf.answer) == s.answer;
        st.aire += detail::aire_of_attention(inf.alpha_r, ex, render_size);
        if (!ex.negatives.empty()) {
            for (std::size_t k = 0; k < ex.proposals.size(); ++k) {
                const bool inside = std::any_of(ex.negatives.begin(), ex.negatives.end(), [&](const BoundingBox& b) {
                    return iou(b, ex.proposals[k]) >= 0.5;
                });
                st.negative_mass += inside ? inf.alpha_r[k] : 0.0;
            }
            ++neg_n;
        }
    }
    const auto n = static_cast<double>(std::max<std::size_t>(data.size(), 1));
    st.answer_accuracy /= n;
    st.aire /= n;
    st.op_accuracy = op_total ? static_cast<double>(op_hit) / static_cast<double>(op_total) : 0.0;
    st.mean_kl = kl_n ? st.mean_kl / static_cast<double>(kl_n) : 0.0;
    st.negative_mass = neg_n ? st.negative_mass / static_cast<double>(neg_n) : 0.0;
    return st;
}

enum class SwapMode { Model, Random, GroundTruth };

inline std::string_view to_string(SwapMode m)
{
    switch (m) {
    case SwapMode::Model: return "model";
    case SwapMode::Random: return "random";
    case SwapMode::GroundTruth: return "ground_truth";
    }
    return "?";
}

/// Answer accuracy with alpha^r taken from the model, replaced by uniform
/// random draws (normalised), or by the mean of the ground-truth step targets.
inline double attention_swap_eval(const Params& p, std::span<const Example> data, SwapMode mode, std::uint64_t seed = 0)
{
    Rng rng(seed);
    const std::size_t k = p.dims().k;
    std::size_t hits = 0;
    for (const auto& ex : data) {
        const Sample& s = ex.sample;
        std::vector<double> alpha(k, 0.0);
        if (mode == SwapMode::Model) {
            alpha = infer(s, p).alpha_r;
        } else if (mode == SwapMode::Random) {
            double total = 0.0;
            for (double& a : alpha) {
                total += a = rng.uniform();
            }
            for (double& a : alpha) {
                a /= total;
            }
        } else {
            std::size_t n = 0;
            for (const auto& t : s.targets) {
                if (t.empty()) {
                    continue;
                }
                for (std::size_t j = 0; j < k; ++j) {
                    alpha[j] += t[j];
                }
                ++n;
            }
            for (double& a : alpha) {
                a = n ? a / static_cast<double>(n) : 1.0 / static_cast<double>(k);
            }
        }
        hits += detail::argmax(predict_answer(alpha, s.v, s.q, p)) == s.answer;
    }
    return data.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    ObjectiveConfig objective;
    double lr = 0.05;
    std::size_t epochs = 40;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    std::size_t render_size = 64;
    bool record_curves = true;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0; ///< mean per-sample objective over the epoch's batches
    EvalStats stats;   ///< on the training set after the epoch
};

struct TrainResult {
    Params params;
    std::vector<EpochRecord> curves;
};

/// Plain minibatch gradient descent with a fixed step size; batches are
/// reshuffled each epoch from the seed. Throws Divergence on a non-finite loss.
inline TrainResult train_toy(std::span<const Example> data, const Params& p0, const TrainConfig& cfg)
{
    TrainResult out{p0, {}};
    if (data.empty() || cfg.batch_size == 0) {
        throw Error(ErrorKind::InvalidArgument, "training needs data and a positive batch size");
    }
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<Sample> batch;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(data[order[i]].sample);
            }
            LossAndGrads lg;
            try {
                lg = loss_and_grads(batch, out.params, cfg.objective);
            } catch (const Error& e) {
                // Overflowed parameters surface as invalid distributions in the forward pass.
                if (e.kind() != ErrorKind::NotADistribution) {
                    throw;
                }
                throw Error(ErrorKind::Divergence, "attention became invalid at epoch " + std::to_string(epoch));
            }
            if (!std::isfinite(lg.loss.total) || !lg.grads.finite()) {
                throw Error(ErrorKind::Divergence, "loss became non-finite at epoch " + std::to_string(epoch));
            }
            epoch_loss += lg.loss.total;
            const double scale = cfg.lr / static_cast<double>(batch.size());
            auto w = out.params.values();
            const auto g = lg.grads.values();
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] -= scale * g[i];
            }
            if (!out.params.finite()) {
                throw Error(ErrorKind::Divergence, "parameters became non-finite at epoch " + std::to_string(epoch));
            }
        }
        if (cfg.record_curves) {
            out.curves.push_back(
                {epoch, epoch_loss / static_cast<double>(data.size()), evaluate(out.params, data, cfg.render_size)});
        }
    }
    return out;
}

} // namespace air::toy
