// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "air/air.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "toy_oracle.hpp"

using namespace air;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Checks {
public:
    void expect(bool ok, const std::string& what)
    {
        if (!ok) {
            pass_ = false;
            if (failures_.size() < 8) {
                failures_.push_back(what);
            }
        }
    }

    void near(double got, double want, double tol, const std::string& what)
    {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s: got %.9g want %.9g", what.c_str(), got, want);
        expect(std::abs(got - want) <= tol, buf);
    }

    Outcome outcome(std::string detail) const
    {
        for (const auto& f : failures_) {
            detail += "; " + f;
        }
        return {pass_, detail};
    }

private:
    bool pass_ = true;
    std::vector<std::string> failures_;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

AttentionMap random_map(Rng& rng, std::size_t rows, std::size_t cols, const Frame& frame)
{
    AttentionMap m(rows, cols, frame);
    for (double& v : m.values()) {
        v = rng.uniform();
    }
    return m;
}

FixationRecord at_cell(double r, double c) { return {c + 0.5, r + 0.5, 0.0, "s", std::nullopt}; }

AttentionMap grid(std::size_t rows, std::size_t cols, std::vector<double> v)
{
    return AttentionMap(rows, cols, Frame{static_cast<double>(cols), static_cast<double>(rows)}, std::move(v));
}

// ---------------------------------------------------------------------------

Outcome standardization_identities()
{
    Checks c;
    Rng rng(101);
    double worst_mu = 0.0, worst_sigma = 0.0, worst_full = 0.0, worst_affine = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t rows = 4 + rng.index(60);
        const std::size_t cols = 4 + rng.index(60);
        const Frame frame{rng.uniform(50, 800), rng.uniform(50, 800)};
        const AttentionMap m = random_map(rng, rows, cols, frame);
        const AttentionMap s = standardize(m);
        const Moments mo = moments(s.values());
        worst_mu = std::max(worst_mu, std::abs(mo.mean));
        worst_sigma = std::max(worst_sigma, std::abs(mo.stddev - 1.0));
        worst_full = std::max(worst_full, std::abs(aire_box(s, {0, 0, frame.width, frame.height})));

        SceneGraph scene = gen::random_scene(rng, "s");
        scene.width = frame.width;
        scene.height = frame.height;
        for (auto& o : scene.objects) {
            const double w = rng.uniform(2, frame.width / 2);
            const double h = rng.uniform(2, frame.height / 2);
            o.box = {rng.uniform(0, frame.width - w), rng.uniform(0, frame.height - h), w, h};
        }
        StepROIs rois{0, {{}, {}}, false};
        for (std::size_t i = 0; i < scene.objects.size(); ++i) {
            rois.roi_sets[i % 2].push_back(i);
        }
        if (rois.roi_sets[1].empty()) {
            rois.roi_sets.pop_back();
        }
        const double a = rng.uniform(0.01, 100.0);
        const double b = rng.uniform(-50.0, 50.0);
        AttentionMap affine = m;
        for (double& v : affine.values()) {
            v = a * v + b;
        }
        const AtomicOp op = kAllOps[rng.index(kNumOps)];
        const auto x = aire_step(m, scene, rois, op);
        const auto y = aire_step(affine, scene, rois, op);
        c.expect(x.aire.has_value() && y.aire.has_value(), "step unexpectedly missing");
        if (x.aire && y.aire) {
            worst_affine = std::max(worst_affine, std::abs(*x.aire - *y.aire));
        }
    }
    c.expect(worst_mu < 1e-9, "mean");
    c.expect(worst_sigma < 1e-9, "stddev");
    c.expect(worst_full < 1e-9, "full-frame box");
    c.expect(worst_affine < 1e-9, "affine invariance");
    return c.outcome(fmt("max |mu| %.2e, max |sigma-1| %.2e, max |full| %.2e, max affine diff %.2e", worst_mu,
                         worst_sigma, worst_full, worst_affine));
}

Outcome resolver_equivalence()
{
    Checks c;
    Rng rng(202);
    std::vector<SceneGraph> pool;
    for (int i = 0; i < 40; ++i) {
        pool.push_back(gen::random_scene(rng, "c" + std::to_string(i)));
    }
    auto cooc = build_cooccurrence(pool);
    cooc.add("unicorn", "cat", 4);
    cooc.add("unicorn", "table", 4);
    cooc.add("unicorn", "lamp", 2);
    cooc.add("unicorn", "book", 1);
    std::size_t fallbacks = 0, steps = 0, mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto scene = gen::random_scene(rng, "s" + std::to_string(trial));
        const auto program = gen::random_program(rng, "q" + std::to_string(trial));
        const std::size_t k = 1 + rng.index(20);
        const auto rois = resolve_rois(program, scene, cooc, {k, {}, false});
        if (!oracle::equal(oracle::as_id_sets(rois, scene), oracle::resolve(program, scene, cooc, k))) {
            ++mismatches;
            c.expect(false, "mismatch at trial " + std::to_string(trial));
        }
        for (const auto& r : rois) {
            fallbacks += r.fallback_used ? 1 : 0;
            ++steps;
        }
    }
    c.expect(fallbacks > 0, "no fallback case exercised");
    return c.outcome(fmt("1000 pairs, %.0f steps, %.0f fallback steps, %.0f mismatches", static_cast<double>(steps),
                         static_cast<double>(fallbacks), static_cast<double>(mismatches)));
}

Outcome correct_vs_incorrect()
{
    Checks c;
    SynthConfig cfg;
    cfg.n_images = 50;
    cfg.questions_per_image = 4;
    cfg.fixations = false;
    cfg.proposals = false;
    cfg.sources.clear();
    cfg.seed = 303;
    const SynthCorpus sc = make_synthetic_corpus(cfg);
    const Corpus& corpus = sc.corpus;
    c.expect(corpus.questions.size() == 200, "corpus size");

    std::map<AtomicOp, std::vector<std::pair<double, double>>> pairs;
    for (const auto& [qid, q] : corpus.questions) {
        const auto& scene = corpus.scene_of(q);
        const auto roi = score_question(synth_attention(q, scene, 1.0, 64), scene, q.program, q.rois);
        const auto off = score_question(synth_attention(q, scene, 0.0, 64), scene, q.program, q.rois);
        for (const auto& [op, v] : roi.by_op) {
            const auto it = off.by_op.find(op);
            if (it != off.by_op.end()) {
                pairs[op].push_back({v, it->second});
            }
        }
    }
    std::string detail;
    for (AtomicOp op : kAllOps) {
        const auto& p = pairs[op];
        c.expect(!p.empty(), std::string("no scored ") + std::string(to_string(op)) + " steps");
        if (p.empty()) {
            continue;
        }
        double sum_roi = 0.0, sum_off = 0.0;
        std::size_t wins = 0;
        for (const auto& [a, b] : p) {
            sum_roi += a;
            sum_off += b;
            wins += a > b ? 1 : 0;
        }
        const double n = static_cast<double>(p.size());
        const double rate = static_cast<double>(wins) / n;
        c.expect(sum_roi > sum_off, std::string(to_string(op)) + " mean");
        c.expect(rate >= 0.95, std::string(to_string(op)) + fmt(" win rate %.3f", rate));
        detail += std::string(detail.empty() ? "" : ", ") + std::string(to_string(op)) +
                  fmt(" %.2f>%.2f win %.2f (n=%.0f)", sum_roi / n, sum_off / n, rate, n);
    }
    return c.outcome(detail);
}

Outcome metric_identities()
{
    Checks c;
    // standardize and aire_box
    const auto a = standardize(grid(1, 2, {0, 2}));
    c.near(a.at(0, 0), -1.0, 1e-12, "standardize [0,2] low");
    c.near(a.at(0, 1), 1.0, 1e-12, "standardize [0,2] high");
    const auto b = standardize(grid(2, 2, {1, 1, 1, 3}));
    c.near(b.at(0, 0), -0.5774, 1e-4, "standardize [1,1,1,3] low");
    c.near(b.at(1, 1), 1.7321, 1e-4, "standardize [1,1,1,3] high");
    const auto flat = standardize(AttentionMap(3, 3, Frame{3, 3}, 4.2));
    for (double v : flat.values()) {
        c.expect(v == 0.0, "constant map standardizes to zero");
    }
    c.near(aire_box(b, {0, 0, 2, 2}), 0.0, 1e-9, "full-frame aire_box");
    c.near(aire_box(b, {1, 1, 1, 1}), 1.7321, 1e-4, "single-cell aire_box");

    // aggregation rules on directly standardized values
    SceneGraph strip{"img", 4, 1, {}};
    for (int i = 0; i < 4; ++i) {
        strip.objects.push_back({"o" + std::to_string(i), "x", {}, {static_cast<double>(i), 0, 1, 1}, {}});
    }
    const AttentionMap s = grid(1, 4, {0.5, 2.0, 1.0, 3.0});
    c.near(*aire_step_standardized(s, strip, {0, {{0, 1}}, false}, AtomicOp::Select).aire, 2.0, 0, "select max");
    c.near(*aire_step_standardized(s, strip, {0, {{2}, {3}}, false}, AtomicOp::Relate).aire, 2.0, 0, "relate mean");
    c.near(*aire_step_standardized(s, strip, {0, {{0}, {1}}, false}, AtomicOp::Or).aire, 2.0, 0, "or max");

    // nss
    const auto m4 = grid(2, 2, {0.1, 0.2, 0.3, 0.4});
    const std::vector<FixationRecord> top = {at_cell(1, 1)};
    const std::vector<FixationRecord> bottom = {at_cell(0, 0)};
    const auto peak = grid(2, 2, {1, 1, 1, 3});
    c.near(nss(peak, top), 1.7321, 1e-4, "nss at peak");
    c.near(nss(peak, std::vector<FixationRecord>{at_cell(0, 0), at_cell(0, 1), at_cell(1, 0), at_cell(1, 1)}), 0.0,
           1e-12, "nss over every cell");

    // cc
    Rng rng(404);
    const auto r = random_map(rng, 8, 8, Frame{8, 8});
    AttentionMap lin = r, neg = r;
    for (double& v : lin.values()) {
        v = 3 * v + 1;
    }
    for (double& v : neg.values()) {
        v = -v;
    }
    c.near(cc(r, lin), 1.0, 1e-12, "cc affine copy");
    c.near(cc(r, neg), -1.0, 1e-12, "cc negated copy");

    // auc_judd
    c.near(auc_judd(m4, top), 0.875, 1e-12, "auc_judd top cell");
    c.near(auc_judd(m4, bottom), 0.5, 1e-12, "auc_judd bottom cell");
    c.near(auc_judd(AttentionMap(2, 2, Frame{2, 2}, 0.7), top), 0.5, 1e-12, "auc_judd constant map");

    // spearman
    const std::vector<double> x = {1, 2, 2, 3}, y = {1, 3, 2, 2}, up = {1, 2, 3, 4}, down = {4, 3, 2, 1};
    c.near(spearman(up, up), 1.0, 1e-12, "spearman identical");
    c.near(spearman(up, down), -1.0, 1e-12, "spearman reversed");
    c.near(spearman(x, y), 0.5, 1e-12, "spearman with ties");
    c.near(spearman(x, y), oracle::correlation(oracle::brute_ranks(x), oracle::brute_ranks(y)), 1e-9,
           "spearman vs rank oracle");

    // edr
    const std::vector<FixationRecord> seq = {at_cell(0, 0), at_cell(50, 50), at_cell(10, 100)};
    std::vector<FixationRecord> far = seq, near = seq;
    for (auto& f : far) {
        f.x += 200;
    }
    near[1].x += 9.0;
    c.near(edr(seq, seq), 0.0, 0, "edr identical");
    c.near(edr(seq, std::span<const FixationRecord>{}), 1.0, 0, "edr against empty");
    c.near(edr(seq, far), 1.0, 0, "edr disjoint");
    c.near(edr(seq, near), 0.0, 0, "edr within eps");

    // semantic alignment
    SceneGraph scene{"img", 10, 1, {}};
    std::vector<double> va(10), vb(10), vc(10);
    for (int i = 0; i < 10; ++i) {
        scene.objects.push_back(
            {"o" + std::to_string(i), "c" + std::to_string(i), {}, {static_cast<double>(i), 0, 1, 1}, {}});
        va[i] = 10 - i;
        vb[i] = i;
        vc[i] = (i < 3 || (i >= 5 && i < 7)) ? 10.0 - i : 0.1 * i;
    }
    c.near(semantic_alignment(grid(1, 10, va), grid(1, 10, va), scene).iou, 1.0, 0, "semantic iou identical");
    c.near(semantic_alignment(grid(1, 10, va), grid(1, 10, vb), scene).iou, 0.0, 0, "semantic iou disjoint");
    c.near(semantic_alignment(grid(1, 10, va), grid(1, 10, vc), scene).iou, 3.0 / 7.0, 1e-12, "semantic iou 3/7");

    // pearson
    std::vector<double> px(30), py(30), plin(30);
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = rng.normal();
        py[i] = rng.normal();
        plin[i] = 2 * px[i] + 1;
    }
    c.near(pearson(px, plin), 1.0, 1e-12, "pearson linear");
    c.near(pearson(px, py), oracle::correlation(px, py), 1e-12, "pearson vs oracle");

    // iou, overlap ratio, gt_attention
    const BoundingBox unit{0, 0, 1, 1};
    c.near(iou(unit, unit), 1.0, 0, "iou identical");
    c.near(iou(unit, {2, 2, 1, 1}), 0.0, 0, "iou disjoint");
    c.near(iou(unit, {0.5, 0, 1, 1}), 1.0 / 3.0, 1e-9, "iou half offset");
    const BoundingBox positive{0, 0, 20, 20};
    c.expect(overlap_ratio(positive, positive) >= 0.3, "identical candidate rejected");
    c.expect(overlap_ratio({30, 30, 10, 10}, positive) < 0.3, "disjoint candidate accepted");
    c.near(overlap_ratio({15, 15, 10, 10}, positive), 0.25, 1e-12, "overlap ratio 25/100");
    c.expect(overlap_ratio({15, 15, 10, 10}, positive) < 0.3, "partial candidate accepted");

    SceneGraph one{"img", 100, 100, {{"r", "thing", {}, {0, 0, 10, 10}, {}}}};
    const StepROIs rois{0, {{0}}, false};
    const auto exact = gt_attention(rois, one, {{{0, 0, 10, 10}, {50, 50, 5, 5}, {80, 0, 5, 5}}, {}});
    c.expect(exact.weights == std::vector<double>{1, 0, 0}, "gt_attention exact match");
    const auto mixed = gt_attention(rois, one, {{{0, 0, 10, 5}, {0, 0, 5, 5}}, {}});
    c.near(mixed.weights[0], 2.0 / 3.0, 1e-9, "gt_attention 2/3");
    c.near(mixed.weights[1], 1.0 / 3.0, 1e-9, "gt_attention 1/3");

    // negative map
    const std::vector<BoundingBox> box = {{0, 0, 50, 50}};
    const auto nm = negative_map(box, Frame{100, 100}, 10);
    c.near(nm.map.sum(), 1.0, 1e-12, "negative map sums to 1");
    c.near(nm.map.at(0, 0), 1.0 / 25.0, 1e-12, "negative map uniform in box");
    c.near(negative_map(std::span<const BoundingBox>{}, Frame{100, 100}, 10).map.sum(), 0.0, 0, "empty negative map");

    // losses
    const std::vector<double> half = {0.5, 0.5}, skew = {0.9, 0.1};
    c.near(kl_attention_loss(half, half), 0.0, 1e-15, "kl identical");
    c.near(kl_attention_loss(half, skew), 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1), 1e-12, "kl value");
    c.near(kl_attention_loss(half, skew), 0.5108, 1e-4, "kl 0.5108");
    c.near(kl_attention_loss(std::vector<double>{0, 1}, skew), -std::log(0.1), 1e-12, "kl one-hot");
    const std::vector<double> uniform4(4, 0.25), onehot4 = {0, 0, 1, 0};
    c.near(neg_ce_loss(std::vector<double>(4, 0.0), uniform4), 0.0, 0, "neg ce zero map");
    c.near(neg_ce_loss(onehot4, uniform4), -1.3863, 1e-4, "neg ce log 1/4");
    c.expect(neg_ce_loss(onehot4, std::vector<double>{0.3, 0.3, 0.1, 0.3}) < neg_ce_loss(onehot4, uniform4),
             "neg ce monotone");
    const LossConfig zero{0, 0}, ones{1, 1};
    const std::vector<double> l2 = {2}, l3 = {3};
    c.near(airm_total_loss(1, l2, l3, zero), 1.0, 0, "airm total theta=phi=0");
    c.near(airm_total_loss(1, l2, l3, ones), 6.0, 0, "airm total (1,2,3)");
    c.near(airc_total_loss(1, 0.5, -0.2, ones), 1.3, 1e-12, "airc total (1,0.5,-0.2)");
    return c.outcome("hand examples for maps, metrics, geometry, targets and losses");
}

Outcome gradient_check()
{
    Checks c;
    Rng rng(505);
    const toy::Dims d = toy::task_dims();
    const toy::ObjectiveConfig cfg{{0.8, 1.2}, 0.5};
    std::size_t checked = 0;
    double worst = 0.0;
    for (int instance = 0; instance < 24; ++instance) {
        const auto p = toy::Params::init(d, 1000 + instance);
        const auto s = gen::random_toy_sample(rng, d);
        const auto lg = toy::loss_and_grads(std::span<const toy::Sample>(&s, 1), p, cfg);
        oracle::ToyWeights<long double> w(p);
        for (int k = 0; k < 45; ++k) {
            const std::size_t i = rng.index(p.size());
            const long double base = w.flat(i);
            const long double eps = 1e-5L;
            w.flat(i) = base + eps;
            const long double up = oracle::toy_loss(w, s, cfg);
            w.flat(i) = base - eps;
            const long double down = oracle::toy_loss(w, s, cfg);
            w.flat(i) = base;
            const double numeric = static_cast<double>((up - down) / (2 * eps));
            const double analytic = lg.grads.values()[i];
            const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
            const double rel = std::abs(numeric - analytic) / scale;
            worst = std::max(worst, rel);
            c.expect(rel < 1e-4, "coordinate " + std::to_string(i) + fmt(" rel %.3e", rel));
            ++checked;
        }
    }
    c.expect(checked >= 1000, "coordinate count");
    return c.outcome(fmt("%.0f coordinates over 24 instances, max rel error %.3e", static_cast<double>(checked), worst));
}

// Trained toy models shared by the toy criteria; keyed by seed and objective.
struct ToyRun {
    toy::TaskData task;
    std::map<std::string, toy::Params> models;
};

std::map<std::uint64_t, ToyRun>& toy_runs()
{
    static std::map<std::uint64_t, ToyRun> runs;
    return runs;
}

const toy::TaskData& toy_task(std::uint64_t seed)
{
    auto& run = toy_runs()[seed];
    if (run.task.train.empty()) {
        toy::TaskConfig tc;
        tc.seed = seed;
        run.task = toy::make_task(tc);
    }
    return run.task;
}

const toy::Params& toy_model(std::uint64_t seed, const std::string& name, const toy::ObjectiveConfig& objective)
{
    const auto& task = toy_task(seed);
    auto& models = toy_runs()[seed].models;
    auto it = models.find(name);
    if (it == models.end()) {
        toy::TrainConfig cfg;
        cfg.objective = objective;
        cfg.seed = seed;
        cfg.record_curves = false;
        it = models.emplace(name, toy::train_toy(task.train, toy::Params::init(toy::task_dims(), seed), cfg).params)
                 .first;
    }
    return it->second;
}

const toy::ObjectiveConfig kSupervised{{1.0, 1.0}, 0.0};
const toy::ObjectiveConfig kUnsupervised{{0.0, 0.0}, 0.0};
const toy::ObjectiveConfig kCorrectness{{1.0, 1.0}, 0.5};

Outcome toy_supervision_effect()
{
    Checks c;
    const std::uint64_t seed = 1;
    const auto& task = toy_task(seed);
    c.expect(task.train.size() >= 500 && task.test.size() >= 500, "sample count");
    const auto sup = toy::evaluate(toy_model(seed, "supervised", kSupervised), task.test);
    const auto base = toy::evaluate(toy_model(seed, "unsupervised", kUnsupervised), task.test);
    c.expect(sup.op_accuracy > 0.95, "operation accuracy");
    c.expect(sup.aire >= base.aire + 0.2 * std::abs(base.aire), "AiR-E gain");
    c.expect(sup.answer_accuracy >= base.answer_accuracy, "answer accuracy");
    return c.outcome(fmt("op acc %.4f, AiR-E %.4f vs %.4f, answer acc %.4f", sup.op_accuracy, sup.aire, base.aire,
                         sup.answer_accuracy) +
                     fmt(" vs %.4f", base.answer_accuracy));
}

Outcome toy_correctness_effect()
{
    Checks c;
    double mass_plain = 0.0, mass_neg = 0.0, acc_plain = 0.0, acc_neg = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto& task = toy_task(seed);
        const auto plain = toy::evaluate(toy_model(seed, "supervised", kSupervised), task.test);
        const auto neg = toy::evaluate(toy_model(seed, "correctness", kCorrectness), task.test);
        mass_plain += plain.negative_mass / 5;
        mass_neg += neg.negative_mass / 5;
        acc_plain += plain.answer_accuracy / 5;
        acc_neg += neg.answer_accuracy / 5;
    }
    c.expect(mass_neg <= 0.7 * mass_plain, "negative mass reduction");
    c.expect(acc_neg >= acc_plain, "answer accuracy");
    const double reduction = mass_plain > 0 ? 1.0 - mass_neg / mass_plain : 0.0;
    return c.outcome(fmt("5-seed means: negative mass %.4f -> %.4f (-%.1f%%)", mass_plain, mass_neg, 100 * reduction) +
                     fmt(", answer acc %.4f -> %.4f", acc_plain, acc_neg));
}

Outcome attention_swap_ordering()
{
    Checks c;
    std::size_t ordered = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto& task = toy_task(seed);
        const auto& p = toy_model(seed, "supervised", kSupervised);
        const double gt = toy::attention_swap_eval(p, task.test, toy::SwapMode::GroundTruth);
        const double model = toy::attention_swap_eval(p, task.test, toy::SwapMode::Model);
        const double random = toy::attention_swap_eval(p, task.test, toy::SwapMode::Random, seed);
        ordered += (gt > model && model > random) ? 1 : 0;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s%.3f>%.3f>%.3f", detail.empty() ? "" : " ", gt, model, random);
        detail += buf;
    }
    c.expect(ordered >= 3, "ordering held on a minority of seeds");
    return c.outcome("gt>model>random on " + std::to_string(ordered) + "/5 seeds: " + detail);
}

Outcome consistency_machinery()
{
    Checks c;
    const Frame frame{256, 256};
    const auto shared = synth_cohort(true, 20, 14, 10, 256.0, 10.0, 909);
    const auto indep = synth_cohort(false, 20, 14, 10, 256.0, 10.0, 910);
    const double s = split_half_consistency(shared, frame);
    const double u = split_half_consistency(indep, frame);
    c.expect(s > 0.85, "shared cohort");
    c.expect(std::abs(u - 0.5) <= 0.1, "independent cohort");
    return c.outcome(fmt("shared %.4f, independent uniform %.4f", s, u));
}

Outcome throughput()
{
    Checks c;
    SynthConfig cfg;
    cfg.n_images = 2000;
    cfg.questions_per_image = 5;
    cfg.fixations = false;
    cfg.proposals = false;
    cfg.sources.clear();
    cfg.seed = 1010;
    const SynthCorpus sc = make_synthetic_corpus(cfg);
    c.expect(sc.corpus.questions.size() == 10000, "question count");

    const auto t0 = std::chrono::steady_clock::now();
    const auto scores = score_questions(
        sc.corpus,
        [&](const Question& q) {
            const AttentionMap m = synth_attention(q, sc.corpus.scene_of(q), 0.8, 256);
            if (m.rows() != 256 || m.cols() != 256) {
                throw Error(ErrorKind::InvalidArgument, "unexpected map size");
            }
            return m;
        },
        4);
    const auto tables = score_tables("synthetic", scores);
    const auto out = std::filesystem::temp_directory_path() / "air_acceptance_throughput";
    std::filesystem::create_directories(out);
    detail::write_text_file(out / "aire_steps.csv", tables.steps.to_csv());
    detail::write_text_file(out / "aire_summary.csv", tables.summary.to_csv());
    std::filesystem::remove_all(out);
    const double elapsed = seconds_since(t0);
    c.expect(scores.size() == 10000, "scored count");
    c.expect(elapsed < 60.0, "runtime");
    return c.outcome(fmt("10000 questions at 256x256 on 4 workers in %.1f s", elapsed));
}

} // namespace

int main()
{
    struct Criterion {
        int id;
        const char* name;
        double budget_s; ///< 0 = no runtime bound
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "standardization and AiR-E identities", 5, standardization_identities},
        {2, "ROI resolver matches brute-force oracle", 10, resolver_equivalence},
        {3, "ROI attention beats distractor attention per operation", 30, correct_vs_incorrect},
        {4, "metric and supervision unit identities", 0, metric_identities},
        {5, "toy gradients match finite differences", 60, gradient_check},
        {6, "toy progressive supervision effect", 300, toy_supervision_effect},
        {7, "toy correctness-aware supervision effect", 300, toy_correctness_effect},
        {8, "attention swap ordering", 0, attention_swap_ordering},
        {9, "split-half consistency machinery", 0, consistency_machinery},
        {10, "scoring throughput", 60, throughput},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = cr.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double elapsed = seconds_since(t0);
        if (cr.budget_s > 0 && elapsed >= cr.budget_s) {
            o.pass = false;
            o.detail += fmt("; exceeded %.0f s budget", cr.budget_s);
        }
        std::printf("%s criterion %d: %s (%.2f s) %s\n", o.pass ? "PASS" : "FAIL", cr.id, cr.name, elapsed,
                    o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
