#pragma once

// Command layer behind the `air` executable. Each command reads validated
// inputs, parallelizes across questions and writes its outputs in question_id
// order from a single collector.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "air/analysis.hpp"
#include "air/corpus.hpp"
#include "air/map_io.hpp"
#include "air/metrics.hpp"
#include "air/supervision.hpp"
#include "air/synthetic.hpp"
#include "air/toy_task.hpp"

namespace air {

/// AIR_THREADS when set to a positive integer, else the hardware concurrency.
inline std::size_t worker_count()
{
    if (const char* env = std::getenv("AIR_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n > 0) {
            return static_cast<std::size_t>(n);
        }
        throw Error(ErrorKind::InvalidArgument, std::string("AIR_THREADS must be a positive integer, got ") + env);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// fn(i) for every i in [0, n) on up to `threads` workers; results in index
/// order. The exception of the lowest failing index is rethrown.
template <typename R, typename F>
std::vector<R> parallel_map(std::size_t n, F&& fn, std::size_t threads)
{
    std::vector<std::optional<R>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t k = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
    if (k == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < k; ++t) {
            pool.emplace_back(work);
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots) {
        out.push_back(std::move(*s));
    }
    return out;
}

inline std::vector<std::string> question_ids(const Corpus& corpus)
{
    std::vector<std::string> ids;
    for (const auto& [qid, _] : corpus.questions) {
        ids.push_back(qid);
    }
    return ids;
}

// ---------------------------------------------------------------------------
// decompose

/// Lowered programs with their ROI listings (object ids per set).
inline Json decompose_json(const Corpus& corpus)
{
    Json questions = Json::array();
    for (const auto& [qid, q] : corpus.questions) {
        const SceneGraph& scene = corpus.scene_of(q);
        Json steps = Json::array();
        for (std::size_t i = 0; i < q.program.steps.size(); ++i) {
            const auto& st = q.program.steps[i];
            Json sets = Json::array();
            for (const auto& set : q.rois[i].roi_sets) {
                Json ids = Json::array();
                for (std::size_t idx : set) {
                    ids.push_back(scene.objects[idx].id);
                }
                sets.push_back(ids);
            }
            steps.push_back({{"op", std::string(to_string(st.triplet.op))},
                             {"attribute", st.triplet.attribute ? Json(*st.triplet.attribute) : Json(nullptr)},
                             {"categories", st.triplet.categories},
                             {"deps", st.deps},
                             {"text", to_text(st.triplet)},
                             {"roi_sets", sets},
                             {"fallback_used", q.rois[i].fallback_used}});
        }
        questions.push_back({{"question_id", qid}, {"image_id", q.image_id}, {"steps", steps}});
    }
    Json warnings = Json::array();
    for (const auto& w : corpus.warnings) {
        warnings.push_back({{"line", w.line}, {"message", w.message}});
    }
    return {{"questions", questions}, {"warnings", warnings}};
}

/// Writes <out>/decomposed.json.
inline void cmd_decompose(const Corpus& corpus, const std::filesystem::path& out)
{
    std::filesystem::create_directories(out);
    detail::write_text_file(out / "decomposed.json", decompose_json(corpus).dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// score

/// Attention map of a question, registered to its scene frame.
using MapProvider = std::function<AttentionMap(const Question&)>;

inline std::vector<QuestionScore> score_questions(const Corpus& corpus, const MapProvider& provider,
                                                  std::size_t threads)
{
    const auto ids = question_ids(corpus);
    return parallel_map<QuestionScore>(
        ids.size(),
        [&](std::size_t i) {
            const Question& q = corpus.questions.at(ids[i]);
            return score_question(provider(q), corpus.scene_of(q), q.program, q.rois);
        },
        threads);
}

struct ScoreTables {
    CsvTable steps;
    CsvTable summary;
};

/// Step rows `question_id,step,op,aire,n_sets,fallback_used` (missing steps
/// as n/a) and one summary row: per operation the mean over questions of the
/// question's mean AiR-E for that operation.
inline ScoreTables score_tables(const std::string& source_name, std::span<const QuestionScore> scores)
{
    ScoreTables t{{{"question_id", "step", "op", "aire", "n_sets", "fallback_used"}, {}}, {{"source"}, {}}};
    std::map<AtomicOp, std::pair<double, std::size_t>> sums;
    for (const auto& qs : scores) {
        for (const auto& s : qs.steps) {
            t.steps.rows.push_back({qs.question_id, std::to_string(s.step_index), std::string(to_string(s.op)),
                                    s.aire ? format_real(*s.aire) : "n/a", std::to_string(s.n_sets),
                                    s.fallback_used ? "1" : "0"});
        }
        for (const auto& [op, v] : qs.by_op) {
            sums[op].first += v;
            sums[op].second += 1;
        }
    }
    std::vector<std::string> row{source_name};
    for (AtomicOp op : kAllOps) {
        t.summary.header.push_back(std::string(to_string(op)));
        const auto it = sums.find(op);
        row.push_back(it == sums.end() ? "n/a" : format_real(it->second.first / static_cast<double>(it->second.second)));
    }
    t.summary.header.push_back("n_questions");
    row.push_back(std::to_string(scores.size()));
    t.summary.rows.push_back(std::move(row));
    return t;
}

/// Scores every question; the source must cover all of them. Writes <out>/aire_steps.csv and
/// <out>/aire_summary.csv.
inline ScoreTables cmd_score(const Corpus& corpus, const AttentionSource& source, const std::filesystem::path& out,
                             std::size_t threads)
{
    for (const auto& [qid, _] : corpus.questions) {
        if (!source.maps.count(qid)) {
            throw Error(ErrorKind::CrossReference, "source " + source.name + " has no map for question " + qid);
        }
    }
    const auto scores = score_questions(
        corpus, [&](const Question& q) { return aggregate_glimpses(source.maps.at(q.question_id)); }, threads);
    ScoreTables t = score_tables(source.name, scores);
    std::filesystem::create_directories(out);
    detail::write_text_file(out / "aire_steps.csv", t.steps.to_csv());
    detail::write_text_file(out / "aire_summary.csv", t.summary.to_csv());
    return t;
}

// ---------------------------------------------------------------------------
// fixmap

struct FixmapOptions {
    std::vector<double> edges = {0.0, 1.0, 2.0, 3.0};
    FixationMapOptions map;
};

/// Per question and answer group (total, correct, incorrect): one map per
/// temporal bin and one over all fixations, as <qid>.<group>.<bin|all>.airm.
/// Empty selections are skipped. Returns the index table also written to
/// <out>/fixmaps.csv.
inline CsvTable cmd_fixmap(const Corpus& corpus, const FixmapOptions& options, const std::filesystem::path& out,
                           std::size_t threads)
{
    if (corpus.fixations.empty()) {
        throw Error(ErrorKind::NoFixations, "corpus has no fixations.json");
    }
    namespace fs = std::filesystem;
    fs::create_directories(out);
    const auto ids = question_ids(corpus);
    const std::pair<const char*, SourceKind> groups[] = {{"total", SourceKind::HumanTotal},
                                                         {"correct", SourceKind::HumanCorrect},
                                                         {"incorrect", SourceKind::HumanIncorrect}};
    using Rows = std::vector<std::vector<std::string>>;
    const auto per_question = parallel_map<Rows>(
        ids.size(),
        [&](std::size_t i) {
            const std::string& qid = ids[i];
            const Frame frame = corpus.scene_of(qid).frame();
            Rows rows;
            auto emit = [&](const std::string& group, const std::string& bin, std::span<const FixationRecord> fx) {
                if (fx.empty()) {
                    return;
                }
                const std::string file = qid + "." + group + "." + bin + ".airm";
                save_airm(out / file, build_fixation_map(fx, frame, options.map));
                rows.push_back({qid, group, bin, std::to_string(fx.size()), file});
            };
            for (const auto& [group, kind] : groups) {
                std::vector<FixationRecord> all;
                std::vector<std::vector<FixationRecord>> bins(options.edges.size() - 1);
                for (const auto& seq : corpus.fixations_of(qid)) {
                    FixationSequence kept{qid, {}};
                    std::copy_if(seq.fixations.begin(), seq.fixations.end(), std::back_inserter(kept.fixations),
                                 [&](const FixationRecord& f) { return detail::keeps(kind, f); });
                    all.insert(all.end(), kept.fixations.begin(), kept.fixations.end());
                    const auto tb = temporal_bins(kept, options.edges);
                    for (std::size_t b = 0; b < tb.bins.size(); ++b) {
                        bins[b].insert(bins[b].end(), tb.bins[b].begin(), tb.bins[b].end());
                    }
                }
                for (std::size_t b = 0; b < bins.size(); ++b) {
                    emit(group, "bin" + std::to_string(b), bins[b]);
                }
                emit(group, "all", all);
            }
            return rows;
        },
        threads);
    CsvTable index{{"question_id", "group", "bin", "n_fixations", "file"}, {}};
    for (const auto& rows : per_question) {
        index.rows.insert(index.rows.end(), rows.begin(), rows.end());
    }
    detail::write_text_file(out / "fixmaps.csv", index.to_csv());
    return index;
}

// ---------------------------------------------------------------------------
// targets

struct TargetOptions {
    std::size_t k_neg = 3;
    double tau = 0.3;
    std::size_t map_size = 256;
};

/// Step targets and mined negatives of one question.
inline Json question_targets(const Corpus& corpus, const Question& q, const TargetOptions& options,
                             const std::map<std::string, std::vector<StepROIs>>& image_rois,
                             NegativeAttentionMap* negative = nullptr)
{
    const SceneGraph& scene = corpus.scene_of(q);
    const auto it = corpus.proposals.find(q.image_id);
    if (it == corpus.proposals.end()) {
        throw Error(ErrorKind::CrossReference, "no proposals for image " + q.image_id + " of " + q.question_id);
    }
    const ProposalSet& proposals = it->second;
    Json steps = Json::array();
    std::vector<BoundingBox> positives;
    for (const auto& step : q.rois) {
        const auto t = gt_attention(step, scene, proposals);
        steps.push_back({{"weights", t.weights}, {"all_zero", t.all_zero}});
        for (std::size_t idx : step.combined()) {
            positives.push_back(scene.objects[idx].box);
        }
    }
    const auto mined = mine_hard_negatives(q.question_id, image_rois, scene, positives, options.k_neg, options.tau);
    std::vector<BoundingBox> boxes;
    Json neg_boxes = Json::array();
    Json neg_ids = Json::array();
    for (const auto& m : mined) {
        boxes.push_back(m.box);
        neg_boxes.push_back(detail::box_to_json(m.box));
        neg_ids.push_back({{"object_id", m.object_id}, {"mentions", m.mentions}});
    }
    if (negative) {
        *negative = negative_map(boxes, scene.frame(), options.map_size);
    }
    return {{"question_id", q.question_id},
            {"steps", steps},
            {"neg_boxes", neg_boxes},
            {"neg_weights", negative_weights(boxes, proposals)},
            {"meta",
             {{"negatives", neg_ids},
              {"k_neg", options.k_neg},
              {"tau", options.tau},
              {"map_size", options.map_size},
              {"mention_count", "object id occurrences across the steps of the image's other questions, one per step"}}}};
}

/// <out>/<qid>.json and <out>/<qid>.neg.airm per question.
inline void cmd_targets(const Corpus& corpus, const TargetOptions& options, const std::filesystem::path& out,
                        std::size_t threads)
{
    std::map<std::string, std::map<std::string, std::vector<StepROIs>>> by_image;
    for (const auto& [qid, q] : corpus.questions) {
        by_image[q.image_id][qid] = q.rois;
    }
    std::filesystem::create_directories(out);
    const auto ids = question_ids(corpus);
    parallel_map<int>(
        ids.size(),
        [&](std::size_t i) {
            const Question& q = corpus.questions.at(ids[i]);
            NegativeAttentionMap neg;
            const Json j = question_targets(corpus, q, options, by_image.at(q.image_id), &neg);
            detail::write_text_file(out / (q.question_id + ".json"), j.dump(1) + "\n");
            save_airm(out / (q.question_id + ".neg.airm"), neg.map);
            return 0;
        },
        threads);
}

// ---------------------------------------------------------------------------
// synth

namespace detail {

template <typename T>
void read_field(const Json& j, const char* key, T& field)
{
    if (j.contains(key)) {
        field = j.at(key).get<T>();
    }
}

inline void reject_unknown_keys(const Json& j, std::initializer_list<const char*> known, const std::string& where)
{
    if (!j.is_object()) {
        schema_error(where, "expected an object");
    }
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
            schema_error(where, "unknown key '" + key + "'");
        }
    }
}

} // namespace detail

/// Keys mirror SynthConfig; sources is a list of {name, alignment, glimpses}.
inline SynthConfig synth_config_from_json(const Json& j)
{
    SynthConfig c;
    try {
        detail::reject_unknown_keys(j,
                                    {"n_images", "questions_per_image", "min_objects", "max_objects", "width", "height",
                                     "subjects", "fixations_per_subject", "duration", "correct_rate",
                                     "correct_alignment", "incorrect_alignment", "absent_rate", "map_size", "sources",
                                     "fixations", "proposals", "seed"},
                                    "synth config");
        detail::read_field(j, "n_images", c.n_images);
        detail::read_field(j, "questions_per_image", c.questions_per_image);
        detail::read_field(j, "min_objects", c.min_objects);
        detail::read_field(j, "max_objects", c.max_objects);
        detail::read_field(j, "width", c.width);
        detail::read_field(j, "height", c.height);
        detail::read_field(j, "subjects", c.subjects);
        detail::read_field(j, "fixations_per_subject", c.fixations_per_subject);
        detail::read_field(j, "duration", c.duration);
        detail::read_field(j, "correct_rate", c.correct_rate);
        detail::read_field(j, "correct_alignment", c.correct_alignment);
        detail::read_field(j, "incorrect_alignment", c.incorrect_alignment);
        detail::read_field(j, "absent_rate", c.absent_rate);
        detail::read_field(j, "map_size", c.map_size);
        detail::read_field(j, "fixations", c.fixations);
        detail::read_field(j, "proposals", c.proposals);
        detail::read_field(j, "seed", c.seed);
        if (j.contains("sources")) {
            c.sources.clear();
            for (const auto& s : j.at("sources")) {
                detail::reject_unknown_keys(s, {"name", "alignment", "glimpses"}, "synth source");
                SynthSourceSpec spec;
                spec.name = s.at("name").get<std::string>();
                detail::read_field(s, "alignment", spec.alignment);
                detail::read_field(s, "glimpses", spec.glimpses);
                c.sources.push_back(std::move(spec));
            }
        }
    } catch (const Json::exception& e) {
        detail::schema_error("synth config", e.what());
    }
    if (c.width <= 0.0 || c.height <= 0.0 || c.map_size == 0 || c.n_images == 0) {
        detail::schema_error("synth config", "sizes and image count must be positive");
    }
    return c;
}

inline void cmd_synth(const SynthConfig& config, const std::filesystem::path& out)
{
    save_synthetic_corpus(make_synthetic_corpus(config), out);
}

// ---------------------------------------------------------------------------
// train-toy

struct ToyRunConfig {
    toy::TaskConfig task;
    toy::TrainConfig train;
    /// Training that ignores the step targets and negatives alongside the main run.
    bool baseline = false;
};

/// {"task": {...TaskConfig}, "train": {lr, epochs, batch_size, render_size},
/// "objective": {theta, phi, neg_weight}, "baseline": bool}.
inline ToyRunConfig toy_config_from_json(const Json& j)
{
    ToyRunConfig c;
    try {
        detail::reject_unknown_keys(j, {"task", "train", "objective", "baseline"}, "toy config");
        if (j.contains("task")) {
            const Json& t = j.at("task");
            detail::reject_unknown_keys(
                t, {"n_train", "n_test", "question_noise", "supervised_fraction", "shadow_overlap", "image_size"},
                "toy config task");
            detail::read_field(t, "n_train", c.task.n_train);
            detail::read_field(t, "n_test", c.task.n_test);
            detail::read_field(t, "question_noise", c.task.question_noise);
            detail::read_field(t, "supervised_fraction", c.task.supervised_fraction);
            detail::read_field(t, "shadow_overlap", c.task.shadow_overlap);
            detail::read_field(t, "image_size", c.task.image_size);
        }
        if (j.contains("train")) {
            const Json& t = j.at("train");
            detail::reject_unknown_keys(t, {"lr", "epochs", "batch_size", "render_size"}, "toy config train");
            detail::read_field(t, "lr", c.train.lr);
            detail::read_field(t, "epochs", c.train.epochs);
            detail::read_field(t, "batch_size", c.train.batch_size);
            detail::read_field(t, "render_size", c.train.render_size);
        }
        if (j.contains("objective")) {
            const Json& o = j.at("objective");
            detail::reject_unknown_keys(o, {"theta", "phi", "neg_weight"}, "toy config objective");
            detail::read_field(o, "theta", c.train.objective.loss.theta);
            detail::read_field(o, "phi", c.train.objective.loss.phi);
            detail::read_field(o, "neg_weight", c.train.objective.neg_weight);
        }
        detail::read_field(j, "baseline", c.baseline);
    } catch (const Json::exception& e) {
        detail::schema_error("toy config", e.what());
    }
    if (!(c.train.lr >= 0.0) || c.train.batch_size == 0 || c.task.n_train == 0) {
        detail::schema_error("toy config", "lr must be non-negative, batch_size and n_train positive");
    }
    return c;
}

namespace detail {

inline Json stats_json(const toy::EvalStats& s)
{
    return {{"answer_accuracy", s.answer_accuracy},
            {"op_accuracy", s.op_accuracy},
            {"mean_kl", s.mean_kl},
            {"aire", s.aire},
            {"negative_mass", s.negative_mass}};
}

inline Json run_json(const toy::TrainResult& r, const toy::TaskData& data, std::uint64_t seed, std::size_t render)
{
    Json curves = Json::array();
    for (const auto& e : r.curves) {
        Json row = stats_json(e.stats);
        row["epoch"] = e.epoch;
        row["loss"] = e.loss;
        curves.push_back(row);
    }
    using toy::SwapMode;
    return {{"curves", curves},
            {"test", stats_json(toy::evaluate(r.params, data.test, render))},
            {"swap",
             {{"model", toy::attention_swap_eval(r.params, data.test, SwapMode::Model, seed)},
              {"random", toy::attention_swap_eval(r.params, data.test, SwapMode::Random, seed)},
              {"ground_truth", toy::attention_swap_eval(r.params, data.test, SwapMode::GroundTruth, seed)}}}};
}

} // namespace detail

/// Writes <out>/curves.json and <out>/params.bin (plus baseline_params.bin
/// when a baseline is requested). `seed` drives data, init and shuffling.
inline Json cmd_train_toy(ToyRunConfig config, std::uint64_t seed, const std::filesystem::path& out)
{
    config.task.seed = seed;
    config.train.seed = seed;
    const toy::TaskData data = toy::make_task(config.task);
    const toy::Params p0 = toy::Params::init(toy::task_dims(), seed);
    const toy::TrainResult run = toy::train_toy(data.train, p0, config.train);

    Json j = {{"seed", seed},
              {"config",
               {{"lr", config.train.lr},
                {"epochs", config.train.epochs},
                {"batch_size", config.train.batch_size},
                {"render_size", config.train.render_size},
                {"theta", config.train.objective.loss.theta},
                {"phi", config.train.objective.loss.phi},
                {"neg_weight", config.train.objective.neg_weight},
                {"n_train", config.task.n_train},
                {"n_test", config.task.n_test},
                {"supervised_fraction", config.task.supervised_fraction}}},
              {"run", detail::run_json(run, data, seed, config.train.render_size)}};
    std::filesystem::create_directories(out);
    toy::save_params(out / "params.bin", run.params);
    if (config.baseline) {
        toy::TrainConfig base = config.train;
        base.objective = {{0.0, 0.0}, 0.0};
        const toy::TrainResult b = toy::train_toy(data.train, p0, base);
        j["baseline"] = detail::run_json(b, data, seed, config.train.render_size);
        toy::save_params(out / "baseline_params.bin", b.params);
    }
    detail::write_text_file(out / "curves.json", j.dump(1) + "\n");
    return j;
}

// ---------------------------------------------------------------------------
// analyze

/// Sources from description files; AnalysisReport written to `out`, its meta
/// echoing the settings the caller changed from their defaults.
inline AnalysisReport cmd_analyze(const Corpus& corpus, std::span<const std::filesystem::path> source_files,
                                  const AnalysisOptions& options, const std::filesystem::path& out,
                                  const Json& overridden = Json::object())
{
    std::vector<AttentionSource> sources;
    for (const auto& f : source_files) {
        sources.push_back(load_source(f, corpus, options.map));
    }
    AnalysisReport rep = run_analysis(corpus, sources, options);
    rep.meta["overridden_defaults"] = overridden;
    rep.write(out);
    return rep;
}

} // namespace air
