#pragma once

// Synthetic corpora: random scenes, template programs covering all eight
// operations, proposals, subjects whose fixations follow the reasoning steps,
// and model attention sources whose mass sits on the ROIs to a set degree.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "air/analysis.hpp"
#include "air/corpus.hpp"
#include "air/random.hpp"

namespace air {

struct SynthSourceSpec {
    std::string name;
    /// Share of the map's blob weight on ROI objects; the rest is on distractors.
    double alignment = 1.0;
    std::size_t glimpses = 1;

    bool operator==(const SynthSourceSpec&) const = default;
};

struct SynthConfig {
    std::size_t n_images = 40;
    std::size_t questions_per_image = 5;
    std::size_t min_objects = 7;
    std::size_t max_objects = 10;
    double width = 480.0;
    double height = 360.0;
    std::size_t subjects = 6;
    std::size_t fixations_per_subject = 9;
    double duration = 3.0;             ///< seconds of viewing per subject
    double correct_rate = 0.7;         ///< share of subjects answering correctly
    double correct_alignment = 0.85;   ///< chance a correct subject's fixation lands on the current step's ROI
    double incorrect_alignment = 0.35; ///< the same for incorrect subjects
    double absent_rate = 0.05;         ///< chance a question names a category the scene lacks
    std::size_t map_size = 64;
    std::vector<SynthSourceSpec> sources = {{"aligned", 0.9, 1}, {"distractor", 0.1, 1}};
    bool fixations = true;
    bool proposals = true;
    std::uint64_t seed = 0;
};

inline const std::vector<std::string>& synth_categories()
{
    static const std::vector<std::string> v = {"cup",  "plate", "table", "chair", "lamp",  "book",
                                               "vase", "clock", "sofa",  "bowl",  "bottle", "window"};
    return v;
}

inline const std::vector<std::string>& synth_colors()
{
    static const std::vector<std::string> v = {"red", "green", "blue", "white"};
    return v;
}

namespace detail {

inline SceneGraph synth_scene(Rng& rng, const std::string& image_id, const SynthConfig& cfg)
{
    const auto& cats = synth_categories();
    const auto& colors = synth_colors();
    SceneGraph g{image_id, cfg.width, cfg.height, {}};
    const std::size_t n = cfg.min_objects + rng.index(cfg.max_objects - cfg.min_objects + 1);
    // Objects on a jittered 4 x 3 grid keep boxes apart.
    std::vector<std::size_t> cells(12);
    std::iota(cells.begin(), cells.end(), 0);
    rng.shuffle(std::span<std::size_t>(cells));
    const double cw = cfg.width / 4.0;
    const double ch = cfg.height / 3.0;
    for (std::size_t i = 0; i < std::min<std::size_t>(n, 12); ++i) {
        SceneObject o;
        o.id = "o" + std::to_string(i);
        o.category = cats[rng.index(cats.size())];
        o.attributes = {colors[rng.index(colors.size())], rng.bernoulli(0.5) ? "large" : "small"};
        const double w = rng.uniform(0.3, 0.7) * cw;
        const double h = rng.uniform(0.3, 0.7) * ch;
        const double x0 = static_cast<double>(cells[i] % 4) * cw;
        const double y0 = static_cast<double>(cells[i] / 4) * ch;
        o.box = {x0 + rng.uniform(0.0, cw - w), y0 + rng.uniform(0.0, ch - h), w, h};
        g.objects.push_back(std::move(o));
    }
    for (std::size_t i = 0; i < g.objects.size(); ++i) {
        for (std::size_t r = 0; r < 2; ++r) {
            const std::size_t j = rng.index(g.objects.size());
            if (j != i) {
                g.objects[i].relations.push_back({r ? "left of" : "near", g.objects[j].id});
            }
        }
    }
    return g;
}

/// Program lines over two scene objects a and b of distinct categories.
inline std::vector<RawProgramEntry> synth_program(std::size_t tmpl, const SceneObject& a, const std::string& ca,
                                                  const std::string& cb)
{
    std::string color = synth_colors().front();
    for (const auto& c : synth_colors()) {
        if (a.has_attribute(c)) {
            color = c;
        }
    }
    const std::string size = a.has_attribute("large") ? "large" : "small";
    switch (tmpl % 6) {
    case 0: return {{"select " + ca, {}}, {"filter " + color, {0}}, {"query size " + ca, {1}}};
    case 1: return {{"select " + cb, {}}, {"relate near " + ca, {0}}, {"verify color " + ca, {1}}};
    case 2: return {{"select " + ca, {}}, {"select " + cb, {}}, {"compare color " + ca + " and " + cb, {0, 1}}};
    case 3: return {{"select " + ca, {}}, {"select " + cb, {}}, {"and", {0, 1}}, {"query color " + ca, {2}}};
    case 4: return {{"select " + ca, {}}, {"select " + cb, {}}, {"or", {0, 1}}};
    default: return {{"select " + ca, {}}, {"filter " + size, {0}}, {"verify color " + ca, {1}}};
    }
}

/// Separable Gaussian blobs centred on boxes, sigma a quarter of the box side.
inline AttentionMap blob_map(const std::vector<std::pair<BoundingBox, double>>& blobs, const Frame& frame,
                             std::size_t size)
{
    AttentionMap m(size, size, frame);
    const double sx = static_cast<double>(size) / frame.width;
    const double sy = static_cast<double>(size) / frame.height;
    std::vector<double> gx(size);
    std::vector<double> gy(size);
    for (const auto& [b, w] : blobs) {
        if (w <= 0.0) {
            continue;
        }
        const double cx = (b.x + b.w / 2.0) * sx;
        const double cy = (b.y + b.h / 2.0) * sy;
        const double sdx = std::max(b.w * sx / 4.0, 0.5);
        const double sdy = std::max(b.h * sy / 4.0, 0.5);
        for (std::size_t i = 0; i < size; ++i) {
            const double c = static_cast<double>(i) + 0.5;
            gx[i] = std::exp(-0.5 * (c - cx) * (c - cx) / (sdx * sdx));
            gy[i] = std::exp(-0.5 * (c - cy) * (c - cy) / (sdy * sdy));
        }
        for (std::size_t r = 0; r < size; ++r) {
            for (std::size_t c = 0; c < size; ++c) {
                m.at(r, c) += w * gy[r] * gx[c];
            }
        }
    }
    return m;
}

inline std::vector<std::size_t> roi_objects(const Question& q)
{
    std::vector<std::size_t> out;
    for (const auto& step : q.rois) {
        const auto c = step.combined();
        out.insert(out.end(), c.begin(), c.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline FixationRecord fixate(Rng& rng, const BoundingBox& b, const Frame& f)
{
    const double x = std::clamp(b.x + b.w / 2.0 + rng.normal(0.0, b.w / 4.0), 0.0, f.width - 1e-6);
    const double y = std::clamp(b.y + b.h / 2.0 + rng.normal(0.0, b.h / 4.0), 0.0, f.height - 1e-6);
    return {x, y, 0.0, {}, {}};
}

/// Box of a sixth of the frame centred on the point of a 9x9 lattice farthest
/// from every object box.
inline BoundingBox background_box(const SceneGraph& scene)
{
    double best = -1.0;
    double bx = 0.0;
    double by = 0.0;
    for (int i = 0; i < 9; ++i) {
        for (int j = 0; j < 9; ++j) {
            const double x = scene.width * (i + 0.5) / 9.0;
            const double y = scene.height * (j + 0.5) / 9.0;
            double nearest = std::numeric_limits<double>::infinity();
            for (const auto& o : scene.objects) {
                const double dx = std::max({o.box.x - x, 0.0, x - (o.box.x + o.box.w)});
                const double dy = std::max({o.box.y - y, 0.0, y - (o.box.y + o.box.h)});
                nearest = std::min(nearest, std::hypot(dx, dy));
            }
            if (nearest > best) {
                best = nearest;
                bx = x;
                by = y;
            }
        }
    }
    const double w = scene.width / 6.0;
    const double h = scene.height / 6.0;
    return {bx - w / 2.0, by - h / 2.0, w, h};
}

} // namespace detail

/// ROI-centred map of a question: blobs on the ROI objects weighted by
/// alignment and on every other object weighted by 1 - alignment. A side with
/// no objects puts its weight on a background blob away from every object.
inline AttentionMap synth_attention(const Question& q, const SceneGraph& scene, double alignment, std::size_t size)
{
    const auto rois = detail::roi_objects(q);
    std::vector<std::pair<BoundingBox, double>> blobs;
    const std::size_t n_roi = rois.size();
    const std::size_t n_other = scene.objects.size() - n_roi;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        const bool roi = std::binary_search(rois.begin(), rois.end(), i);
        const double w = roi ? alignment / static_cast<double>(n_roi) : (1.0 - alignment) / static_cast<double>(n_other);
        blobs.push_back({scene.objects[i].box, w});
    }
    const double background = (n_roi == 0 ? alignment : 0.0) + (n_other == 0 ? 1.0 - alignment : 0.0);
    if (background > 0.0) {
        blobs.push_back({detail::background_box(scene), background});
    }
    return detail::blob_map(blobs, scene.frame(), size);
}

/// Glimpse g of a multi-glimpse source attends to the ROIs of step
/// min(g, T - 1) with the given alignment.
inline AttentionMap synth_glimpse(const Question& q, const SceneGraph& scene, double alignment, std::size_t g,
                                  std::size_t size)
{
    Question one = q;
    const std::size_t s = std::min(g, q.rois.size() - 1);
    one.rois = {q.rois[s]};
    return synth_attention(one, scene, alignment, size);
}

struct SynthCorpus {
    Corpus corpus;
    std::vector<AttentionSource> sources;
};

/// Deterministic in cfg.seed.
inline SynthCorpus make_synthetic_corpus(const SynthConfig& cfg)
{
    if (cfg.min_objects < 3 || cfg.max_objects < cfg.min_objects || cfg.max_objects > 12) {
        throw Error(ErrorKind::InvalidArgument, "synthetic scenes need 3..12 objects");
    }
    Rng rng(cfg.seed);
    SynthCorpus out;
    Corpus& c = out.corpus;
    for (std::size_t i = 0; i < cfg.n_images; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "img%05zu", i);
        c.scenes.emplace(id, detail::synth_scene(rng, id, cfg));
    }
    {
        std::vector<SceneGraph> graphs;
        for (const auto& [_, g] : c.scenes) {
            graphs.push_back(g);
        }
        c.cooc = build_cooccurrence(graphs);
    }

    const auto& cats = synth_categories();
    for (const auto& [image_id, scene] : c.scenes) {
        for (std::size_t k = 0; k < cfg.questions_per_image; ++k) {
            char qid[48];
            std::snprintf(qid, sizeof qid, "%s_q%zu", image_id.c_str(), k);
            const SceneObject& a = scene.objects[rng.index(scene.objects.size())];
            std::string cb;
            do {
                cb = scene.objects[rng.index(scene.objects.size())].category;
            } while (cb == a.category && std::any_of(scene.objects.begin(), scene.objects.end(),
                                                     [&](const SceneObject& o) { return o.category != a.category; }));
            std::string ca = a.category;
            if (rng.bernoulli(cfg.absent_rate)) {
                std::vector<std::string> absent;
                for (const auto& cat : cats) {
                    if (std::none_of(scene.objects.begin(), scene.objects.end(),
                                     [&](const SceneObject& o) { return o.category == cat; })) {
                        absent.push_back(cat);
                    }
                }
                if (!absent.empty()) {
                    cb = absent[rng.index(absent.size())];
                }
            }
            Question q;
            q.question_id = qid;
            q.image_id = image_id;
            q.program = parse_program(qid, detail::synth_program(rng.index(6), a, ca, cb));
            q.rois = resolve_rois(q.program, scene, c.cooc);
            c.questions.emplace(qid, std::move(q));
        }
    }

    if (cfg.proposals) {
        for (const auto& [image_id, scene] : c.scenes) {
            ProposalSet set;
            for (const auto& o : scene.objects) {
                set.boxes.push_back({std::max(0.0, o.box.x + rng.uniform(-4.0, 4.0)),
                                     std::max(0.0, o.box.y + rng.uniform(-4.0, 4.0)), o.box.w, o.box.h});
            }
            for (int extra = 0; extra < 4; ++extra) {
                const double w = rng.uniform(20.0, 120.0);
                const double h = rng.uniform(20.0, 120.0);
                set.boxes.push_back({rng.uniform(0.0, cfg.width - w), rng.uniform(0.0, cfg.height - h), w, h});
            }
            c.proposals.emplace(image_id, std::move(set));
        }
    }

    if (cfg.fixations) {
        for (const auto& [qid, q] : c.questions) {
            const SceneGraph& scene = c.scene_of(q);
            const auto rois = detail::roi_objects(q);
            for (std::size_t s = 0; s < cfg.subjects; ++s) {
                const bool correct = rng.bernoulli(cfg.correct_rate);
                const double align = correct ? cfg.correct_alignment : cfg.incorrect_alignment;
                FixationSequence seq{qid, {}};
                for (std::size_t f = 0; f < cfg.fixations_per_subject; ++f) {
                    const double t = (static_cast<double>(f) + rng.uniform(0.0, 1.0)) * cfg.duration /
                                     static_cast<double>(cfg.fixations_per_subject);
                    const auto step = std::min<std::size_t>(
                        static_cast<std::size_t>(t / cfg.duration * static_cast<double>(q.rois.size())),
                        q.rois.size() - 1);
                    const auto step_objects = q.rois[step].combined();
                    FixationRecord rec;
                    if (!step_objects.empty() && rng.bernoulli(align)) {
                        rec = detail::fixate(rng, scene.objects[step_objects[rng.index(step_objects.size())]].box,
                                             scene.frame());
                    } else {
                        const auto& o = scene.objects[rng.index(scene.objects.size())];
                        rec = detail::fixate(rng, o.box, scene.frame());
                    }
                    rec.t_onset = t;
                    rec.subject_id = "s" + std::to_string(s);
                    rec.correct = correct;
                    seq.fixations.push_back(std::move(rec));
                }
                c.fixations.push_back(std::move(seq));
            }
        }
    }

    for (const auto& spec : cfg.sources) {
        AttentionSource src;
        src.name = spec.name;
        for (const auto& [qid, q] : c.questions) {
            const SceneGraph& scene = c.scene_of(q);
            // Per-question alignment jitter drives task performance.
            const double a = std::clamp(spec.alignment + rng.normal(0.0, 0.1), 0.0, 1.0);
            auto& maps = src.maps[qid];
            if (spec.glimpses <= 1) {
                maps.push_back(synth_attention(q, scene, a, cfg.map_size));
            } else {
                for (std::size_t g = 0; g < spec.glimpses; ++g) {
                    maps.push_back(synth_glimpse(q, scene, a, g, cfg.map_size));
                }
            }
            const double perf = std::clamp(0.2 + 0.6 * a + rng.normal(0.0, 0.1), 0.0, 1.0);
            src.performance[qid] = perf;
            src.correct[qid] = rng.bernoulli(perf);
        }
        out.sources.push_back(std::move(src));
    }
    return out;
}

/// Writes the corpus plus, per source, sources/<name>.json and
/// maps/<name>/<qid>[.<g>].airm.
inline void save_synthetic_corpus(const SynthCorpus& sc, const std::filesystem::path& root)
{
    save_corpus(sc.corpus, root);
    std::filesystem::create_directories(root / "sources");
    for (const auto& src : sc.sources) {
        const auto dir = root / "maps" / src.name;
        std::filesystem::create_directories(dir);
        for (const auto& [qid, maps] : src.maps) {
            if (maps.size() == 1) {
                save_airm(dir / (qid + ".airm"), maps.front());
            } else {
                for (std::size_t g = 0; g < maps.size(); ++g) {
                    save_airm(dir / (qid + "." + std::to_string(g) + ".airm"), maps[g]);
                }
            }
        }
        Json j = {{"name", src.name},
                  {"kind", std::string(to_string(src.kind))},
                  {"maps", "../maps/" + src.name},
                  {"performance", src.performance},
                  {"correct", src.correct}};
        detail::write_text_file(root / "sources" / (src.name + ".json"), j.dump(1) + "\n");
    }
}

/// Subjects viewing a square frame: either all drawing from one Gaussian per
/// question (shared) or each drawing uniformly (independent).
inline std::vector<FixationSequence> synth_cohort(bool shared, std::size_t n_questions, std::size_t n_subjects,
                                                  std::size_t n_fixations, double frame_size, double spread,
                                                  std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<FixationSequence> out;
    for (std::size_t q = 0; q < n_questions; ++q) {
        const double cx = rng.uniform(0.25, 0.75) * frame_size;
        const double cy = rng.uniform(0.25, 0.75) * frame_size;
        for (std::size_t s = 0; s < n_subjects; ++s) {
            FixationSequence seq{"q" + std::to_string(q), {}};
            for (std::size_t f = 0; f < n_fixations; ++f) {
                FixationRecord r;
                if (shared) {
                    r.x = std::clamp(rng.normal(cx, spread), 0.0, frame_size - 1e-6);
                    r.y = std::clamp(rng.normal(cy, spread), 0.0, frame_size - 1e-6);
                } else {
                    r.x = rng.uniform(0.0, frame_size);
                    r.y = rng.uniform(0.0, frame_size);
                }
                r.t_onset = static_cast<double>(f) * 0.3;
                r.subject_id = "s" + std::to_string(s);
                seq.fixations.push_back(r);
            }
            out.push_back(std::move(seq));
        }
    }
    return out;
}

} // namespace air
