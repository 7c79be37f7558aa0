#pragma once

// Random scene and program generators shared by property tests and the
// acceptance suite.

#include <string>
#include <vector>

#include "air/program.hpp"
#include "air/random.hpp"
#include "air/scene.hpp"
#include "air/toy_model.hpp"

namespace air::gen {

inline const std::vector<std::string>& category_vocab()
{
    static const std::vector<std::string> v = {"cat", "dog", "table", "cup", "plate", "chair", "lamp", "book"};
    return v;
}

inline const std::vector<std::string>& attribute_vocab()
{
    static const std::vector<std::string> v = {"red", "blue", "large", "small", "wooden"};
    return v;
}

inline SceneGraph random_scene(Rng& rng, const std::string& image_id, std::size_t max_objects = 10)
{
    SceneGraph scene;
    scene.image_id = image_id;
    scene.width = rng.uniform(200.0, 800.0);
    scene.height = rng.uniform(200.0, 800.0);
    const std::size_t n = 1 + rng.index(max_objects);
    for (std::size_t i = 0; i < n; ++i) {
        SceneObject o;
        o.id = "o" + std::to_string(i);
        o.category = category_vocab()[rng.index(category_vocab().size())];
        for (const auto& a : attribute_vocab()) {
            if (rng.bernoulli(0.3)) {
                o.attributes.insert(a);
            }
        }
        const double w = rng.uniform(5.0, scene.width / 3);
        const double h = rng.uniform(5.0, scene.height / 3);
        o.box = {rng.uniform(0.0, scene.width - w), rng.uniform(0.0, scene.height - h), w, h};
        scene.objects.push_back(std::move(o));
    }
    for (auto& o : scene.objects) {
        if (rng.bernoulli(0.5)) {
            const auto& target = scene.objects[rng.index(scene.objects.size())];
            o.relations.push_back({rng.bernoulli(0.5) ? "on" : "near", target.id});
        }
    }
    return scene;
}

/// A valid program whose categories sometimes fall outside the scene
/// vocabulary ("unicorn") to exercise the fallback.
inline ReasoningProgram random_program(Rng& rng, const std::string& qid, std::size_t max_steps = 7)
{
    const auto pick_category = [&]() -> std::string {
        if (rng.bernoulli(0.1)) {
            return "unicorn";
        }
        return category_vocab()[rng.index(category_vocab().size())];
    };
    ReasoningProgram p;
    p.question_id = qid;
    p.steps.push_back({{AtomicOp::Select, {}, {pick_category()}}, {}});
    const std::size_t n = 1 + rng.index(max_steps);
    while (p.steps.size() < n) {
        const std::size_t i = p.steps.size();
        const AtomicOp op = kAllOps[rng.index(kNumOps)];
        ProgramStep step;
        step.triplet.op = op;
        switch (op) {
        case AtomicOp::Select: step.triplet.categories = {pick_category()}; break;
        case AtomicOp::Filter:
            step.triplet.attribute = attribute_vocab()[rng.index(attribute_vocab().size())];
            step.deps = {rng.index(i)};
            break;
        case AtomicOp::Query:
        case AtomicOp::Verify:
        case AtomicOp::Relate:
            if (rng.bernoulli(0.5)) {
                step.triplet.attribute = op == AtomicOp::Relate ? "on" : "color";
            }
            step.triplet.categories = {pick_category()};
            step.deps = {rng.index(i)};
            break;
        case AtomicOp::Compare:
        case AtomicOp::And:
        case AtomicOp::Or: {
            if (i < 2) {
                continue;
            }
            if (op == AtomicOp::Compare) {
                step.triplet.attribute = "color";
                step.triplet.categories = {pick_category(), pick_category()};
            }
            const std::size_t a = rng.index(i);
            std::size_t b = rng.index(i);
            while (b == a) {
                b = rng.index(i);
            }
            step.deps = {a, b};
            break;
        }
        }
        p.steps.push_back(std::move(step));
    }
    return p;
}

/// Random toy sample: program length 1..t_max, some steps unsupervised,
/// targets and the negative map are random distributions.
inline toy::Sample random_toy_sample(Rng& rng, const toy::Dims& d, bool with_negative = true)
{
    auto dist = [&] {
        std::vector<double> w(d.k);
        double s = 0.0;
        for (double& v : w) {
            v = rng.uniform(0.05, 1.0);
            s += v;
        }
        for (double& v : w) {
            v /= s;
        }
        return w;
    };
    toy::Sample s;
    for (std::size_t i = 0; i < d.dq; ++i) {
        s.q.push_back(rng.normal());
    }
    for (std::size_t i = 0; i < d.k * d.d; ++i) {
        s.v.push_back(rng.uniform(-1.0, 1.0));
    }
    s.answer = rng.index(d.a);
    const std::size_t len = 1 + rng.index(d.t_max);
    for (std::size_t t = 0; t < len; ++t) {
        s.ops.push_back(rng.index(kNumOps));
        s.targets.push_back(rng.bernoulli(0.7) ? dist() : std::vector<double>{});
    }
    if (with_negative) {
        s.negative = dist();
    }
    return s;
}

} // namespace air::gen
