#pragma once

// Scene graphs, category co-occurrence, and per-step ROI resolution.

#include <algorithm>
#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "air/error.hpp"
#include "air/geometry.hpp"
#include "air/program.hpp"

namespace air {

struct Relation {
    std::string name;
    std::string target_id;

    bool operator==(const Relation&) const = default;
};

struct SceneObject {
    std::string id;
    std::string category;
    std::set<std::string> attributes;
    BoundingBox box;
    std::vector<Relation> relations;

    /// Exact attribute membership; "type=value" also matches a bare "value".
    bool has_attribute(const std::string& attribute) const
    {
        if (attributes.count(attribute) != 0) {
            return true;
        }
        const auto eq = attribute.find('=');
        return eq != std::string::npos && attributes.count(attribute.substr(eq + 1)) != 0;
    }

    bool operator==(const SceneObject&) const = default;
};

struct SceneGraph {
    std::string image_id;
    double width = 0.0;
    double height = 0.0;
    std::vector<SceneObject> objects;

    Frame frame() const noexcept { return {width, height}; }

    std::size_t relation_count() const noexcept
    {
        std::size_t n = 0;
        for (const auto& o : objects) {
            n += o.relations.size();
        }
        return n;
    }

    const SceneObject* find(const std::string& id) const
    {
        for (const auto& o : objects) {
            if (o.id == id) {
                return &o;
            }
        }
        return nullptr;
    }

    bool operator==(const SceneGraph&) const = default;
};

/// Problems with a scene, empty when it is usable.
inline std::vector<std::string> validate_scene(const SceneGraph& scene)
{
    std::vector<std::string> problems;
    if (!(scene.width > 0.0) || !(scene.height > 0.0)) {
        problems.push_back(scene.image_id + ": width and height must be positive");
    }
    std::set<std::string> ids;
    for (const auto& o : scene.objects) {
        if (!ids.insert(o.id).second) {
            problems.push_back(scene.image_id + ": duplicate object id " + o.id);
        }
        if (!o.box.valid()) {
            problems.push_back(scene.image_id + ": object " + o.id + " has an invalid box");
        }
    }
    for (const auto& o : scene.objects) {
        for (const auto& r : o.relations) {
            if (ids.count(r.target_id) == 0) {
                problems.push_back(scene.image_id + ": object " + o.id + " relates to unknown " + r.target_id);
            }
        }
    }
    return problems;
}

// ---------------------------------------------------------------------------
// Co-occurrence

/// Symmetric count of scenes in which two categories co-exist.
class CoOccurrenceTable {
public:
    long long count(const std::string& a, const std::string& b) const
    {
        const auto it = counts_.find(key(a, b));
        return it == counts_.end() ? 0 : it->second;
    }

    void add(const std::string& a, const std::string& b, long long n)
    {
        if (n < 0) {
            throw Error(ErrorKind::InvalidArgument, "co-occurrence counts are non-negative");
        }
        counts_[key(a, b)] += n;
    }

    std::set<std::string> categories() const
    {
        std::set<std::string> out;
        for (const auto& [k, _] : counts_) {
            out.insert(k.first);
            out.insert(k.second);
        }
        return out;
    }

    /// Categories other than `category` with a positive count, by descending
    /// count then name.
    std::vector<std::string> ranked_partners(const std::string& category) const
    {
        std::vector<std::pair<long long, std::string>> ranked;
        for (const auto& [k, n] : counts_) {
            if (n <= 0) {
                continue;
            }
            if (k.first == category && k.second != category) {
                ranked.emplace_back(n, k.second);
            } else if (k.second == category && k.first != category) {
                ranked.emplace_back(n, k.first);
            }
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
            return x.first != y.first ? x.first > y.first : x.second < y.second;
        });
        std::vector<std::string> out;
        out.reserve(ranked.size());
        for (auto& [_, name] : ranked) {
            out.push_back(std::move(name));
        }
        return out;
    }

    /// Unordered pairs (a <= b) with their counts.
    const std::map<std::pair<std::string, std::string>, long long>& entries() const noexcept { return counts_; }

    void write_csv(std::ostream& out) const
    {
        out << "catA,catB,count\n";
        for (const auto& [k, n] : counts_) {
            out << k.first << ',' << k.second << ',' << n << '\n';
        }
    }

    static CoOccurrenceTable read_csv(std::istream& in)
    {
        CoOccurrenceTable table;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (line.empty() || (line_no == 1 && line.rfind("catA,", 0) == 0)) {
                continue;
            }
            const auto c1 = line.find(',');
            const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
            if (c2 == std::string::npos) {
                throw Error(ErrorKind::SchemaViolation, "cooc csv line " + std::to_string(line_no) + ": expected 3 fields");
            }
            long long n = 0;
            try {
                std::size_t used = 0;
                n = std::stoll(line.substr(c2 + 1), &used);
                if (used != line.size() - c2 - 1) {
                    throw std::invalid_argument("trailing characters");
                }
            } catch (const std::exception&) {
                throw Error(ErrorKind::SchemaViolation, "cooc csv line " + std::to_string(line_no) + ": bad count");
            }
            const auto a = line.substr(0, c1);
            const auto b = line.substr(c1 + 1, c2 - c1 - 1);
            // Files written with both orders of a pair carry the same count twice.
            if (table.counts_.count(key(a, b)) != 0 && a != b) {
                if (table.count(a, b) != n) {
                    throw Error(ErrorKind::SchemaViolation, "cooc csv: asymmetric counts for " + a + "," + b);
                }
                continue;
            }
            table.add(a, b, n);
        }
        return table;
    }

    bool operator==(const CoOccurrenceTable&) const = default;

private:
    static std::pair<std::string, std::string> key(const std::string& a, const std::string& b)
    {
        return a <= b ? std::make_pair(a, b) : std::make_pair(b, a);
    }

    std::map<std::pair<std::string, std::string>, long long> counts_;
};

inline CoOccurrenceTable build_cooccurrence(std::span<const SceneGraph> graphs)
{
    if (graphs.empty()) {
        throw Error(ErrorKind::EmptyCorpus, "no scene graphs to count co-occurrences over");
    }
    CoOccurrenceTable table;
    for (const auto& g : graphs) {
        std::set<std::string> present;
        for (const auto& o : g.objects) {
            present.insert(o.category);
        }
        for (auto a = present.begin(); a != present.end(); ++a) {
            for (auto b = a; b != present.end(); ++b) {
                table.add(*a, *b, 1);
            }
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// ROI resolution

/// Sorted, unique indices into SceneGraph::objects.
using RoiSet = std::vector<std::size_t>;

struct StepROIs {
    std::size_t step_index = 0;
    std::vector<RoiSet> roi_sets;
    bool fallback_used = false;

    RoiSet combined() const
    {
        RoiSet out;
        for (const auto& s : roi_sets) {
            out.insert(out.end(), s.begin(), s.end());
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    bool operator==(const StepROIs&) const = default;
};

struct ResolveOptions {
    /// Number of co-occurring categories used when a referent is absent.
    std::size_t k = 20;
    /// Category name -> canonical name, applied to both triplets and objects.
    std::map<std::string, std::string> synonyms;
    /// Restrict the category side of Relate to objects linked to the dep's ROIs.
    bool edge_aware_relate = false;
};

namespace detail {

inline const std::string& canonical(const std::string& name, const ResolveOptions& options)
{
    const auto it = options.synonyms.find(name);
    return it == options.synonyms.end() ? name : it->second;
}

template <typename Pred>
RoiSet select_objects(const SceneGraph& scene, Pred&& pred)
{
    RoiSet out;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        if (pred(scene.objects[i], i)) {
            out.push_back(i);
        }
    }
    return out;
}

inline RoiSet fallback_objects(const std::string& missing, const SceneGraph& scene, const CoOccurrenceTable& cooc,
                               const ResolveOptions& options)
{
    auto ranked = cooc.ranked_partners(missing);
    if (ranked.size() > options.k) {
        ranked.resize(options.k);
    }
    const std::set<std::string> chosen(ranked.begin(), ranked.end());
    return select_objects(scene, [&](const SceneObject& o, std::size_t) {
        return chosen.count(canonical(o.category, options)) != 0;
    });
}

inline bool contains(const RoiSet& set, std::size_t idx) { return std::binary_search(set.begin(), set.end(), idx); }

} // namespace detail

/// ROI sets for every step of a valid program on one scene.
///
///  - Select: scene objects of the category.
///  - Query/Verify: objects of the category among the dep's ROIs.
///  - Filter: the dep's ROIs having the attribute.
///  - Compare/And/Or: one set per dep, each that dep's combined ROIs.
///  - Relate: the dep's combined ROIs, then scene objects of the category.
///
/// A category that matches nothing is replaced by every object of the top-k
/// categories co-occurring with it (restricted to the dep's ROIs for
/// Query/Verify), and the step is marked fallback_used.
inline std::vector<StepROIs> resolve_rois(const ReasoningProgram& program, const SceneGraph& scene,
                                          const CoOccurrenceTable& cooc, const ResolveOptions& options = {})
{
    if (options.k < 1) {
        throw Error(ErrorKind::InvalidArgument, "fallback k must be at least 1");
    }
    if (const auto violations = validate_program(program); !violations.empty()) {
        throw Error(ErrorKind::MalformedDeps,
                    program.question_id + ": invalid program (" + violations.front().detail + ")");
    }

    std::vector<StepROIs> out;
    out.reserve(program.steps.size());
    for (std::size_t i = 0; i < program.steps.size(); ++i) {
        const auto& step = program.steps[i];
        const auto& t = step.triplet;
        StepROIs result{i, {}, false};

        const std::string category = t.category() ? detail::canonical(*t.category(), options) : std::string{};
        const auto of_category = [&](const SceneObject& o, std::size_t) {
            return detail::canonical(o.category, options) == category;
        };

        switch (t.op) {
        case AtomicOp::Select: {
            RoiSet direct = detail::select_objects(scene, of_category);
            if (direct.empty()) {
                direct = detail::fallback_objects(category, scene, cooc, options);
                result.fallback_used = true;
            }
            result.roi_sets.push_back(std::move(direct));
            break;
        }
        case AtomicOp::Query:
        case AtomicOp::Verify: {
            const RoiSet dep = out[step.deps.front()].combined();
            RoiSet direct;
            for (std::size_t idx : dep) {
                if (of_category(scene.objects[idx], idx)) {
                    direct.push_back(idx);
                }
            }
            if (direct.empty()) {
                for (std::size_t idx : detail::fallback_objects(category, scene, cooc, options)) {
                    if (detail::contains(dep, idx)) {
                        direct.push_back(idx);
                    }
                }
                result.fallback_used = true;
            }
            result.roi_sets.push_back(std::move(direct));
            break;
        }
        case AtomicOp::Filter: {
            RoiSet kept;
            for (std::size_t idx : out[step.deps.front()].combined()) {
                if (scene.objects[idx].has_attribute(*t.attribute)) {
                    kept.push_back(idx);
                }
            }
            result.roi_sets.push_back(std::move(kept));
            break;
        }
        case AtomicOp::Compare:
        case AtomicOp::And:
        case AtomicOp::Or:
            for (std::size_t d : step.deps) {
                result.roi_sets.push_back(out[d].combined());
            }
            break;
        case AtomicOp::Relate: {
            RoiSet dep = out[step.deps.front()].combined();
            RoiSet related = detail::select_objects(scene, of_category);
            if (related.empty()) {
                related = detail::fallback_objects(category, scene, cooc, options);
                result.fallback_used = true;
            } else if (options.edge_aware_relate) {
                std::set<std::string> dep_ids;
                for (std::size_t idx : dep) {
                    dep_ids.insert(scene.objects[idx].id);
                }
                const auto edge_matches = [&](const Relation& r) { return !t.attribute || r.name == *t.attribute; };
                RoiSet linked;
                for (std::size_t idx : related) {
                    const auto& obj = scene.objects[idx];
                    bool hit = std::any_of(obj.relations.begin(), obj.relations.end(), [&](const Relation& r) {
                        return edge_matches(r) && dep_ids.count(r.target_id) != 0;
                    });
                    for (std::size_t d = 0; !hit && d < dep.size(); ++d) {
                        const auto& src = scene.objects[dep[d]];
                        hit = std::any_of(src.relations.begin(), src.relations.end(), [&](const Relation& r) {
                            return edge_matches(r) && r.target_id == obj.id;
                        });
                    }
                    if (hit) {
                        linked.push_back(idx);
                    }
                }
                related = std::move(linked);
            }
            result.roi_sets.push_back(std::move(dep));
            result.roi_sets.push_back(std::move(related));
            break;
        }
        }
        out.push_back(std::move(result));
    }
    return out;
}

struct ScreeningCriteria {
    double min_resolution = 320.0;
    std::size_t min_relations = 16;
    double max_area_fraction = 0.04;
};

/// Whether a question on a scene passes the resolution, relationship-count
/// and ROI-area screens.
inline bool screen_question(const SceneGraph& scene, std::span<const StepROIs> rois,
                            const ScreeningCriteria& criteria = {})
{
    if (scene.width < criteria.min_resolution || scene.height < criteria.min_resolution) {
        return false;
    }
    if (scene.relation_count() < criteria.min_relations) {
        return false;
    }
    std::set<std::size_t> objects;
    for (const auto& step : rois) {
        for (const auto& set : step.roi_sets) {
            objects.insert(set.begin(), set.end());
        }
    }
    std::vector<BoundingBox> boxes;
    for (std::size_t idx : objects) {
        if (auto c = clip(scene.objects.at(idx).box, scene.frame())) {
            boxes.push_back(*c);
        }
    }
    return union_area(boxes) <= criteria.max_area_fraction * scene.width * scene.height;
}

} // namespace air
