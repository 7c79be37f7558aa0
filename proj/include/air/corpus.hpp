#pragma once

// On-disk corpus: scenes.json, programs.json, questions.json, fixations.json,
// proposals.json, cooc.csv and an optional maps/ directory of AIRM files.
// JSON shape errors raise SchemaViolation; ids that fail to resolve raise
// CrossReference.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "air/attention.hpp"
#include "air/error.hpp"
#include "air/program.hpp"
#include "air/scene.hpp"
#include "air/supervision.hpp"

namespace air {

using Json = nlohmann::json;

struct Question {
    std::string question_id;
    std::string image_id;
    ReasoningProgram program;
    std::vector<StepROIs> rois;
};

struct CorpusOptions {
    ResolveOptions resolve;
    LoweringMode mode = LoweringMode::Strict;
    std::optional<std::filesystem::path> alias_table;
};

struct Corpus {
    std::filesystem::path root;
    std::map<std::string, SceneGraph> scenes;
    std::map<std::string, Question> questions;
    /// One sequence per (question, subject), onset-ordered.
    std::vector<FixationSequence> fixations;
    /// Region proposals keyed by image id.
    std::map<std::string, ProposalSet> proposals;
    CoOccurrenceTable cooc;
    std::vector<LoweringWarning> warnings;

    const SceneGraph& scene_of(const Question& q) const { return scenes.at(q.image_id); }
    const SceneGraph& scene_of(const std::string& question_id) const
    {
        return scene_of(questions.at(question_id));
    }

    /// Sequences of one question, in storage order.
    std::vector<FixationSequence> fixations_of(const std::string& question_id) const
    {
        std::vector<FixationSequence> out;
        std::copy_if(fixations.begin(), fixations.end(), std::back_inserter(out),
                     [&](const FixationSequence& s) { return s.question_id == question_id; });
        return out;
    }
};

namespace detail {

[[noreturn]] inline void schema_error(const std::string& where, const std::string& what)
{
    throw Error(ErrorKind::SchemaViolation, where + ": " + what);
}

inline Json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read " + path.string());
    }
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        schema_error(path.filename().string(), e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) {
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    }
}

inline BoundingBox box_from_json(const Json& j, const std::string& where)
{
    if (j.is_array()) {
        if (j.size() != 4) {
            schema_error(where, "box must be [x, y, w, h]");
        }
        return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    }
    // GQA scene graphs carry the box as x/y/w/h fields.
    return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(), j.at("h").get<double>()};
}

inline Json box_to_json(const BoundingBox& b) { return Json::array({b.x, b.y, b.w, b.h}); }

} // namespace detail

// ---------------------------------------------------------------------------
// Scenes

/// scenes.json; GQA field names (name, x/y/w/h, relation object) are accepted.
inline std::map<std::string, SceneGraph> scenes_from_json(const Json& j)
{
    if (!j.is_object()) {
        detail::schema_error("scenes.json", "top level must be an object keyed by image id");
    }
    std::map<std::string, SceneGraph> out;
    for (const auto& [image_id, js] : j.items()) {
        const std::string where = "scenes.json " + image_id;
        try {
            SceneGraph g;
            g.image_id = image_id;
            g.width = js.at("width").get<double>();
            g.height = js.at("height").get<double>();
            for (const auto& [oid, jo] : js.at("objects").items()) {
                SceneObject o;
                o.id = oid;
                o.category = jo.contains("category") ? jo.at("category").get<std::string>()
                                                     : jo.at("name").get<std::string>();
                for (const auto& a : jo.value("attributes", Json::array())) {
                    o.attributes.insert(a.get<std::string>());
                }
                o.box = detail::box_from_json(jo.contains("box") ? jo.at("box") : jo, where + " " + oid);
                for (const auto& r : jo.value("relations", Json::array())) {
                    o.relations.push_back(
                        {r.at("name").get<std::string>(),
                         r.contains("target") ? r.at("target").get<std::string>() : r.at("object").get<std::string>()});
                }
                g.objects.push_back(std::move(o));
            }
            if (const auto problems = validate_scene(g); !problems.empty()) {
                detail::schema_error(where, problems.front());
            }
            out.emplace(image_id, std::move(g));
        } catch (const Json::exception& e) {
            detail::schema_error(where, e.what());
        }
    }
    return out;
}

inline Json scenes_to_json(const std::map<std::string, SceneGraph>& scenes)
{
    Json out = Json::object();
    for (const auto& [id, g] : scenes) {
        Json objects = Json::object();
        for (const auto& o : g.objects) {
            Json rel = Json::array();
            for (const auto& r : o.relations) {
                rel.push_back({{"name", r.name}, {"target", r.target_id}});
            }
            objects[o.id] = {{"category", o.category},
                             {"attributes", std::vector<std::string>(o.attributes.begin(), o.attributes.end())},
                             {"box", detail::box_to_json(o.box)},
                             {"relations", rel}};
        }
        out[id] = {{"width", g.width}, {"height", g.height}, {"objects", objects}};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Programs and aliases

inline std::map<std::string, std::vector<RawProgramEntry>> programs_from_json(const Json& j)
{
    if (!j.is_object()) {
        detail::schema_error("programs.json", "top level must be an object keyed by question id");
    }
    std::map<std::string, std::vector<RawProgramEntry>> out;
    for (const auto& [qid, lines] : j.items()) {
        try {
            auto& dst = out[qid];
            for (const auto& line : lines) {
                dst.push_back({line.at("text").get<std::string>(), line.value("deps", std::vector<long long>{})});
            }
        } catch (const Json::exception& e) {
            detail::schema_error("programs.json " + qid, e.what());
        }
    }
    return out;
}

inline Json programs_to_json(const std::map<std::string, std::vector<RawProgramEntry>>& programs)
{
    Json out = Json::object();
    for (const auto& [qid, lines] : programs) {
        Json arr = Json::array();
        for (const auto& l : lines) {
            arr.push_back({{"text", l.text}, {"deps", l.deps}});
        }
        out[qid] = arr;
    }
    return out;
}

inline AliasTable alias_table_from_json(const Json& j)
{
    if (!j.is_object()) {
        detail::schema_error("alias table", "top level must be an object keyed by pattern");
    }
    AliasTable table;
    for (const auto& [pattern, rule] : j.items()) {
        try {
            const auto op = parse_op(rule.at("op").get<std::string>());
            if (!op) {
                detail::schema_error("alias table " + pattern, "unknown op " + rule.at("op").dump());
            }
            AliasRule r{*op, {}, {}};
            if (rule.contains("attribute") && !rule.at("attribute").is_null()) {
                r.attribute = rule.at("attribute").get<std::string>();
            }
            if (rule.contains("category") && !rule.at("category").is_null()) {
                r.category = rule.at("category").get<std::string>();
            }
            table.add(pattern, std::move(r));
        } catch (const Json::exception& e) {
            detail::schema_error("alias table " + pattern, e.what());
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Fixations and proposals

/// fixations.json; records are split per subject and ordered by onset.
inline std::vector<FixationSequence> fixations_from_json(const Json& j)
{
    if (!j.is_object()) {
        detail::schema_error("fixations.json", "top level must be an object keyed by question id");
    }
    std::vector<FixationSequence> out;
    for (const auto& [qid, records] : j.items()) {
        std::map<std::string, FixationSequence> by_subject;
        try {
            for (const auto& r : records) {
                FixationRecord f;
                f.x = r.at("x").get<double>();
                f.y = r.at("y").get<double>();
                f.t_onset = r.at("t").get<double>();
                f.subject_id = r.at("subject").get<std::string>();
                if (r.contains("correct") && !r.at("correct").is_null()) {
                    f.correct = r.at("correct").get<bool>();
                }
                auto& seq = by_subject[f.subject_id];
                seq.question_id = qid;
                seq.fixations.push_back(std::move(f));
            }
        } catch (const Json::exception& e) {
            detail::schema_error("fixations.json " + qid, e.what());
        }
        for (auto& [_, seq] : by_subject) {
            std::stable_sort(seq.fixations.begin(), seq.fixations.end(),
                             [](const FixationRecord& a, const FixationRecord& b) { return a.t_onset < b.t_onset; });
            out.push_back(std::move(seq));
        }
    }
    return out;
}

inline Json fixations_to_json(std::span<const FixationSequence> sequences)
{
    Json out = Json::object();
    for (const auto& seq : sequences) {
        auto& arr = out[seq.question_id];
        if (arr.is_null()) {
            arr = Json::array();
        }
        for (const auto& f : seq.fixations) {
            arr.push_back({{"x", f.x},
                           {"y", f.y},
                           {"t", f.t_onset},
                           {"subject", f.subject_id},
                           {"correct", f.correct ? Json(*f.correct) : Json(nullptr)}});
        }
    }
    return out;
}

/// proposals.json: {image_id: [[x,y,w,h], ...]} or {image_id: {"boxes": [...], "features": [[...]]}}.
inline std::map<std::string, ProposalSet> proposals_from_json(const Json& j)
{
    if (!j.is_object()) {
        detail::schema_error("proposals.json", "top level must be an object keyed by image id");
    }
    std::map<std::string, ProposalSet> out;
    for (const auto& [image_id, jp] : j.items()) {
        const std::string where = "proposals.json " + image_id;
        try {
            ProposalSet set;
            const Json& boxes = jp.is_array() ? jp : jp.at("boxes");
            for (const auto& b : boxes) {
                set.boxes.push_back(detail::box_from_json(b, where));
            }
            if (jp.is_object() && jp.contains("features")) {
                set.features = jp.at("features").get<std::vector<std::vector<double>>>();
            }
            if (!set.consistent()) {
                detail::schema_error(where, "features do not match the boxes");
            }
            out.emplace(image_id, std::move(set));
        } catch (const Json::exception& e) {
            detail::schema_error(where, e.what());
        }
    }
    return out;
}

inline Json proposals_to_json(const std::map<std::string, ProposalSet>& proposals)
{
    Json out = Json::object();
    for (const auto& [id, set] : proposals) {
        Json boxes = Json::array();
        for (const auto& b : set.boxes) {
            boxes.push_back(detail::box_to_json(b));
        }
        if (set.features) {
            out[id] = {{"boxes", boxes}, {"features", *set.features}};
        } else {
            out[id] = boxes;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Whole corpus

/// Loads and cross-checks a corpus directory, lowering every program and
/// resolving its ROIs. Without questions.json a single-scene corpus maps
/// every question to that scene.
inline Corpus load_corpus(const std::filesystem::path& root, const CorpusOptions& options = {})
{
    namespace fs = std::filesystem;
    Corpus c;
    c.root = root;
    if (!fs::is_directory(root)) {
        throw Error(ErrorKind::Io, "corpus directory " + root.string() + " does not exist");
    }
    c.scenes = scenes_from_json(detail::read_json_file(root / "scenes.json"));
    const auto raw = programs_from_json(detail::read_json_file(root / "programs.json"));

    std::map<std::string, std::string> image_of;
    if (fs::exists(root / "questions.json")) {
        const Json jq = detail::read_json_file(root / "questions.json");
        if (!jq.is_object()) {
            detail::schema_error("questions.json", "top level must map question id to image id");
        }
        for (const auto& [qid, img] : jq.items()) {
            if (!img.is_string()) {
                detail::schema_error("questions.json " + qid, "image id must be a string");
            }
            image_of[qid] = img.get<std::string>();
        }
    }

    AliasTable aliases = AliasTable::builtin();
    if (options.alias_table) {
        aliases.merge(alias_table_from_json(detail::read_json_file(*options.alias_table)));
    }

    if (fs::exists(root / "cooc.csv")) {
        std::ifstream in(root / "cooc.csv");
        c.cooc = CoOccurrenceTable::read_csv(in);
    } else {
        std::vector<SceneGraph> graphs;
        for (const auto& [_, g] : c.scenes) {
            graphs.push_back(g);
        }
        c.cooc = build_cooccurrence(graphs);
    }

    for (const auto& [qid, lines] : raw) {
        Question q;
        q.question_id = qid;
        if (const auto it = image_of.find(qid); it != image_of.end()) {
            q.image_id = it->second;
        } else if (c.scenes.size() == 1 && image_of.empty()) {
            q.image_id = c.scenes.begin()->first;
        } else {
            throw Error(ErrorKind::CrossReference, "question " + qid + " has no image in questions.json");
        }
        if (!c.scenes.count(q.image_id)) {
            throw Error(ErrorKind::CrossReference, "question " + qid + " refers to unknown image " + q.image_id);
        }
        q.program = parse_program(qid, lines, aliases, options.mode, &c.warnings);
        q.rois = resolve_rois(q.program, c.scenes.at(q.image_id), c.cooc, options.resolve);
        c.questions.emplace(qid, std::move(q));
    }
    for (const auto& [qid, _] : image_of) {
        if (!c.questions.count(qid)) {
            throw Error(ErrorKind::CrossReference, "questions.json lists " + qid + " which has no program");
        }
    }

    if (fs::exists(root / "fixations.json")) {
        c.fixations = fixations_from_json(detail::read_json_file(root / "fixations.json"));
        for (const auto& seq : c.fixations) {
            if (!c.questions.count(seq.question_id)) {
                throw Error(ErrorKind::CrossReference, "fixations refer to unknown question " + seq.question_id);
            }
        }
    }
    if (fs::exists(root / "proposals.json")) {
        c.proposals = proposals_from_json(detail::read_json_file(root / "proposals.json"));
        for (const auto& [img, _] : c.proposals) {
            if (!c.scenes.count(img)) {
                throw Error(ErrorKind::CrossReference, "proposals refer to unknown image " + img);
            }
        }
    }
    return c;
}

/// Writes every populated part of the corpus; programs are written in their
/// lowered text form.
inline void save_corpus(const Corpus& c, const std::filesystem::path& root)
{
    std::filesystem::create_directories(root);
    detail::write_text_file(root / "scenes.json", scenes_to_json(c.scenes).dump(1) + "\n");
    std::map<std::string, std::vector<RawProgramEntry>> programs;
    Json questions = Json::object();
    for (const auto& [qid, q] : c.questions) {
        programs[qid] = to_entries(q.program);
        questions[qid] = q.image_id;
    }
    detail::write_text_file(root / "programs.json", programs_to_json(programs).dump(1) + "\n");
    detail::write_text_file(root / "questions.json", questions.dump(1) + "\n");
    if (!c.fixations.empty()) {
        detail::write_text_file(root / "fixations.json", fixations_to_json(c.fixations).dump(1) + "\n");
    }
    if (!c.proposals.empty()) {
        detail::write_text_file(root / "proposals.json", proposals_to_json(c.proposals).dump(1) + "\n");
    }
    std::ostringstream cooc;
    c.cooc.write_csv(cooc);
    detail::write_text_file(root / "cooc.csv", cooc.str());
}

} // namespace air
