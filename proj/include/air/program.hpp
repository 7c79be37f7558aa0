#pragma once

// Reasoning programs: the eight atomic operations, their triplet form, and
// lowering of raw functional-program lines into a validated step sequence.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "air/error.hpp"

namespace air {

enum class AtomicOp : std::uint8_t { Select, Filter, Query, Verify, Compare, Relate, And, Or };

inline constexpr std::size_t kNumOps = 8;

inline constexpr std::array<AtomicOp, kNumOps> kAllOps = {AtomicOp::Select,  AtomicOp::Filter, AtomicOp::Query,
                                                          AtomicOp::Verify,  AtomicOp::Compare, AtomicOp::Relate,
                                                          AtomicOp::And,     AtomicOp::Or};

constexpr std::string_view to_string(AtomicOp op) noexcept
{
    switch (op) {
    case AtomicOp::Select: return "select";
    case AtomicOp::Filter: return "filter";
    case AtomicOp::Query: return "query";
    case AtomicOp::Verify: return "verify";
    case AtomicOp::Compare: return "compare";
    case AtomicOp::Relate: return "relate";
    case AtomicOp::And: return "and";
    case AtomicOp::Or: return "or";
    }
    return "?";
}

/// Case-insensitive lookup of an operation name ("Select", "select", ...).
inline std::optional<AtomicOp> parse_op(std::string_view name)
{
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (AtomicOp op : kAllOps) {
        if (to_string(op) == lower) {
            return op;
        }
    }
    return std::nullopt;
}

constexpr std::size_t op_index(AtomicOp op) noexcept { return static_cast<std::size_t>(op); }

/// Operations whose steps look up a category in the scene.
constexpr bool refers_to_category(AtomicOp op) noexcept
{
    return op == AtomicOp::Select || op == AtomicOp::Query || op == AtomicOp::Verify || op == AtomicOp::Relate;
}

/// <operation, attribute, category>. Compare may carry an ordered pair of
/// categories; every other operation carries at most one.
struct OperationTriplet {
    AtomicOp op = AtomicOp::Select;
    std::optional<std::string> attribute;
    std::vector<std::string> categories;

    const std::string* category() const noexcept { return categories.empty() ? nullptr : &categories.front(); }

    bool operator==(const OperationTriplet&) const = default;
};

struct ProgramStep {
    OperationTriplet triplet;
    std::vector<std::size_t> deps;

    bool operator==(const ProgramStep&) const = default;
};

struct ReasoningProgram {
    std::string question_id;
    std::vector<ProgramStep> steps;

    bool operator==(const ReasoningProgram&) const = default;
};

/// One un-lowered program line. Deps are signed so that negative indices in
/// input files can be reported instead of wrapping.
struct RawProgramEntry {
    std::string text;
    std::vector<long long> deps;
};

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind {
    EmptyProgram,
    ForwardDep,
    ArityViolation,
    MissingCategory,
    MissingAttribute,
    UnexpectedArgument,
};

constexpr std::string_view to_string(ViolationKind kind) noexcept
{
    switch (kind) {
    case ViolationKind::EmptyProgram: return "EmptyProgram";
    case ViolationKind::ForwardDep: return "ForwardDep";
    case ViolationKind::ArityViolation: return "ArityViolation";
    case ViolationKind::MissingCategory: return "MissingCategory";
    case ViolationKind::MissingAttribute: return "MissingAttribute";
    case ViolationKind::UnexpectedArgument: return "UnexpectedArgument";
    }
    return "?";
}

struct Violation {
    ViolationKind kind;
    std::size_t step = 0;
    std::string detail;
};

inline bool arity_ok(AtomicOp op, std::size_t n_deps) noexcept
{
    switch (op) {
    case AtomicOp::Select: return n_deps == 0;
    case AtomicOp::Filter:
    case AtomicOp::Query:
    case AtomicOp::Verify:
    case AtomicOp::Relate: return n_deps == 1;
    case AtomicOp::Compare:
    case AtomicOp::And:
    case AtomicOp::Or: return n_deps >= 2;
    }
    return false;
}

/// Every breached program invariant, one record per breach. Empty iff valid.
inline std::vector<Violation> validate_program(const ReasoningProgram& program)
{
    std::vector<Violation> out;
    if (program.steps.empty()) {
        out.push_back({ViolationKind::EmptyProgram, 0, "program has no steps"});
        return out;
    }
    for (std::size_t i = 0; i < program.steps.size(); ++i) {
        const auto& step = program.steps[i];
        const auto& t = step.triplet;
        const auto name = std::string(to_string(t.op));

        if (std::any_of(step.deps.begin(), step.deps.end(), [i](std::size_t d) { return d >= i; })) {
            out.push_back({ViolationKind::ForwardDep, i, "dependency does not point to an earlier step"});
        }
        if (!arity_ok(t.op, step.deps.size())) {
            out.push_back({ViolationKind::ArityViolation, i,
                           name + " has " + std::to_string(step.deps.size()) + " dependencies"});
        }

        const bool has_category = t.category() != nullptr && !t.category()->empty();
        const bool has_attribute = t.attribute.has_value() && !t.attribute->empty();
        if (refers_to_category(t.op) && !has_category) {
            out.push_back({ViolationKind::MissingCategory, i, name + " needs a category"});
        }
        if (t.op == AtomicOp::Filter && !has_attribute) {
            out.push_back({ViolationKind::MissingAttribute, i, "filter needs an attribute"});
        }
        if ((t.op == AtomicOp::And || t.op == AtomicOp::Or) && (t.attribute || !t.categories.empty())) {
            out.push_back({ViolationKind::UnexpectedArgument, i, name + " takes no attribute or category"});
        }
        const std::size_t max_categories = t.op == AtomicOp::Compare ? 2 : 1;
        if (t.categories.size() > max_categories) {
            out.push_back({ViolationKind::UnexpectedArgument, i, name + " has too many categories"});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lowering rules

inline std::vector<std::string> split_words(std::string_view text)
{
    std::vector<std::string> words;
    std::istringstream in{std::string(text)};
    for (std::string w; in >> w;) {
        words.push_back(std::move(w));
    }
    return words;
}

inline std::string join_words(const std::vector<std::string>& words, std::size_t begin, std::size_t end)
{
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        if (!out.empty()) {
            out += ' ';
        }
        out += words[i];
    }
    return out;
}

/// What a matched prefix lowers to. Slots left unset are filled from the
/// words that follow the prefix.
struct AliasRule {
    AtomicOp op = AtomicOp::Select;
    std::optional<std::string> attribute;
    std::optional<std::string> category;

    bool operator==(const AliasRule&) const = default;
};

/// Prefix table from whitespace-split operation text to triplet rules,
/// matched longest prefix first.
class AliasTable {
public:
    /// Rules for the documented GQA operation words.
    static AliasTable builtin()
    {
        AliasTable table;
        table.add("select", {AtomicOp::Select, {}, {}});
        table.add("filter", {AtomicOp::Filter, {}, {}});
        table.add("query", {AtomicOp::Query, {}, {}});
        table.add("choose", {AtomicOp::Query, {}, {}});
        table.add("verify", {AtomicOp::Verify, {}, {}});
        table.add("exist", {AtomicOp::Verify, {}, {}});
        table.add("compare", {AtomicOp::Compare, {}, {}});
        table.add("different", {AtomicOp::Compare, {}, {}});
        table.add("same", {AtomicOp::Compare, {}, {}});
        table.add("relate", {AtomicOp::Relate, {}, {}});
        table.add("and", {AtomicOp::And, {}, {}});
        table.add("or", {AtomicOp::Or, {}, {}});
        return table;
    }

    void add(std::string_view pattern, AliasRule rule)
    {
        auto words = split_words(pattern);
        if (words.empty()) {
            throw Error(ErrorKind::SchemaViolation, "alias pattern is empty");
        }
        rules_[std::move(words)] = std::move(rule);
    }

    /// Entries of `other` take precedence over existing ones.
    void merge(const AliasTable& other)
    {
        for (const auto& [words, rule] : other.rules_) {
            rules_[words] = rule;
        }
    }

    struct Match {
        std::size_t length = 0;
        const AliasRule* rule = nullptr;
    };

    Match match(const std::vector<std::string>& words) const
    {
        for (std::size_t len = words.size(); len > 0; --len) {
            std::vector<std::string> prefix(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(len));
            if (auto it = rules_.find(prefix); it != rules_.end()) {
                return {len, &it->second};
            }
        }
        return {};
    }

    std::size_t size() const noexcept { return rules_.size(); }

private:
    std::map<std::vector<std::string>, AliasRule> rules_;
};

/// Lowers one operation text into a triplet. Throws UnknownOperation when no
/// rule matches or the remaining words do not fit the operation's slots.
inline OperationTriplet lower_operation(std::string_view text, const AliasTable& table)
{
    const auto words = split_words(text);
    const auto fail = [&](const std::string& why) -> Error {
        return Error(ErrorKind::UnknownOperation, "'" + std::string(text) + "': " + why);
    };
    if (words.empty()) {
        throw fail("empty operation text");
    }
    const auto match = table.match(words);
    if (match.rule == nullptr) {
        throw fail("no rule or alias matches");
    }

    const AliasRule& rule = *match.rule;
    std::vector<std::string> rest(words.begin() + static_cast<std::ptrdiff_t>(match.length), words.end());
    OperationTriplet t;
    t.op = rule.op;
    t.attribute = rule.attribute;
    if (rule.category) {
        t.categories.push_back(*rule.category);
    }

    switch (rule.op) {
    case AtomicOp::And:
    case AtomicOp::Or:
        if (!rest.empty() || t.attribute || !t.categories.empty()) {
            throw fail(std::string(to_string(rule.op)) + " takes no arguments");
        }
        break;

    case AtomicOp::Select:
        if (t.categories.empty()) {
            if (rest.empty()) {
                throw fail("select needs a category");
            }
            t.categories.push_back(join_words(rest, 0, rest.size()));
        } else if (!rest.empty()) {
            throw fail("unexpected words after a fixed category");
        }
        break;

    case AtomicOp::Filter: {
        std::size_t next = 0;
        if (!t.attribute) {
            if (rest.empty()) {
                throw fail("filter needs an attribute");
            }
            t.attribute = rest[next++];
        }
        if (next < rest.size()) {
            if (!t.categories.empty()) {
                throw fail("unexpected words after a fixed category");
            }
            t.categories.push_back(join_words(rest, next, rest.size()));
        }
        break;
    }

    case AtomicOp::Query:
    case AtomicOp::Verify:
    case AtomicOp::Relate: {
        if (!t.categories.empty()) {
            if (!t.attribute && !rest.empty()) {
                t.attribute = join_words(rest, 0, rest.size());
            } else if (!rest.empty()) {
                throw fail("unexpected words after fixed slots");
            }
            break;
        }
        if (rest.empty()) {
            throw fail(std::string(to_string(rule.op)) + " needs a category");
        }
        if (!t.attribute && rest.size() >= 2) {
            t.attribute = rest.front();
            t.categories.push_back(join_words(rest, 1, rest.size()));
        } else {
            t.categories.push_back(join_words(rest, 0, rest.size()));
        }
        break;
    }

    case AtomicOp::Compare: {
        std::size_t next = 0;
        if (!t.attribute && !rest.empty()) {
            t.attribute = rest[next++];
        }
        std::vector<std::string> tail(rest.begin() + static_cast<std::ptrdiff_t>(next), rest.end());
        const auto conj = std::find(tail.begin(), tail.end(), "and");
        if (conj != tail.end()) {
            const auto split = static_cast<std::size_t>(conj - tail.begin());
            const auto left = join_words(tail, 0, split);
            const auto right = join_words(tail, split + 1, tail.size());
            if (left.empty() || right.empty()) {
                throw fail("compare expects '<category> and <category>'");
            }
            t.categories.push_back(left);
            t.categories.push_back(right);
        } else {
            for (auto& w : tail) {
                t.categories.push_back(std::move(w));
            }
        }
        if (t.categories.size() > 2) {
            throw fail("compare takes at most two categories");
        }
        break;
    }
    }
    return t;
}

/// Canonical text of a triplet; lowering it with the builtin table yields the
/// same triplet for single-word attributes.
inline std::string to_text(const OperationTriplet& t)
{
    std::string out(to_string(t.op));
    const auto append = [&out](const std::string& s) {
        out += ' ';
        out += s;
    };
    switch (t.op) {
    case AtomicOp::And:
    case AtomicOp::Or: break;
    case AtomicOp::Compare:
        if (t.attribute) {
            append(*t.attribute);
        }
        if (t.categories.size() == 2) {
            append(t.categories[0]);
            append("and");
            append(t.categories[1]);
        } else if (t.categories.size() == 1) {
            append(t.categories[0]);
        }
        break;
    default:
        if (t.attribute) {
            append(*t.attribute);
        }
        if (t.category()) {
            append(*t.category());
        }
        break;
    }
    return out;
}

inline std::vector<RawProgramEntry> to_entries(const ReasoningProgram& program)
{
    std::vector<RawProgramEntry> out;
    out.reserve(program.steps.size());
    for (const auto& step : program.steps) {
        RawProgramEntry entry{to_text(step.triplet), {}};
        for (std::size_t d : step.deps) {
            entry.deps.push_back(static_cast<long long>(d));
        }
        out.push_back(std::move(entry));
    }
    return out;
}

enum class LoweringMode {
    Strict,  ///< unknown operation text is an error
    Lenient, ///< unknown lines are dropped; dependents inherit the dropped line's deps
};

struct LoweringWarning {
    std::size_t line = 0;
    std::string message;
};

/// Parses and lowers one question's raw program lines.
///
/// Dependency indices must lie in [0, lines.size()). After lowering, the
/// program must satisfy validate_program; structural breaches (forward or
/// cyclic deps, arity) raise MalformedDeps.
inline ReasoningProgram parse_program(std::string question_id, const std::vector<RawProgramEntry>& lines,
                                      const AliasTable& table = AliasTable::builtin(),
                                      LoweringMode mode = LoweringMode::Strict,
                                      std::vector<LoweringWarning>* warnings = nullptr)
{
    if (lines.empty()) {
        throw Error(ErrorKind::MalformedDeps, question_id + ": program has no lines");
    }
    const auto n = lines.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (lines[i].text.empty()) {
            throw Error(ErrorKind::UnknownOperation, question_id + " line " + std::to_string(i) + ": empty text");
        }
        for (long long d : lines[i].deps) {
            if (d < 0 || static_cast<std::size_t>(d) >= n) {
                throw Error(ErrorKind::MalformedDeps, question_id + " line " + std::to_string(i) +
                                                          ": dependency " + std::to_string(d) + " out of range");
            }
            if (static_cast<std::size_t>(d) >= i) {
                throw Error(ErrorKind::MalformedDeps, question_id + " line " + std::to_string(i) +
                                                          ": dependency " + std::to_string(d) +
                                                          " does not precede it");
            }
        }
    }

    // For every source line: its new index, or the set of kept lines it
    // stands for when it was dropped.
    std::vector<std::optional<std::size_t>> new_index(n);
    std::vector<std::vector<std::size_t>> stands_for(n);

    ReasoningProgram program;
    program.question_id = std::move(question_id);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> deps;
        for (long long d : lines[i].deps) {
            const auto& mapped = stands_for[static_cast<std::size_t>(d)];
            for (std::size_t m : mapped) {
                if (std::find(deps.begin(), deps.end(), m) == deps.end()) {
                    deps.push_back(m);
                }
            }
        }
        try {
            OperationTriplet t = lower_operation(lines[i].text, table);
            new_index[i] = program.steps.size();
            stands_for[i] = {program.steps.size()};
            program.steps.push_back({std::move(t), std::move(deps)});
        } catch (const Error& e) {
            const std::string message = program.question_id + " line " + std::to_string(i) + " " + e.what();
            if (mode == LoweringMode::Strict) {
                throw Error(ErrorKind::UnknownOperation, message);
            }
            if (warnings) {
                warnings->push_back({i, message});
            }
            stands_for[i] = std::move(deps);
        }
    }

    for (const auto& v : validate_program(program)) {
        const auto kind = (v.kind == ViolationKind::ForwardDep || v.kind == ViolationKind::ArityViolation ||
                           v.kind == ViolationKind::EmptyProgram)
                              ? ErrorKind::MalformedDeps
                              : ErrorKind::UnknownOperation;
        throw Error(kind, program.question_id + " step " + std::to_string(v.step) + ": " +
                              std::string(to_string(v.kind)) + " (" + v.detail + ")");
    }
    return program;
}

} // namespace air
