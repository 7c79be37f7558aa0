#include <gtest/gtest.h>

#include "air/program.hpp"
#include "generators.hpp"

using namespace air;

namespace {

std::vector<RawProgramEntry> lines(std::initializer_list<RawProgramEntry> l) { return l; }

bool has_kind(const std::vector<Violation>& v, ViolationKind kind, std::size_t step)
{
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.kind == kind && x.step == step; });
}

} // namespace

TEST(ParseProgram, SelectThenFilterSize)
{
    const auto p = parse_program("q1", lines({{"select table", {}}, {"filter size table", {0}}}));
    ASSERT_EQ(p.steps.size(), 2u);
    EXPECT_EQ(p.steps[0].triplet, (OperationTriplet{AtomicOp::Select, std::nullopt, {"table"}}));
    EXPECT_TRUE(p.steps[0].deps.empty());
    EXPECT_EQ(p.steps[1].triplet, (OperationTriplet{AtomicOp::Filter, "size", {"table"}}));
    EXPECT_EQ(p.steps[1].deps, (std::vector<std::size_t>{0}));
}

TEST(ParseProgram, SingleSelect)
{
    const auto p = parse_program("q", lines({{"select cat", {}}}));
    ASSERT_EQ(p.steps.size(), 1u);
    EXPECT_EQ(p.steps[0].triplet.op, AtomicOp::Select);
    EXPECT_EQ(*p.steps[0].triplet.category(), "cat");
    EXPECT_FALSE(p.steps[0].triplet.attribute);
}

TEST(ParseProgram, DifferentColorLowersToCompare)
{
    const auto p = parse_program(
        "q", lines({{"select cup", {}}, {"select plate", {}}, {"different color cup and plate", {0, 1}}}));
    const auto& t = p.steps[2].triplet;
    EXPECT_EQ(t.op, AtomicOp::Compare);
    EXPECT_EQ(t.attribute, std::optional<std::string>("color"));
    EXPECT_EQ(t.categories, (std::vector<std::string>{"cup", "plate"}));
    EXPECT_EQ(p.steps[2].deps, (std::vector<std::size_t>{0, 1}));
}

TEST(ParseProgram, UnknownOperationNamesTheLine)
{
    try {
        parse_program("q7", lines({{"select cat", {}}, {"frobnicate cat", {0}}}));
        FAIL() << "expected UnknownOperation";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnknownOperation);
        EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("frobnicate"), std::string::npos);
    }
}

TEST(ParseProgram, MalformedDeps)
{
    const auto kind_of = [](const std::vector<RawProgramEntry>& l) {
        try {
            parse_program("q", l);
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::Io;
    };
    EXPECT_EQ(kind_of(lines({{"select cat", {1}}, {"select dog", {}}})), ErrorKind::MalformedDeps);
    EXPECT_EQ(kind_of(lines({{"select cat", {}}, {"filter red cat", {1}}})), ErrorKind::MalformedDeps);
    EXPECT_EQ(kind_of(lines({{"select cat", {}}, {"and", {0}}})), ErrorKind::MalformedDeps);
    EXPECT_EQ(kind_of(lines({{"select cat", {}}, {"filter red", {5}}})), ErrorKind::MalformedDeps);
    EXPECT_EQ(kind_of(lines({{"select cat", {}}, {"filter red", {-1}}})), ErrorKind::MalformedDeps);
    EXPECT_EQ(kind_of({}), ErrorKind::MalformedDeps);
}

TEST(ParseProgram, LenientSkipsUnknownLinesAndRewiresDeps)
{
    std::vector<LoweringWarning> warnings;
    const auto p = parse_program("q",
                                 lines({{"select cat", {}}, {"mystery op", {0}}, {"filter red cat", {1}}}),
                                 AliasTable::builtin(), LoweringMode::Lenient, &warnings);
    ASSERT_EQ(p.steps.size(), 2u);
    EXPECT_EQ(p.steps[1].triplet.op, AtomicOp::Filter);
    EXPECT_EQ(p.steps[1].deps, (std::vector<std::size_t>{0}));
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_EQ(warnings[0].line, 1u);
}

TEST(ParseProgram, UserAliasesWinByLongestPrefix)
{
    AliasTable table = AliasTable::builtin();
    AliasTable user;
    user.add("verify color", {AtomicOp::Verify, "color", std::nullopt});
    user.add("choose rel", {AtomicOp::Relate, std::nullopt, std::nullopt});
    table.merge(user);

    const auto a = lower_operation("verify color cup", table);
    EXPECT_EQ(a, (OperationTriplet{AtomicOp::Verify, "color", {"cup"}}));
    const auto b = lower_operation("choose rel on table", table);
    EXPECT_EQ(b, (OperationTriplet{AtomicOp::Relate, "on", {"table"}}));
    const auto c = lower_operation("choose color cup", table);
    EXPECT_EQ(c, (OperationTriplet{AtomicOp::Query, "color", {"cup"}}));
}

TEST(ParseProgram, ArgumentShapesAreChecked)
{
    EXPECT_THROW(lower_operation("select", AliasTable::builtin()), Error);
    EXPECT_THROW(lower_operation("and cup", AliasTable::builtin()), Error);
    EXPECT_THROW(lower_operation("filter", AliasTable::builtin()), Error);
    EXPECT_THROW(lower_operation("compare color a b c", AliasTable::builtin()), Error);
    EXPECT_EQ(lower_operation("select tennis racket", AliasTable::builtin()).categories,
              (std::vector<std::string>{"tennis racket"}));
}

TEST(ValidateProgram, ValidTwoStep)
{
    ReasoningProgram p{"q", {{{AtomicOp::Select, {}, {"cat"}}, {}}, {{AtomicOp::Filter, "red", {}}, {0}}}};
    EXPECT_TRUE(validate_program(p).empty());
}

TEST(ValidateProgram, AndWithOneDep)
{
    ReasoningProgram p{"q", {{{AtomicOp::Select, {}, {"cat"}}, {}}, {{AtomicOp::And, {}, {}}, {0}}}};
    const auto v = validate_program(p);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, ViolationKind::ArityViolation);
    EXPECT_EQ(v[0].step, 1u);
}

TEST(ValidateProgram, ForwardDep)
{
    ReasoningProgram p{"q", {{{AtomicOp::Select, {}, {"cat"}}, {}}, {{AtomicOp::Filter, "red", {}}, {1}}}};
    const auto v = validate_program(p);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, ViolationKind::ForwardDep);
    EXPECT_EQ(v[0].step, 1u);
}

TEST(ValidateProgram, OneRecordPerBreach)
{
    ReasoningProgram p{"q",
                       {{{AtomicOp::Select, {}, {}}, {}},
                        {{AtomicOp::Filter, {}, {}}, {0}},
                        {{AtomicOp::Or, "x", {}}, {0, 5}}}};
    const auto v = validate_program(p);
    EXPECT_TRUE(has_kind(v, ViolationKind::MissingCategory, 0));
    EXPECT_TRUE(has_kind(v, ViolationKind::MissingAttribute, 1));
    EXPECT_TRUE(has_kind(v, ViolationKind::ForwardDep, 2));
    EXPECT_TRUE(has_kind(v, ViolationKind::UnexpectedArgument, 2));
    EXPECT_EQ(v.size(), 4u);
    EXPECT_TRUE(has_kind(validate_program(ReasoningProgram{}), ViolationKind::EmptyProgram, 0));
}

TEST(ProgramProperties, RoundTripDeterminismAndValidity)
{
    Rng rng(42);
    for (int trial = 0; trial < 500; ++trial) {
        const ReasoningProgram p = gen::random_program(rng, "q" + std::to_string(trial));
        ASSERT_TRUE(validate_program(p).empty());
        const auto entries = to_entries(p);
        const auto once = parse_program(p.question_id, entries);
        const auto twice = parse_program(p.question_id, entries);
        EXPECT_EQ(once, p) << "round trip failed on trial " << trial;
        EXPECT_EQ(once, twice);
        EXPECT_TRUE(validate_program(once).empty());
    }
}

TEST(AtomicOp, ExactlyEightNamedKinds)
{
    std::set<std::string_view> names;
    for (AtomicOp op : kAllOps) {
        names.insert(to_string(op));
        EXPECT_EQ(parse_op(to_string(op)), op);
    }
    EXPECT_EQ(names.size(), 8u);
    EXPECT_EQ(parse_op("Compare"), AtomicOp::Compare);
    EXPECT_FALSE(parse_op("exist"));
}
