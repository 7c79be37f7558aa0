#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace air {

enum class ErrorKind {
    UnknownOperation,
    MalformedDeps,
    SchemaViolation,
    CrossReference,
    EmptyCorpus,
    NoFixations,
    BadEdges,
    LengthMismatch,
    ShapeMismatch,
    InvalidArgument,
    ZeroAreaBox,
    ConstantInput,
    TooFewSubjects,
    NoProposals,
    NotADistribution,
    MaxStepsExceeded,
    NoSteps,
    Divergence,
    InsufficientData,
    EmptyGroup,
    Io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::UnknownOperation: return "UnknownOperation";
    case ErrorKind::MalformedDeps: return "MalformedDeps";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::CrossReference: return "CrossReference";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::NoFixations: return "NoFixations";
    case ErrorKind::BadEdges: return "BadEdges";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ZeroAreaBox: return "ZeroAreaBox";
    case ErrorKind::ConstantInput: return "ConstantInput";
    case ErrorKind::TooFewSubjects: return "TooFewSubjects";
    case ErrorKind::NoProposals: return "NoProposals";
    case ErrorKind::NotADistribution: return "NotADistribution";
    case ErrorKind::MaxStepsExceeded: return "MaxStepsExceeded";
    case ErrorKind::NoSteps: return "NoSteps";
    case ErrorKind::Divergence: return "Divergence";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::EmptyGroup: return "EmptyGroup";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

/// Process exit code for an error surfaced by the command layer.
/// 2: input does not fit its schema, 3: ids fail to cross-reference, 4: numeric divergence.
constexpr int exit_code(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::CrossReference: return 3;
    case ErrorKind::Divergence: return 4;
    case ErrorKind::Io: return 1;
    default: return 2;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace air
