#pragma once

#include <stdexcept>
#include <string>

namespace mmu {

enum class ErrorKind {
    // record / data-model validation
    MalformedLine,
    DuplicateCell,
    UnknownLanguage,
    UnknownInstance,
    ProbOutOfRange,
    SplitMismatch,
    MissingCell,
    MissingField,
    // metrics
    EmptyClass,
    SameLanguage,
    BaseInComparison,
    EmptyComparison,
    ZeroBaseline,
    ZeroLengthAnswer,
    PositiveLogProb,
    // objective / importance calculators
    EmptyBatch,
    MissingReference,
    UnnormalizedDistribution,
    SupportMismatch,
    EmptyInput,
    EmptyDataset,
    DimensionMismatch,
    // dataset generation
    ConstraintUnsatisfiable,
    UnknownAttribute,
    MissingTemplate,
    NameLost,
    // simulator / cli
    InvalidConfig,
    UnknownParam,
    MissingBaseline,
    // transport
    TranslatorUnavailable,
    JudgeUnavailable,
};

const char* to_string(ErrorKind kind);

/// Caller handed us invalid input or state. The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
public:
    ValidationError(ErrorKind kind, const std::string& message);
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

/// A backing service (translator, judge) failed. Never interpreted as a
/// verdict. The CLI maps these to exit code 3.
class TransportError : public std::runtime_error {
public:
    TransportError(ErrorKind kind, const std::string& message);
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace mmu
