#include "mmu/errors.hpp"

namespace mmu {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MalformedLine:            return "MalformedLine";
        case ErrorKind::DuplicateCell:            return "DuplicateCell";
        case ErrorKind::UnknownLanguage:          return "UnknownLanguage";
        case ErrorKind::UnknownInstance:          return "UnknownInstance";
        case ErrorKind::ProbOutOfRange:           return "ProbOutOfRange";
        case ErrorKind::SplitMismatch:            return "SplitMismatch";
        case ErrorKind::MissingCell:              return "MissingCell";
        case ErrorKind::MissingField:             return "MissingField";
        case ErrorKind::EmptyClass:               return "EmptyClass";
        case ErrorKind::SameLanguage:             return "SameLanguage";
        case ErrorKind::BaseInComparison:         return "BaseInComparison";
        case ErrorKind::EmptyComparison:          return "EmptyComparison";
        case ErrorKind::ZeroBaseline:             return "ZeroBaseline";
        case ErrorKind::ZeroLengthAnswer:         return "ZeroLengthAnswer";
        case ErrorKind::PositiveLogProb:          return "PositiveLogProb";
        case ErrorKind::EmptyBatch:               return "EmptyBatch";
        case ErrorKind::MissingReference:         return "MissingReference";
        case ErrorKind::UnnormalizedDistribution: return "UnnormalizedDistribution";
        case ErrorKind::SupportMismatch:          return "SupportMismatch";
        case ErrorKind::EmptyInput:               return "EmptyInput";
        case ErrorKind::EmptyDataset:             return "EmptyDataset";
        case ErrorKind::DimensionMismatch:        return "DimensionMismatch";
        case ErrorKind::ConstraintUnsatisfiable:  return "ConstraintUnsatisfiable";
        case ErrorKind::UnknownAttribute:         return "UnknownAttribute";
        case ErrorKind::MissingTemplate:          return "MissingTemplate";
        case ErrorKind::NameLost:                 return "NameLost";
        case ErrorKind::InvalidConfig:            return "InvalidConfig";
        case ErrorKind::UnknownParam:             return "UnknownParam";
        case ErrorKind::MissingBaseline:          return "MissingBaseline";
        case ErrorKind::TranslatorUnavailable:    return "TranslatorUnavailable";
        case ErrorKind::JudgeUnavailable:         return "JudgeUnavailable";
    }
    return "UnknownError";
}

static std::string prefixed(ErrorKind kind, const std::string& message) {
    return std::string(to_string(kind)) + ": " + message;
}

ValidationError::ValidationError(ErrorKind kind, const std::string& message)
    : std::runtime_error(prefixed(kind, message)), kind_(kind) {}

TransportError::TransportError(ErrorKind kind, const std::string& message)
    : std::runtime_error(prefixed(kind, message)), kind_(kind) {}

} // namespace mmu
