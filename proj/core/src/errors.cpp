#include "tabdit/errors.hpp"

namespace tabdit {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::NegativeNotAllowed: return "NegativeNotAllowed";
        case ErrorCode::MagnitudeOverflow: return "MagnitudeOverflow";
        case ErrorCode::MalformedCode: return "MalformedCode";
        case ErrorCode::OutOfVocabulary: return "OutOfVocabulary";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::StepOutOfRange: return "StepOutOfRange";
        case ErrorCode::InvalidProbability: return "InvalidProbability";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::EmptySeries: return "EmptySeries";
        case ErrorCode::SeriesTooLong: return "SeriesTooLong";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::MissingLabelAttribute: return "MissingLabelAttribute";
        case ErrorCode::MalformedCsv: return "MalformedCsv";
        case ErrorCode::MixedTypeColumn: return "MixedTypeColumn";
        case ErrorCode::UnorderableSeries: return "UnorderableSeries";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::IoError: return "IoError";
    }
    return "UnknownError";
}

}  // namespace tabdit
