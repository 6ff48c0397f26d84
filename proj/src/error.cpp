#include "techinfer/error.hpp"

namespace techinfer {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedRecord: return "malformed-record";
        case ErrorCode::InvalidTechniqueId: return "invalid-technique-id";
        case ErrorCode::EmptyInput: return "empty-input";
        case ErrorCode::InfeasibleSplit: return "infeasible-split";
        case ErrorCode::SingularSystem: return "singular-system";
        case ErrorCode::DimensionMismatch: return "dimension-mismatch";
        case ErrorCode::NoValidTriples: return "no-valid-triples";
        case ErrorCode::NoEvaluableEntities: return "no-evaluable-entities";
        case ErrorCode::EmptyObservation: return "empty-observation";
        case ErrorCode::EmptyPredictions: return "empty-predictions";
        case ErrorCode::PerplexityInfeasible: return "perplexity-infeasible";
        case ErrorCode::NonFiniteInput: return "non-finite-input";
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::ModelFormat: return "model-format";
        case ErrorCode::Io: return "io";
    }
    return "unknown";
}

}  // namespace techinfer
