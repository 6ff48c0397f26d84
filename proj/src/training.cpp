#include "techinfer/training.hpp"

#include <string>

#include "techinfer/baseline.hpp"
#include "techinfer/error.hpp"

namespace techinfer {

ModelKind parse_model_kind(std::string_view text) {
    if (text == "wmf") return ModelKind::Wmf;
    if (text == "bpr") return ModelKind::Bpr;
    if (text == "popularity") return ModelKind::Popularity;
    throw Error(ErrorCode::InvalidArgument, "unknown model kind '" + std::string(text) + "'");
}

std::string_view to_string(ModelKind kind) noexcept {
    switch (kind) {
        case ModelKind::Wmf: return "wmf";
        case ModelKind::Bpr: return "bpr";
        case ModelKind::Popularity: return "popularity";
    }
    return "wmf";
}

FactorModel train_model(const ModelSpec& spec, const InteractionDataset& train, std::uint64_t seed) {
    const auto matrix = to_matrix(train);
    FactorModel model;
    switch (spec.kind) {
        case ModelKind::Wmf: {
            auto params = spec.wmf;
            params.seed = seed;
            model = train_wmf(matrix, params);
            break;
        }
        case ModelKind::Bpr: {
            auto params = spec.bpr;
            params.seed = seed;
            model = train_bpr(matrix, params);
            break;
        }
        case ModelKind::Popularity:
            model = train_top_techniques(matrix);
            break;
    }
    model.similarity = spec.similarity;
    attach_catalogs(model, train);
    return model;
}

}  // namespace techinfer
