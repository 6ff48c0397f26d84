#ifndef TECHINFER_TRAINING_HPP
#define TECHINFER_TRAINING_HPP

#include <cstdint>
#include <string_view>

#include "techinfer/bpr.hpp"
#include "techinfer/dataset.hpp"
#include "techinfer/model.hpp"
#include "techinfer/wmf.hpp"

namespace techinfer {

enum class ModelKind { Wmf, Bpr, Popularity };

ModelKind parse_model_kind(std::string_view text);
std::string_view to_string(ModelKind kind) noexcept;

struct ModelSpec {
    ModelKind kind = ModelKind::Wmf;
    WmfHyperparams wmf;
    BprHyperparams bpr;
    Similarity similarity = Similarity::Dot;
};

/// Trains the requested kind on `train` with the given seed and attaches catalogs.
FactorModel train_model(const ModelSpec& spec, const InteractionDataset& train, std::uint64_t seed);

}  // namespace techinfer

#endif
