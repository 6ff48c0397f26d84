#ifndef TECHINFER_MODEL_HPP
#define TECHINFER_MODEL_HPP

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "techinfer/dataset.hpp"

namespace techinfer {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class TrainedBy { Wmf, Bpr, Popularity };
enum class Similarity { Dot, Cosine };

std::string_view to_string(TrainedBy value) noexcept;
std::string_view to_string(Similarity value) noexcept;
TrainedBy parse_trained_by(std::string_view text);
Similarity parse_similarity(std::string_view text);

/// Weighted ridge parameters used to embed an unseen observation set.
struct FoldInParams {
    double negative_weight = 0.001;
    double regularization = 1e-5;
};

/// Learned embeddings: U is m×d (entities), V is n×d (items).
struct FactorModel {
    Matrix U;
    Matrix V;
    std::vector<ReportId> entities;
    std::vector<TechniqueId> items;
    TrainedBy trained_by = TrainedBy::Wmf;
    Similarity similarity = Similarity::Dot;
    FoldInParams fold_in;

    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(V.cols()); }

    /// Checks shapes against catalogs and finiteness; throws Error(ModelFormat).
    void validate() const;
};

/// Copies the dataset catalogs into the model (sizes must match U and V).
void attach_catalogs(FactorModel& model, const InteractionDataset& dataset);

/// i.i.d. normal entries with standard deviation init_scale/√d.
Matrix random_factors(std::size_t rows, std::size_t dim, double init_scale, std::mt19937_64& rng);

/// Versioned JSON model file.
std::string save_model(const FactorModel& model);
void save_model(const FactorModel& model, std::ostream& out);
FactorModel load_model(std::string_view json);
FactorModel load_model(std::istream& in);

}  // namespace techinfer

#endif
