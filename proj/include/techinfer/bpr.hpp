#ifndef TECHINFER_BPR_HPP
#define TECHINFER_BPR_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "techinfer/dataset.hpp"
#include "techinfer/model.hpp"

namespace techinfer {

struct BprHyperparams {
    std::size_t dim = 16;
    double learning_rate = 0.02;
    double regularization = 0.01;
    /// Each epoch performs |A_obs| single-triple updates.
    int epochs = 100;
    double init_scale = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// (entity, positive item, negative item) with the positive observed and the negative not.
struct BprTriple {
    std::size_t entity = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;

    auto operator<=>(const BprTriple&) const = default;
};

/// Draws entity uniformly among entities that admit a triple, then a positive
/// uniformly from its row and a negative uniformly from the row complement.
class TripleSampler {
public:
    explicit TripleSampler(const SparseBinaryMatrix& interactions);

    [[nodiscard]] bool empty() const noexcept { return active_.empty(); }
    [[nodiscard]] const std::vector<std::size_t>& active_entities() const noexcept { return active_; }
    [[nodiscard]] std::size_t skipped_entities() const noexcept { return skipped_; }

    BprTriple sample(std::mt19937_64& rng) const;

private:
    const SparseBinaryMatrix* interactions_;
    std::vector<std::size_t> active_;
    // Explicit complements for rows dense enough that rejection would stall.
    std::vector<std::vector<std::size_t>> dense_complements_;
    std::size_t skipped_ = 0;
};

/// x̂ = ⟨u, v_pos − v_neg⟩.
double bpr_margin(const Vector& entity, const Vector& positive, const Vector& negative);

/// Per-triple objective ln σ(x̂) − λ(‖u‖² + ‖v_pos‖² + ‖v_neg‖²).
double bpr_triple_objective(const Vector& entity, const Vector& positive, const Vector& negative,
                            double regularization);

struct BprGradient {
    Vector entity;
    Vector positive;
    Vector negative;
};

/// Analytic gradient of bpr_triple_objective.
BprGradient bpr_triple_gradient(const Vector& entity, const Vector& positive, const Vector& negative,
                                double regularization);

/// One ascent step on the triple; all three rows update from their pre-step values.
void bpr_step(Matrix& U, Matrix& V, const BprTriple& triple, double learning_rate, double regularization);

struct BprDiagnostics {
    std::size_t skipped_entities = 0;
    std::size_t updates = 0;
};

/// Batch-size-1 stochastic ascent; the returned model has empty catalogs.
/// Throws Error(NoValidTriples) when no entity has both an observed and an unobserved item.
FactorModel train_bpr(const SparseBinaryMatrix& interactions, const BprHyperparams& params,
                      BprDiagnostics* diagnostics = nullptr);

/// Monte-Carlo mean of ln σ(x(i,j) − x(i,k)) over sampled triples, minus λ‖Θ‖².
double bpr_mean_objective(const FactorModel& model, const SparseBinaryMatrix& interactions, double regularization,
                          std::size_t sample_count, std::uint64_t seed);

/// Numerically stable ln σ(x).
double log_sigmoid(double x) noexcept;

}  // namespace techinfer

#endif
