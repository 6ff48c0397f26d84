#ifndef TECHINFER_WMF_HPP
#define TECHINFER_WMF_HPP

#include <cstdint>
#include <functional>
#include <span>

#include "techinfer/dataset.hpp"
#include "techinfer/model.hpp"

namespace techinfer {

struct WmfHyperparams {
    std::size_t dim = 4;
    /// Weight c of every unobserved cell; observed cells weigh 1.
    double negative_weight = 0.001;
    double regularization = 1e-5;
    /// One epoch is a U-solve sweep followed by a V-solve sweep.
    int epochs = 25;
    double init_scale = 1.0;
    std::uint64_t seed = 0;
    /// Row solves within a half-sweep are independent; any value gives identical results.
    unsigned threads = 1;

    void validate() const;
};

enum class HalfSweep { U, V };

/// Called after each half-sweep with the current factors (sweep is 1-based).
using SweepObserver = std::function<void(int sweep, HalfSweep half, const Matrix& U, const Matrix& V)>;

/// Alternating least squares on
///   J = Σ_obs (1 − ⟨U_i,V_j⟩)² + c Σ_unobs ⟨U_i,V_j⟩² + λ(‖U‖² + ‖V‖²).
/// Each row solve uses c·VᵀV + (1−c)·Σ_{j∈obs(i)} V_j V_jᵀ + λI.
/// The returned model has empty catalogs; see attach_catalogs.
FactorModel train_wmf(const SparseBinaryMatrix& interactions, const WmfHyperparams& params,
                      const SweepObserver& observer = {});

/// Same ALS iteration from caller-supplied starting factors.
void run_wmf_sweeps(const SparseBinaryMatrix& interactions, const WmfHyperparams& params, Matrix& U, Matrix& V,
                    const SweepObserver& observer = {});

/// Objective J evaluated through the Gram identity Σ_all ⟨U_i,V_j⟩² = ⟨UᵀU, VᵀV⟩_F.
double wmf_objective(const Matrix& U, const Matrix& V, const SparseBinaryMatrix& interactions,
                     double negative_weight, double regularization);
double wmf_objective(const FactorModel& model, const SparseBinaryMatrix& interactions,
                     const WmfHyperparams& params);

/// Exact single-row weighted ridge solve against frozen item factors.
Vector fold_in_entity(const Matrix& V, std::span<const std::size_t> observed, double negative_weight,
                      double regularization);
Vector fold_in_entity(const FactorModel& model, std::span<const std::size_t> observed,
                      const WmfHyperparams& params);

}  // namespace techinfer

#endif
