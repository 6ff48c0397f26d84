#include "techinfer/wmf.hpp"

#include <algorithm>
#include <cmath>

#include "parallel.hpp"
#include "techinfer/error.hpp"

namespace techinfer {

namespace {

using DenseMatrix = Eigen::MatrixXd;

Vector solve_weighted_row(const DenseMatrix& base, const Matrix& other, std::span<const std::size_t> observed,
                          double negative_weight, bool unregularized) {
    const auto d = other.cols();
    DenseMatrix system = base;
    Vector rhs = Vector::Zero(d);
    for (auto j : observed) {
        const auto v = other.row(static_cast<Eigen::Index>(j)).transpose();
        system.selfadjointView<Eigen::Lower>().rankUpdate(v, 1.0 - negative_weight);
        rhs += v;
    }
    Eigen::LDLT<DenseMatrix, Eigen::Lower> ldlt(system);
    if (ldlt.info() != Eigen::Success) {
        throw Error(ErrorCode::SingularSystem, "normal-equation factorization failed");
    }
    if (unregularized) {
        const auto pivots = ldlt.vectorD();
        const double largest = pivots.cwiseAbs().maxCoeff();
        if (!(pivots.minCoeff() > 1e-12 * std::max(1.0, largest))) {
            throw Error(ErrorCode::SingularSystem,
                        "singular normal-equation system; use a positive regularization");
        }
    }
    return ldlt.solve(rhs);
}

/// Solves every row of `target` against the frozen `other` factor.
void solve_half(const SparseBinaryMatrix& rows, const Matrix& other, Matrix& target, double negative_weight,
                double regularization, unsigned threads) {
    DenseMatrix base = negative_weight * (other.transpose() * other);
    base.diagonal().array() += regularization;
    const bool unregularized = regularization <= 0.0;
    detail::parallel_for(rows.rows(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            target.row(static_cast<Eigen::Index>(i)) =
                solve_weighted_row(base, other, rows.row(i), negative_weight, unregularized).transpose();
        }
    });
}

}  // namespace

void WmfHyperparams::validate() const {
    if (dim == 0) {
        throw Error(ErrorCode::InvalidArgument, "embedding dimension must be positive");
    }
    if (!(negative_weight >= 0.0 && negative_weight < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "negative weight must lie in [0, 1)");
    }
    if (!(regularization >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "regularization must be non-negative");
    }
    if (epochs < 1) {
        throw Error(ErrorCode::InvalidArgument, "epochs must be positive");
    }
    if (!(init_scale > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "init scale must be positive");
    }
}

void run_wmf_sweeps(const SparseBinaryMatrix& interactions, const WmfHyperparams& params, Matrix& U, Matrix& V,
                    const SweepObserver& observer) {
    params.validate();
    if (static_cast<std::size_t>(U.rows()) != interactions.rows() ||
        static_cast<std::size_t>(V.rows()) != interactions.cols() || U.cols() != V.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "factor shapes do not match the interaction matrix");
    }
    const auto by_item = interactions.transposed();
    for (int sweep = 1; sweep <= params.epochs; ++sweep) {
        solve_half(interactions, V, U, params.negative_weight, params.regularization, params.threads);
        if (observer) {
            observer(sweep, HalfSweep::U, U, V);
        }
        solve_half(by_item, U, V, params.negative_weight, params.regularization, params.threads);
        if (observer) {
            observer(sweep, HalfSweep::V, U, V);
        }
    }
}

FactorModel train_wmf(const SparseBinaryMatrix& interactions, const WmfHyperparams& params,
                      const SweepObserver& observer) {
    params.validate();
    if (interactions.rows() == 0 || interactions.cols() == 0 || interactions.nnz() == 0) {
        throw Error(ErrorCode::InvalidArgument, "interaction matrix is empty");
    }
    if (params.dim > std::min(interactions.rows(), interactions.cols())) {
        throw Error(ErrorCode::InvalidArgument, "embedding dimension exceeds min(m, n)");
    }
    std::mt19937_64 rng(params.seed);
    FactorModel model;
    model.trained_by = TrainedBy::Wmf;
    model.U = random_factors(interactions.rows(), params.dim, params.init_scale, rng);
    model.V = random_factors(interactions.cols(), params.dim, params.init_scale, rng);
    model.fold_in = {params.negative_weight, params.regularization};
    run_wmf_sweeps(interactions, params, model.U, model.V, observer);
    return model;
}

double wmf_objective(const Matrix& U, const Matrix& V, const SparseBinaryMatrix& interactions,
                     double negative_weight, double regularization) {
    if (static_cast<std::size_t>(U.rows()) != interactions.rows() ||
        static_cast<std::size_t>(V.rows()) != interactions.cols() || U.cols() != V.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "factor shapes do not match the interaction matrix");
    }
    const DenseMatrix gram_u = U.transpose() * U;
    const DenseMatrix gram_v = V.transpose() * V;
    const double all_squares = gram_u.cwiseProduct(gram_v).sum();
    double observed_loss = 0.0;
    double observed_squares = 0.0;
    for (std::size_t i = 0; i < interactions.rows(); ++i) {
        const auto u = U.row(static_cast<Eigen::Index>(i));
        for (auto j : interactions.row(i)) {
            const double x = u.dot(V.row(static_cast<Eigen::Index>(j)));
            observed_loss += (1.0 - x) * (1.0 - x);
            observed_squares += x * x;
        }
    }
    // Clamp the cancellation residue; the unobserved sum is non-negative.
    const double unobserved_squares = std::max(0.0, all_squares - observed_squares);
    return observed_loss + negative_weight * unobserved_squares +
           regularization * (U.squaredNorm() + V.squaredNorm());
}

double wmf_objective(const FactorModel& model, const SparseBinaryMatrix& interactions,
                     const WmfHyperparams& params) {
    return wmf_objective(model.U, model.V, interactions, params.negative_weight, params.regularization);
}

Vector fold_in_entity(const Matrix& V, std::span<const std::size_t> observed, double negative_weight,
                      double regularization) {
    if (V.rows() == 0) {
        throw Error(ErrorCode::InvalidArgument, "item catalog is empty");
    }
    std::vector<std::size_t> items(observed.begin(), observed.end());
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    if (!items.empty() && items.back() >= static_cast<std::size_t>(V.rows())) {
        throw Error(ErrorCode::InvalidArgument, "observed item index out of range");
    }
    DenseMatrix base = negative_weight * (V.transpose() * V);
    base.diagonal().array() += regularization;
    return solve_weighted_row(base, V, items, negative_weight, regularization <= 0.0);
}

Vector fold_in_entity(const FactorModel& model, std::span<const std::size_t> observed,
                      const WmfHyperparams& params) {
    return fold_in_entity(model.V, observed, params.negative_weight, params.regularization);
}

}  // namespace techinfer
