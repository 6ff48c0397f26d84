#include "techinfer/bpr.hpp"

#include <algorithm>
#include <cmath>

#include "techinfer/error.hpp"

namespace techinfer {

namespace {

std::size_t draw_index(std::mt19937_64& rng, std::size_t bound) {
    return std::uniform_int_distribution<std::size_t>(0, bound - 1)(rng);
}

/// σ(−x) = 1/(1+e^x), computed without overflow.
double sigmoid_of_negative(double x) noexcept {
    if (x >= 0) {
        const double e = std::exp(-x);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(x));
}

}  // namespace

void BprHyperparams::validate() const {
    if (dim == 0) {
        throw Error(ErrorCode::InvalidArgument, "embedding dimension must be positive");
    }
    if (!(learning_rate > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
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

double log_sigmoid(double x) noexcept {
    return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

TripleSampler::TripleSampler(const SparseBinaryMatrix& interactions)
    : interactions_(&interactions), dense_complements_(interactions.rows()) {
    const auto n = interactions.cols();
    for (std::size_t i = 0; i < interactions.rows(); ++i) {
        const auto row = interactions.row(i);
        if (row.empty() || row.size() >= n) {
            ++skipped_;
            continue;
        }
        active_.push_back(i);
        if (2 * row.size() > n) {
            auto& complement = dense_complements_[i];
            complement.reserve(n - row.size());
            std::size_t next = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (next < row.size() && row[next] == j) {
                    ++next;
                } else {
                    complement.push_back(j);
                }
            }
        }
    }
}

BprTriple TripleSampler::sample(std::mt19937_64& rng) const {
    const std::size_t i = active_[draw_index(rng, active_.size())];
    const auto row = interactions_->row(i);
    const std::size_t positive = row[draw_index(rng, row.size())];
    const auto& complement = dense_complements_[i];
    if (!complement.empty()) {
        return {i, positive, complement[draw_index(rng, complement.size())]};
    }
    // At most half the row is observed, so each draw succeeds with probability ≥ 1/2.
    while (true) {
        const std::size_t k = draw_index(rng, interactions_->cols());
        if (!std::binary_search(row.begin(), row.end(), k)) {
            return {i, positive, k};
        }
    }
}

double bpr_margin(const Vector& entity, const Vector& positive, const Vector& negative) {
    return entity.dot(positive - negative);
}

double bpr_triple_objective(const Vector& entity, const Vector& positive, const Vector& negative,
                            double regularization) {
    return log_sigmoid(bpr_margin(entity, positive, negative)) -
           regularization * (entity.squaredNorm() + positive.squaredNorm() + negative.squaredNorm());
}

BprGradient bpr_triple_gradient(const Vector& entity, const Vector& positive, const Vector& negative,
                                double regularization) {
    const double s = sigmoid_of_negative(bpr_margin(entity, positive, negative));
    const double decay = 2.0 * regularization;
    return {s * (positive - negative) - decay * entity, s * entity - decay * positive,
            -s * entity - decay * negative};
}

void bpr_step(Matrix& U, Matrix& V, const BprTriple& triple, double learning_rate, double regularization) {
    const auto i = static_cast<Eigen::Index>(triple.entity);
    const auto j = static_cast<Eigen::Index>(triple.positive);
    const auto k = static_cast<Eigen::Index>(triple.negative);
    const Vector u = U.row(i).transpose();
    const Vector vj = V.row(j).transpose();
    const Vector vk = V.row(k).transpose();
    const auto grad = bpr_triple_gradient(u, vj, vk, regularization);
    U.row(i) += learning_rate * grad.entity.transpose();
    V.row(j) += learning_rate * grad.positive.transpose();
    V.row(k) += learning_rate * grad.negative.transpose();
}

FactorModel train_bpr(const SparseBinaryMatrix& interactions, const BprHyperparams& params,
                      BprDiagnostics* diagnostics) {
    params.validate();
    TripleSampler sampler(interactions);
    if (sampler.empty()) {
        throw Error(ErrorCode::NoValidTriples, "no entity has both observed and unobserved items");
    }
    std::mt19937_64 rng(params.seed);
    FactorModel model;
    model.trained_by = TrainedBy::Bpr;
    model.U = random_factors(interactions.rows(), params.dim, params.init_scale, rng);
    model.V = random_factors(interactions.cols(), params.dim, params.init_scale, rng);
    model.fold_in = {0.001, std::max(params.regularization, 1e-5)};

    const std::size_t updates = static_cast<std::size_t>(params.epochs) * interactions.nnz();
    for (std::size_t step = 0; step < updates; ++step) {
        bpr_step(model.U, model.V, sampler.sample(rng), params.learning_rate, params.regularization);
    }
    if (diagnostics != nullptr) {
        diagnostics->skipped_entities = sampler.skipped_entities();
        diagnostics->updates = updates;
    }
    return model;
}

double bpr_mean_objective(const FactorModel& model, const SparseBinaryMatrix& interactions, double regularization,
                          std::size_t sample_count, std::uint64_t seed) {
    if (sample_count < 1) {
        throw Error(ErrorCode::InvalidArgument, "sample count must be at least 1");
    }
    if (static_cast<std::size_t>(model.U.rows()) != interactions.rows() ||
        static_cast<std::size_t>(model.V.rows()) != interactions.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "model shape does not match the interaction matrix");
    }
    TripleSampler sampler(interactions);
    if (sampler.empty()) {
        throw Error(ErrorCode::NoValidTriples, "no entity has both observed and unobserved items");
    }
    std::mt19937_64 rng(seed);
    double total = 0.0;
    for (std::size_t s = 0; s < sample_count; ++s) {
        const auto t = sampler.sample(rng);
        const auto u = model.U.row(static_cast<Eigen::Index>(t.entity));
        const double margin = u.dot(model.V.row(static_cast<Eigen::Index>(t.positive)) -
                                    model.V.row(static_cast<Eigen::Index>(t.negative)));
        total += log_sigmoid(margin);
    }
    return total / static_cast<double>(sample_count) -
           regularization * (model.U.squaredNorm() + model.V.squaredNorm());
}

}  // namespace techinfer
