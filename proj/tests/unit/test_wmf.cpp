#include <doctest.h>

#include <limits>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "techinfer/error.hpp"
#include "techinfer/wmf.hpp"

using namespace techinfer;
using namespace techinfer::testing;

namespace {

SparseBinaryMatrix single_cell_3x3() { return SparseBinaryMatrix(3, {{0}, {}, {}}); }

double relative(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("objective hand evaluation") {
    const auto a = single_cell_3x3();
    const Matrix ones = Matrix::Ones(3, 1);
    CHECK(wmf_objective(ones, ones, a, 0.5, 1.0) == doctest::Approx(10.0).epsilon(1e-14));
}

TEST_CASE("objective of the zero model counts observations") {
    std::mt19937_64 rng(1);
    const auto a = random_binary(7, 6, 0.3, rng);
    const Matrix u = Matrix::Zero(7, 3);
    const Matrix v = Matrix::Zero(6, 3);
    CHECK(wmf_objective(u, v, a, 0.2, 0.7) == doctest::Approx(static_cast<double>(a.nnz())));
}

TEST_CASE("objective vanishes for an exact fit with c=0 and no regularization") {
    const SparseBinaryMatrix a(2, {{0, 1}, {0, 1}});
    const Matrix ones = Matrix::Ones(2, 1);
    CHECK(wmf_objective(ones, ones, a, 0.0, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("Gram identity agrees with dense evaluation") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + rng() % 8;
        const std::size_t n = 1 + rng() % 8;
        const std::size_t d = 1 + rng() % 4;
        const double c = std::uniform_real_distribution<double>(0.0, 0.99)(rng);
        const double lambda = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
        const auto a = random_binary(m, n, 0.4, rng);
        const Matrix u = random_matrix(m, d, rng);
        const Matrix v = random_matrix(n, d, rng);
        const auto targets = dense_targets(a);
        const double dense =
            dense_wmf_objective(targets, dense_weights(targets, c), to_dense(u), to_dense(v), lambda);
        CHECK(std::abs(wmf_objective(u, v, a, c, lambda) - dense) <= 1e-10 * std::max(1.0, dense));
    }
}

TEST_CASE("objective rejects mismatched shapes") {
    const auto a = single_cell_3x3();
    CHECK_THROWS_AS((void)wmf_objective(Matrix::Ones(2, 1), Matrix::Ones(3, 1), a, 0.1, 0.1), Error);
    CHECK_THROWS_AS((void)wmf_objective(Matrix::Ones(3, 2), Matrix::Ones(3, 1), a, 0.1, 0.1), Error);
}

TEST_CASE("exact rank-one fit on a single cell") {
    const SparseBinaryMatrix a(1, {{0}});
    WmfHyperparams p;
    p.dim = 1;
    p.regularization = 0.0;
    p.negative_weight = 0.37;
    p.epochs = 3;
    const auto model = train_wmf(a, p);
    CHECK(model.U(0, 0) * model.V(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(wmf_objective(model, a, p) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("six by five example matches the dense oracle") {
    std::mt19937_64 rng(6);
    std::vector<std::size_t> cells(30);
    std::iota(cells.begin(), cells.end(), 0);
    std::shuffle(cells.begin(), cells.end(), rng);
    std::vector<std::vector<std::size_t>> rows(6);
    for (int k = 0; k < 10; ++k) rows[cells[k] / 5].push_back(cells[k] % 5);
    const SparseBinaryMatrix a(5, rows);

    WmfHyperparams p;
    p.dim = 2;
    p.negative_weight = 0.1;
    p.regularization = 0.01;
    p.epochs = 25;
    Matrix u = random_matrix(6, 2, rng, 1.0 / std::sqrt(2.0));
    Matrix v = random_matrix(5, 2, rng, 1.0 / std::sqrt(2.0));
    const auto targets = dense_targets(a);
    const auto weights = dense_weights(targets, p.negative_weight);
    const auto [ou, ov] = dense_wmf_als(targets, weights, to_dense(u), to_dense(v), p.regularization, p.epochs);
    run_wmf_sweeps(a, p, u, v);
    const double expected = dense_wmf_objective(targets, weights, ou, ov, p.regularization);
    CHECK(relative(wmf_objective(u, v, a, p.negative_weight, p.regularization), expected) <= 1e-6);
}

TEST_CASE("half sweeps satisfy the normal equations") {
    std::mt19937_64 rng(8);
    const auto a = random_binary(8, 7, 0.35, rng);
    const auto targets = dense_targets(a);
    WmfHyperparams p;
    p.dim = 3;
    p.negative_weight = 0.05;
    p.regularization = 0.1;
    p.epochs = 4;
    const auto weights = dense_weights(targets, p.negative_weight);
    int checks = 0;
    (void)train_wmf(a, p, [&](int, HalfSweep half, const Matrix& U, const Matrix& V) {
        const double r = half == HalfSweep::U
                             ? dense_half_residual(targets, weights, to_dense(U), to_dense(V), true, p.regularization)
                             : dense_half_residual(targets, weights, to_dense(V), to_dense(U), false,
                                                   p.regularization);
        CHECK(r < 1e-6);
        ++checks;
    });
    CHECK(checks == 8);
}

TEST_CASE("objective does not increase across sweeps") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 5; ++trial) {
        const auto a = random_binary(30, 20, 0.15, rng);
        WmfHyperparams p;
        p.dim = 4;
        p.negative_weight = 0.01;
        p.regularization = trial == 0 ? 0.0 : 1e-3;
        p.seed = rng();
        double previous = std::numeric_limits<double>::infinity();
        (void)train_wmf(a, p, [&](int, HalfSweep half, const Matrix& U, const Matrix& V) {
            if (half != HalfSweep::V) return;
            const double j = wmf_objective(U, V, a, p.negative_weight, p.regularization);
            CHECK(j <= previous + 1e-9);
            previous = j;
        });
    }
}

TEST_CASE("training is deterministic and independent of thread count") {
    std::mt19937_64 rng(10);
    const auto a = random_binary(40, 25, 0.2, rng);
    WmfHyperparams p;
    p.dim = 5;
    p.seed = 1234;
    p.epochs = 6;
    const auto one = train_wmf(a, p);
    const auto again = train_wmf(a, p);
    p.threads = 3;
    const auto three = train_wmf(a, p);
    CHECK(one.U == again.U);
    CHECK(one.V == again.V);
    CHECK(one.U == three.U);
    CHECK(one.V == three.V);
    p.seed = 1235;
    CHECK(train_wmf(a, p).U != one.U);
}

TEST_CASE("model carries fold-in parameters") {
    std::mt19937_64 rng(12);
    const auto a = random_binary(6, 5, 0.4, rng);
    WmfHyperparams p;
    p.dim = 2;
    p.negative_weight = 0.3;
    p.regularization = 0.02;
    const auto model = train_wmf(a, p);
    CHECK(model.trained_by == TrainedBy::Wmf);
    CHECK(model.fold_in.negative_weight == 0.3);
    CHECK(model.fold_in.regularization == 0.02);
    CHECK(model.U.rows() == 6);
    CHECK(model.V.rows() == 5);
    CHECK(model.dim() == 2);
}

TEST_CASE("hyperparameter and shape validation") {
    const SparseBinaryMatrix a(3, {{0}, {1}});
    WmfHyperparams p;
    p.dim = 3;
    CHECK_THROWS_AS((void)train_wmf(a, p), Error);
    p.dim = 2;
    p.negative_weight = 1.0;
    CHECK_THROWS_AS((void)train_wmf(a, p), Error);
    p.negative_weight = 0.1;
    p.regularization = -1.0;
    CHECK_THROWS_AS((void)train_wmf(a, p), Error);
    p.regularization = 0.0;
    p.epochs = 0;
    CHECK_THROWS_AS((void)train_wmf(a, p), Error);
    p.epochs = 1;
    CHECK_THROWS_AS((void)train_wmf(SparseBinaryMatrix(3, {{}, {}}), p), Error);
}

TEST_CASE("degenerate system without regularization is reported as singular") {
    const SparseBinaryMatrix a(2, {{0}, {0}});
    Matrix u = Matrix::Zero(2, 1);
    Matrix v = Matrix::Zero(2, 1);
    WmfHyperparams p;
    p.dim = 1;
    p.regularization = 0.0;
    p.negative_weight = 0.0;
    try {
        run_wmf_sweeps(a, p, u, v);
        FAIL("expected singular system");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SingularSystem);
    }
    p.regularization = 0.1;
    u.setZero();
    v.setZero();
    CHECK_NOTHROW(run_wmf_sweeps(a, p, u, v));
}

TEST_CASE("fold-in") {
    std::mt19937_64 rng(13);
    SUBCASE("empty observation gives zero") {
        const Matrix v = random_matrix(5, 3, rng);
        CHECK(fold_in_entity(v, {}, 0.1, 0.01).isZero(0.0));
    }
    SUBCASE("all items observed collapses to unit weights") {
        const Matrix v = random_matrix(5, 2, rng);
        const std::vector<std::size_t> all{0, 1, 2, 3, 4};
        const Vector u1 = fold_in_entity(v, all, 0.1, 0.05);
        const Vector u2 = fold_in_entity(v, all, 0.7, 0.05);
        CHECK((u1 - u2).norm() < 1e-12);
        const Matrix g = v.transpose() * v + 0.05 * Matrix::Identity(2, 2);
        const Vector expected = g.inverse() * v.transpose() * Vector::Ones(5);
        CHECK((u1 - expected).norm() < 1e-10);
    }
    SUBCASE("matches the dense ridge oracle") {
        for (int trial = 0; trial < 20; ++trial) {
            const Matrix v = random_matrix(5, 2, rng);
            const std::vector<std::size_t> observed{0, 2};
            const Vector u = fold_in_entity(v, observed, 0.1, 0.01);
            const auto oracle = dense_fold_in(to_dense(v), {0, 2}, 0.1, 0.01);
            for (int p = 0; p < 2; ++p) CHECK(std::abs(u[p] - oracle[p]) <= 1e-8 * std::max(1.0, std::abs(oracle[p])));
        }
    }
    SUBCASE("fold-in reproduces a training row solve") {
        const auto a = random_binary(10, 8, 0.3, rng);
        WmfHyperparams p;
        p.dim = 3;
        p.negative_weight = 0.05;
        p.regularization = 0.1;
        p.epochs = 1;
        Matrix U, V;
        // After the U half of the final sweep, each U_i is the fold-in of row i against V.
        (void)train_wmf(a, p, [&](int, HalfSweep half, const Matrix& u, const Matrix& v) {
            if (half == HalfSweep::U) {
                U = u;
                V = v;
            }
        });
        for (std::size_t i = 0; i < a.rows(); ++i) {
            const Vector f = fold_in_entity(V, a.row(i), p.negative_weight, p.regularization);
            CHECK((f - U.row(static_cast<Eigen::Index>(i)).transpose()).norm() < 1e-10);
        }
    }
    SUBCASE("out of range item") {
        const Matrix v = random_matrix(3, 2, rng);
        const std::vector<std::size_t> bad{3};
        CHECK_THROWS_AS((void)fold_in_entity(v, bad, 0.1, 0.01), Error);
    }
    SUBCASE("empty catalog") {
        const Matrix v(0, 2);
        CHECK_THROWS_AS((void)fold_in_entity(v, {}, 0.1, 0.01), Error);
    }
}
