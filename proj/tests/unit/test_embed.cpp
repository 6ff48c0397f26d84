#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "techinfer/embed.hpp"
#include "techinfer/error.hpp"
#include "techinfer/text.hpp"

using namespace techinfer;
using namespace techinfer::testing;

namespace {

double row_perplexity(const Matrix& conditional, Eigen::Index i) {
    double h = 0.0;
    for (Eigen::Index j = 0; j < conditional.cols(); ++j) {
        const double p = conditional(i, j);
        if (p > 0) h -= p * std::log2(p);
    }
    return std::exp2(h);
}

}  // namespace

TEST_CASE("equidistant neighbours calibrate to uniform") {
    const std::vector<double> distances{1.0, 1.0};
    const auto cal = calibrate_row(distances, 1.5);
    CHECK(cal.probabilities[0] == doctest::Approx(0.5));
    CHECK(cal.probabilities[1] == doctest::Approx(0.5));
    CHECK(cal.perplexity == doctest::Approx(2.0));
}

TEST_CASE("calibration reaches the target perplexity") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 50.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> distances(100);
        for (auto& d : distances) d = u(rng);
        const double target = 5.0 + trial * 0.5;
        const auto cal = calibrate_row(distances, target);
        double h = 0.0, sum = 0.0;
        for (double p : cal.probabilities) {
            sum += p;
            if (p > 0) h -= p * std::log2(p);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(std::exp2(h) - target) < 1e-4);
    }
}

TEST_CASE("distances") {
    Matrix x(3, 2);
    x << 1, 0, 0, 2, 0, 0;
    const auto cos = affinity_distances(x, Distance::Cosine);
    CHECK(cos(0, 1) == doctest::Approx(1.0));
    CHECK(cos(0, 0) == doctest::Approx(0.0));
    CHECK(cos(0, 2) == doctest::Approx(1.0));
    const auto euc = affinity_distances(x, Distance::Euclidean);
    CHECK(euc(0, 1) == doctest::Approx(5.0));
    CHECK(euc(1, 2) == doctest::Approx(4.0));
    CHECK(parse_distance("euclidean") == Distance::Euclidean);
    CHECK_THROWS_AS((void)parse_distance("manhattan"), Error);
}

TEST_CASE("joint affinities form a symmetric distribution") {
    std::mt19937_64 rng(4);
    const Matrix x = random_matrix(40, 6, rng);
    ProjectionConfig cfg;
    cfg.perplexity = 10;
    for (auto distance : {Distance::Cosine, Distance::Euclidean}) {
        cfg.distance = distance;
        const auto cond = conditional_affinities(x, cfg);
        for (Eigen::Index i = 0; i < 40; ++i) {
            CHECK(cond(i, i) == 0.0);
            CHECK(cond.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(std::abs(row_perplexity(cond, i) - 10.0) <= 1e-3);
        }
        const auto p = joint_affinities(cond);
        CHECK(std::abs(p.sum() - 1.0) <= 1e-10);
        CHECK((p - p.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(p.minCoeff() >= 0.0);
    }
}

TEST_CASE("configuration checks") {
    ProjectionConfig cfg;
    CHECK_THROWS_AS(cfg.validate(3), Error);
    try {
        cfg.validate(91);
        FAIL("expected infeasible perplexity");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::PerplexityInfeasible);
    }
    CHECK_NOTHROW(cfg.validate(92));
    Matrix bad = Matrix::Zero(10, 2);
    bad(3, 1) = std::nan("");
    cfg.perplexity = 2;
    try {
        (void)tsne(bad, cfg);
        FAIL("expected non-finite input");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonFiniteInput);
    }
}

TEST_CASE("t-SNE separates distant blobs and decreases KL after exaggeration") {
    std::mt19937_64 rng(5);
    Matrix x(20, 5);
    std::normal_distribution<double> noise(0.0, 0.1);
    for (Eigen::Index i = 0; i < 20; ++i)
        for (Eigen::Index j = 0; j < 5; ++j) x(i, j) = noise(rng) + (i < 10 ? 0.0 : 10.0);
    ProjectionConfig cfg;
    cfg.perplexity = 5;
    cfg.distance = Distance::Euclidean;
    cfg.iterations = 500;
    cfg.exaggeration_iters = 100;
    // Without adaptive gains the default rate of 200 oscillates on 20 points.
    cfg.learning_rate = 10;
    cfg.seed = 2;
    const auto p = joint_affinities(conditional_affinities(x, cfg));
    double kl_switch = 0.0;
    int calls = 0;
    const Matrix y = tsne(x, cfg, [&](int iter, const Matrix& emb) {
        ++calls;
        if (iter == cfg.exaggeration_iters) kl_switch = kl_divergence(p, emb);
    });
    CHECK(calls == 500);
    CHECK(y.allFinite());
    CHECK(std::abs(y.col(0).mean()) < 1e-9);
    CHECK(kl_divergence(p, y) <= kl_switch + 1e-6);

    auto diameter = [&](Eigen::Index from) {
        double best = 0.0;
        for (Eigen::Index i = from; i < from + 10; ++i)
            for (Eigen::Index j = from; j < from + 10; ++j) best = std::max(best, (y.row(i) - y.row(j)).norm());
        return best;
    };
    const double gap = (y.topRows(10).colwise().mean() - y.bottomRows(10).colwise().mean()).norm();
    CHECK(gap > diameter(0));
    CHECK(gap > diameter(10));

    const Matrix again = tsne(x, cfg);
    CHECK(again == y);
    cfg.threads = 3;
    CHECK(tsne(x, cfg) == y);
}

TEST_CASE("mean shift") {
    SUBCASE("single point") {
        Matrix p(1, 2);
        p << 3.0, -1.0;
        const auto r = mean_shift(p, 10.0);
        REQUIRE(r.centers.size() == 1);
        CHECK(r.centers[0][0] == 3.0);
        CHECK(r.labels[0] == 0);
    }
    SUBCASE("coincident clusters") {
        Matrix p(12, 2);
        for (int i = 0; i < 12; ++i) {
            p(i, 0) = i < 7 ? 0.0 : 100.0;
            p(i, 1) = i < 7 ? 0.0 : 5.0;
        }
        const auto r = mean_shift(p, 10.0);
        REQUIRE(r.centers.size() == 2);
        CHECK(r.centers[0][0] == 0.0);
        CHECK(r.centers[1][0] == 100.0);
        CHECK(r.centers[1][1] == 5.0);
        for (int i = 0; i < 12; ++i) CHECK(r.labels[i] == (i < 7 ? 0u : 1u));
    }
    SUBCASE("disc collapses to one mode") {
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Matrix p(50, 2);
        for (int i = 0; i < 50; ++i) {
            const double r = 2.5 * std::sqrt(u(rng));
            const double t = 2 * M_PI * u(rng);
            p(i, 0) = 40.0 + r * std::cos(t);
            p(i, 1) = r * std::sin(t);
        }
        const auto r = mean_shift(p, 10.0);
        CHECK(r.centers.size() == 1);
    }
    SUBCASE("every point is labelled") {
        std::mt19937_64 rng(7);
        const Matrix p = random_matrix(80, 2, rng, 20.0);
        const auto r = mean_shift(p, 5.0);
        CHECK(r.labels.size() == 80);
        for (auto l : r.labels) CHECK(l < r.centers.size());
        for (std::size_t a = 0; a < r.centers.size(); ++a)
            for (std::size_t b = a + 1; b < r.centers.size(); ++b)
                CHECK(std::hypot(r.centers[a][0] - r.centers[b][0], r.centers[a][1] - r.centers[b][1]) >= 5.0);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS((void)mean_shift(Matrix::Zero(3, 2), 0.0), Error);
        CHECK_THROWS_AS((void)mean_shift(Matrix::Zero(3, 3), 1.0), Error);
        CHECK_THROWS_AS((void)mean_shift(Matrix::Zero(0, 2), 1.0), Error);
    }
}

TEST_CASE("projection export") {
    EmbeddingProjection proj;
    proj.coords = Matrix::Zero(1, 2);
    proj.cluster_labels = {0};
    const std::vector<ReportId> ids{ReportId("r1")};
    std::ostringstream out;
    export_projection(proj, ids, out);
    CHECK(out.str() == "report_id,x,y,cluster\nr1,0.0,0.0,0\n");

    std::mt19937_64 rng(8);
    proj.coords = random_matrix(25, 2, rng, 30.0);
    proj.cluster_labels.assign(25, 1);
    std::vector<ReportId> many;
    for (int i = 0; i < 25; ++i) many.emplace_back(i == 3 ? "has,comma" : "r" + std::to_string(i));
    std::ostringstream csv;
    export_projection(proj, many, csv);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    int row = 0;
    while (std::getline(in, line)) {
        const auto fields = text::split_csv_record(line);
        REQUIRE(fields.has_value());
        REQUIRE(fields->size() == 4);
        CHECK((*fields)[0] == many[row].str());
        CHECK(std::abs(std::stod((*fields)[1]) - proj.coords(row, 0)) <= 1e-9);
        CHECK(std::stod((*fields)[2]) == proj.coords(row, 1));
        ++row;
    }
    CHECK(row == 25);
    CHECK_THROWS_AS(export_projection(proj, ids, csv), Error);
}
