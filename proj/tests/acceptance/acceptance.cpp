// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Exit status is
// nonzero when any criterion fails.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <unistd.h>

#include "oracles.hpp"
#include "schema_check.hpp"
#include "techinfer/baseline.hpp"
#include "techinfer/bpr.hpp"
#include "techinfer/embed.hpp"
#include "techinfer/error.hpp"
#include "techinfer/eval.hpp"
#include "techinfer/serve.hpp"
#include "techinfer/synthetic.hpp"
#include "techinfer/training.hpp"
#include "techinfer/wmf.hpp"

// After Eigen: <resolv.h> defines an `_res` macro that collides with Eigen parameter names.
#include <httplib.h>

using namespace techinfer;
using namespace techinfer::testing;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Verdict {
    Outcome outcome = Outcome::Pass;
    std::string detail;
};

Verdict pass(std::string detail) { return {Outcome::Pass, std::move(detail)}; }
Verdict fail(std::string detail) { return {Outcome::Fail, std::move(detail)}; }

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// -- WMF ---------------------------------------------------------------------

Verdict wmf_oracle() {
    std::mt19937_64 rng(20240101);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_rel = 0.0;
    double worst_residual = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 2 + rng() % 7;
        const std::size_t n = 2 + rng() % 7;
        const std::size_t d = 1 + rng() % std::min<std::size_t>(3, std::min(m, n));
        const auto a = random_binary(m, n, 0.2 + 0.4 * unit(rng), rng);
        WmfHyperparams p;
        p.dim = d;
        p.negative_weight = 0.9 * unit(rng);
        p.regularization = std::pow(10.0, -3.0 + 3.0 * unit(rng));
        p.epochs = 1 + static_cast<int>(rng() % 10);
        Matrix u = random_matrix(m, d, rng, 1.0 / std::sqrt(static_cast<double>(d)));
        Matrix v = random_matrix(n, d, rng, 1.0 / std::sqrt(static_cast<double>(d)));

        const auto targets = dense_targets(a);
        const auto weights = dense_weights(targets, p.negative_weight);
        const auto [ou, ov] = dense_wmf_als(targets, weights, to_dense(u), to_dense(v), p.regularization, p.epochs);
        run_wmf_sweeps(a, p, u, v, [&](int, HalfSweep half, const Matrix& U, const Matrix& V) {
            const double r = half == HalfSweep::U
                                 ? dense_half_residual(targets, weights, to_dense(U), to_dense(V), true,
                                                       p.regularization)
                                 : dense_half_residual(targets, weights, to_dense(V), to_dense(U), false,
                                                       p.regularization);
            worst_residual = std::max(worst_residual, r);
        });
        const double expected = dense_wmf_objective(targets, weights, ou, ov, p.regularization);
        worst_rel = std::max(worst_rel, rel(wmf_objective(u, v, a, p.negative_weight, p.regularization), expected));
    }
    const auto detail = fmt("max rel J error %.2e, max half-step residual %.2e", worst_rel, worst_residual);
    return worst_rel <= 1e-6 && worst_residual < 1e-6 ? pass(detail) : fail(detail);
}

Verdict wmf_monotonicity() {
    std::mt19937_64 rng(7);
    double worst_increase = -std::numeric_limits<double>::infinity();
    int sweeps_seen = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_binary(50, 30, 0.05 + 0.01 * trial, rng);
        WmfHyperparams p;
        p.dim = 2 + rng() % 7;
        p.negative_weight = std::vector<double>{1e-4, 1e-3, 0.01, 0.1, 0.5}[trial % 5];
        p.regularization = std::vector<double>{1e-5, 1e-3, 0.01, 0.1}[trial % 4];
        p.epochs = 25;
        p.seed = rng();
        double previous = std::numeric_limits<double>::infinity();
        (void)train_wmf(a, p, [&](int, HalfSweep half, const Matrix& U, const Matrix& V) {
            if (half != HalfSweep::V) return;
            const double j = wmf_objective(U, V, a, p.negative_weight, p.regularization);
            if (std::isfinite(previous)) worst_increase = std::max(worst_increase, j - previous);
            previous = j;
            ++sweeps_seen;
        });
    }
    const auto detail = fmt("%.0f sweeps, largest J(t+1)-J(t) = %.2e", sweeps_seen, worst_increase);
    return sweeps_seen == 500 && worst_increase <= 1e-9 ? pass(detail) : fail(detail);
}

// -- BPR ---------------------------------------------------------------------

Verdict bpr_gradient() {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double h = 1e-6;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Vector theta(9);
        for (auto& x : theta) x = normal(rng);
        const double lambda = trial % 5 == 0 ? 0.0 : 0.1 * unit(rng);
        auto f = [&](const Vector& t) {
            return bpr_triple_objective(t.segment(0, 3), t.segment(3, 3), t.segment(6, 3), lambda);
        };
        const auto g = bpr_triple_gradient(theta.segment(0, 3), theta.segment(3, 3), theta.segment(6, 3), lambda);
        Vector analytic(9);
        analytic << g.entity, g.positive, g.negative;
        Vector numeric(9);
        for (int p = 0; p < 9; ++p) {
            Vector plus = theta;
            Vector minus = theta;
            plus[p] += h;
            minus[p] -= h;
            numeric[p] = (f(plus) - f(minus)) / (2 * h);
        }
        worst = std::max(worst, (numeric - analytic).norm() / std::max(analytic.norm(), 1e-12));
    }
    const auto detail = fmt("max relative gradient error %.2e", worst);
    return worst <= 1e-5 ? pass(detail) : fail(detail);
}

// -- metrics -----------------------------------------------------------------

Verdict metric_oracle() {
    std::mt19937_64 rng(5150);
    const std::vector<std::size_t> ks{1, 5, 10};
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto split = random_split(20, 15, rng);
        FactorModel model;
        model.U = random_matrix(20, 1 + rng() % 5, rng);
        model.V = random_matrix(15, static_cast<std::size_t>(model.U.cols()), rng);
        model.similarity = trial % 2 == 0 ? Similarity::Dot : Similarity::Cosine;
        const auto metrics = evaluate(model, split, EvalTarget::Test, ks);
        const auto brute = brute_evaluate(model.U, model.V, model.similarity == Similarity::Cosine,
                                          to_matrix(split.train), to_matrix(split.test), ks);
        if (brute.evaluated != metrics.entities_evaluated) return fail("evaluated entity counts differ");
        for (auto k : ks) {
            worst = std::max(worst, std::abs(metrics.at_k.at(k).recall - brute.mean.at(k).first));
            worst = std::max(worst, std::abs(metrics.at_k.at(k).ndcg - brute.mean.at(k).second));
        }
    }
    const auto detail = fmt("max |library - brute force| = %.2e", worst);
    return worst <= 1e-12 ? pass(detail) : fail(detail);
}

// -- planted structure --------------------------------------------------------

Verdict planted_recovery() {
    const std::size_t ks20[] = {20};
    int wins = 0;
    std::ostringstream detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        PlantedConfig cfg;
        cfg.entities = 200;
        cfg.items = 50;
        cfg.groups = 2;
        cfg.noise = 0.05;
        cfg.seed = seed;
        const auto data = make_planted_dataset(cfg);
        const auto parts = split(data, 0.2, 0.1, seed);

        GridSearchConfig grid;
        grid.kind = ModelKind::Wmf;
        grid.wmf.dims = {2, 4, 8};
        grid.wmf.negative_weights = {1e-3, 0.01, 0.1};
        grid.wmf.regularizations = {1e-5, 1e-3, 0.1};
        grid.seed = seed;
        const auto result = grid_search(parts, grid);
        if (!result.best) return fail("grid search produced no usable combination");
        const auto spec = result.records[*result.best].spec(grid);
        const auto wmf = train_model(spec, parts.train, seed);
        const double wmf_recall = evaluate(wmf, parts, EvalTarget::Test, ks20).at_k.at(20).recall;

        ModelSpec pop_spec;
        pop_spec.kind = ModelKind::Popularity;
        const auto pop = train_model(pop_spec, parts.train, seed);
        const double pop_recall = evaluate(pop, parts, EvalTarget::Test, ks20).at_k.at(20).recall;
        wins += wmf_recall > pop_recall ? 1 : 0;
        detail << (seed > 1 ? "; " : "") << fmt("%.3f vs %.3f", wmf_recall, pop_recall);
    }
    return wins >= 4 ? pass(std::to_string(wins) + "/5 seeds, WMF vs popularity recall@20: " + detail.str())
                     : fail(std::to_string(wins) + "/5 seeds, WMF vs popularity recall@20: " + detail.str());
}

Verdict corpus_check() {
    const char* path = std::getenv("TECHINFER_CORPUS");
    if (path == nullptr || *path == '\0') {
        return {Outcome::Skip, "TECHINFER_CORPUS not set"};
    }
    std::ifstream in(path);
    if (!in) return {Outcome::Skip, std::string("cannot open ") + path};
    const auto format = std::filesystem::path(path).extension() == ".jsonl" ? InputFormat::Jsonl : InputFormat::Csv;
    const auto data = load_dataset(in, format).dataset;
    const auto parts = split(data, 0.2, 0.1, 0);
    ModelSpec spec;
    spec.kind = ModelKind::Wmf;
    spec.wmf.dim = 4;
    spec.wmf.negative_weight = 0.001;
    spec.wmf.regularization = 1e-5;
    spec.wmf.threads = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t ks[] = {10, 20, 50};
    const auto rep = repeated_eval(parts, spec, 5, 0, EvalTarget::Test, ks, spec.wmf.threads);
    const double recall = rep.mean.at_k.at(20).recall;
    const double ndcg = rep.mean.at_k.at(20).ndcg;
    const auto detail = fmt("m=%.0f, recall@20 %.4f, ndcg@20 %.4f", static_cast<double>(data.entity_count()),
                            recall, ndcg);
    return std::abs(recall - 0.4037) <= 0.05 && std::abs(ndcg - 0.2232) <= 0.03 ? pass(detail) : fail(detail);
}

// -- embedding ---------------------------------------------------------------

Verdict tsne_calibration() {
    std::mt19937_64 rng(31337);
    const Matrix x = random_matrix(200, 10, rng);
    ProjectionConfig cfg;
    cfg.perplexity = 30;
    cfg.distance = Distance::Cosine;
    cfg.iterations = 1000;
    cfg.exaggeration_iters = 250;
    cfg.seed = 11;

    const auto cond = conditional_affinities(x, cfg);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < cond.rows(); ++i) {
        double h = 0.0;
        for (Eigen::Index j = 0; j < cond.cols(); ++j)
            if (cond(i, j) > 0) h -= cond(i, j) * std::log2(cond(i, j));
        worst = std::max(worst, std::abs(std::exp2(h) - 30.0));
    }
    const auto joint = joint_affinities(cond);
    double kl250 = 0.0;
    double kl1000 = 0.0;
    (void)tsne(x, cfg, [&](int iter, const Matrix& y) {
        if (iter == 250) kl250 = kl_divergence(joint, y);
        if (iter == 1000) kl1000 = kl_divergence(joint, y);
    });
    const auto detail = fmt("max |perplexity - 30| = %.2e, KL(250) = %.4f, KL(1000) = %.4f", worst, kl250, kl1000);
    return worst <= 1e-3 && kl1000 <= kl250 ? pass(detail) : fail(detail);
}

Verdict mean_shift_clusters() {
    const double bandwidth = 10.0;
    Matrix two(30, 2);
    for (Eigen::Index i = 0; i < 30; ++i) {
        two(i, 0) = i < 15 ? 0.0 : 10.0 * bandwidth;
        two(i, 1) = 0.0;
    }
    const auto a = mean_shift(two, bandwidth);

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix disc(50, 2);
    for (Eigen::Index i = 0; i < 50; ++i) {
        const double r = bandwidth / 4.0 * std::sqrt(unit(rng));
        const double t = 2.0 * M_PI * unit(rng);
        disc(i, 0) = r * std::cos(t);
        disc(i, 1) = r * std::sin(t);
    }
    const auto b = mean_shift(disc, bandwidth);
    const auto detail = fmt("separated: %.0f clusters, disc: %.0f clusters", static_cast<double>(a.centers.size()),
                            static_cast<double>(b.centers.size()));
    return a.centers.size() == 2 && b.centers.size() == 1 ? pass(detail) : fail(detail);
}

// -- serialization and API ---------------------------------------------------

Verdict serialization_and_api() {
    PlantedConfig cfg;
    cfg.seed = 42;
    const auto data = make_planted_dataset(cfg);
    const auto dir = std::filesystem::temp_directory_path() / ("techinfer_accept_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    std::vector<std::string> problems;

    for (auto kind : {ModelKind::Wmf, ModelKind::Bpr, ModelKind::Popularity}) {
        ModelSpec spec;
        spec.kind = kind;
        spec.bpr.epochs = 10;
        const auto model = train_model(spec, data, 3);
        const auto file = dir / (std::string(to_string(kind)) + ".json");
        {
            std::ofstream out(file);
            save_model(model, out);
        }
        std::ifstream in(file);
        const auto loaded = load_model(in);
        std::mt19937_64 rng(static_cast<int>(kind));
        for (int trial = 0; trial < 25; ++trial) {
            PredictRequest req;
            for (const auto& t : model.items)
                if (rng() % 8 == 0) req.observed.push_back(t.str());
            if (req.observed.empty()) req.observed.push_back(model.items[rng() % model.items.size()].str());
            req.k = 1 + rng() % 30;
            if (trial % 2) req.similarity = Similarity::Cosine;
            const auto before = predict(model, req);
            const auto after = predict(loaded, req);
            if (to_json(before).dump() != to_json(after).dump()) {
                problems.push_back(std::string(to_string(kind)) + " predictions changed after reload");
                break;
            }
            if (!before.predictions.empty()) {
                const auto errors = validate_navigator_layer(export_navigator_layer(before, "accept"));
                if (!errors.empty()) problems.push_back("navigator layer invalid: " + errors.front());
            }
        }
    }

    ModelSpec spec;
    const PredictionService service(train_model(spec, data, 5), TechniqueCatalog{});
    const std::string observed = service.model().items[0].str();
    const std::string body = R"({"observed":[")" + observed + R"("],"k":5})";
    auto expect_status = [&](const HttpReply& r, int status, const char* what) {
        if (r.status != status) problems.push_back(std::string(what) + " returned " + std::to_string(r.status));
    };
    expect_status(service.handle("GET", "/api/health", ""), 200, "health");
    expect_status(service.handle("GET", "/api/techniques", ""), 200, "techniques");
    expect_status(service.handle("GET", "/api/model", ""), 200, "model");
    const auto predicted = service.handle("POST", "/api/predict", body);
    expect_status(predicted, 200, "predict");
    const auto doc = nlohmann::json::parse(predicted.body);
    if (doc["predictions"].size() > 5) problems.push_back("predict returned more than k rows");
    for (const auto& p : doc["predictions"])
        if (p["technique_id"] == observed) problems.push_back("predict echoed an observed technique");
    expect_status(service.handle("POST", "/api/predict", R"({"observed":[]})"), 422, "empty observation");
    expect_status(service.handle("POST", "/api/predict", "{"), 400, "invalid json");
    expect_status(service.handle("GET", "/api/unknown", ""), 404, "unknown route");
    const auto nav = service.handle("POST", "/api/export/navigator", body);
    expect_status(nav, 200, "navigator export");
    if (!validate_navigator_layer(nav.body).empty()) problems.push_back("served navigator layer invalid");

    HttpServer server(service);
    const int port = server.bind({"127.0.0.1", 0});
    std::thread runner([&] { server.listen(); });
    httplib::Client client("127.0.0.1", port);
    client.set_connection_timeout(5);
    const auto live = client.Post("/api/predict", body, "application/json");
    if (!live || live->status != 200 || live->body != predicted.body) problems.push_back("live server mismatch");
    server.stop();
    runner.join();
    std::filesystem::remove_all(dir);

    if (!problems.empty()) return fail(problems.front());
    return pass("3 model kinds x 25 requests stable across save/load; layers valid; routes and live server ok");
}

struct Criterion {
    const char* name;
    double budget_seconds;
    std::function<Verdict()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"wmf-oracle-equivalence", 10.0, wmf_oracle},
        {"wmf-monotonicity", 30.0, wmf_monotonicity},
        {"bpr-gradient-check", 5.0, bpr_gradient},
        {"metric-oracle", 5.0, metric_oracle},
        {"planted-structure-recovery", 120.0, planted_recovery},
        {"corpus-reproduction", 0.0, corpus_check},
        {"tsne-calibration", 60.0, tsne_calibration},
        {"mean-shift-clusters", 5.0, mean_shift_clusters},
        {"serialization-and-api", 0.0, serialization_and_api},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& ex) {
            v = fail(std::string("exception: ") + ex.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (v.outcome == Outcome::Pass && c.budget_seconds > 0 && seconds > c.budget_seconds) {
            v = fail(v.detail + fmt("; took %.1f s, budget %.0f s", seconds, c.budget_seconds));
        }
        const char* tag = v.outcome == Outcome::Pass ? "PASS" : v.outcome == Outcome::Fail ? "FAIL" : "SKIP";
        std::printf("%s  %-28s %s (%.2f s)\n", tag, c.name, v.detail.c_str(), seconds);
        std::fflush(stdout);
        failures += v.outcome == Outcome::Fail ? 1 : 0;
    }
    return failures == 0 ? 0 : 1;
}
