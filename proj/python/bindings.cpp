#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "techinfer/baseline.hpp"
#include "techinfer/bpr.hpp"
#include "techinfer/dataset.hpp"
#include "techinfer/embed.hpp"
#include "techinfer/error.hpp"
#include "techinfer/eval.hpp"
#include "techinfer/model.hpp"
#include "techinfer/serve.hpp"
#include "techinfer/synthetic.hpp"
#include "techinfer/training.hpp"
#include "techinfer/wmf.hpp"

#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)

namespace py = pybind11;
namespace ti = techinfer;

namespace {

std::vector<std::pair<std::string, std::string>> observation_pairs(const ti::InteractionDataset& ds) {
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(ds.size());
    for (const auto& obs : ds.observations()) {
        out.emplace_back(ds.entities()[obs.entity].str(), ds.items()[obs.item].str());
    }
    return out;
}

std::vector<std::string> entity_ids(const ti::InteractionDataset& ds) {
    std::vector<std::string> out;
    for (const auto& e : ds.entities()) out.push_back(e.str());
    return out;
}

std::vector<std::string> item_ids(const ti::InteractionDataset& ds) {
    std::vector<std::string> out;
    for (const auto& t : ds.items()) out.push_back(t.str());
    return out;
}

py::dict metrics_dict(const ti::RankingMetrics& metrics) {
    py::dict out;
    out["entities_evaluated"] = metrics.entities_evaluated;
    for (const auto& [k, m] : metrics.at_k) {
        out[py::str("recall@" + std::to_string(k))] = m.recall;
        out[py::str("ndcg@" + std::to_string(k))] = m.ndcg;
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Implicit-feedback factorization models for ATT&CK technique inference";

    py::register_exception<ti::Error>(m, "TechInferError", PyExc_ValueError);

    py::enum_<ti::Similarity>(m, "Similarity").value("DOT", ti::Similarity::Dot).value("COSINE", ti::Similarity::Cosine);
    py::enum_<ti::TrainedBy>(m, "TrainedBy")
        .value("WMF", ti::TrainedBy::Wmf)
        .value("BPR", ti::TrainedBy::Bpr)
        .value("POPULARITY", ti::TrainedBy::Popularity);
    py::enum_<ti::Distance>(m, "Distance").value("COSINE", ti::Distance::Cosine).value("EUCLIDEAN", ti::Distance::Euclidean);

    py::class_<ti::InteractionDataset>(m, "InteractionDataset")
        .def_property_readonly("entities", &entity_ids)
        .def_property_readonly("items", &item_ids)
        .def_property_readonly("observations", &observation_pairs)
        .def("__len__", &ti::InteractionDataset::size)
        .def("to_csv", [](const ti::InteractionDataset& ds) {
            std::ostringstream out;
            ti::write_csv(ds, out);
            return out.str();
        });

    py::class_<ti::SplitDataset>(m, "SplitDataset")
        .def_readonly("train", &ti::SplitDataset::train)
        .def_readonly("validation", &ti::SplitDataset::validation)
        .def_readonly("test", &ti::SplitDataset::test)
        .def_readonly("seed", &ti::SplitDataset::seed);

    m.def(
        "load_dataset",
        [](const std::string& text, const std::string& format) {
            auto loaded = ti::load_dataset(text, ti::parse_input_format(format));
            return py::make_tuple(std::move(loaded.dataset), loaded.diagnostics.duplicates_collapsed);
        },
        py::arg("text"), py::arg("format") = "csv",
        "Parse CSV/JSONL text; returns (dataset, duplicates_collapsed).");
    m.def("split", &ti::split, py::arg("dataset"), py::arg("test_frac") = 0.2, py::arg("val_frac") = 0.1,
          py::arg("seed") = 0);
    m.def("planted_dataset",
          [](std::size_t entities, std::size_t items, double noise, std::uint64_t seed) {
              ti::PlantedConfig cfg;
              cfg.entities = entities;
              cfg.items = items;
              cfg.noise = noise;
              cfg.seed = seed;
              return ti::make_planted_dataset(cfg);
          },
          py::arg("entities") = 200, py::arg("items") = 50, py::arg("noise") = 0.05, py::arg("seed") = 0);

    py::class_<ti::FactorModel>(m, "FactorModel")
        .def_readonly("U", &ti::FactorModel::U)
        .def_readonly("V", &ti::FactorModel::V)
        .def_readonly("trained_by", &ti::FactorModel::trained_by)
        .def_readwrite("similarity", &ti::FactorModel::similarity)
        .def_property_readonly("dim", &ti::FactorModel::dim)
        .def_property_readonly("items", [](const ti::FactorModel& model) {
            std::vector<std::string> out;
            for (const auto& t : model.items) out.push_back(t.str());
            return out;
        })
        .def("to_json", [](const ti::FactorModel& model) { return ti::save_model(model); })
        .def_static("from_json", [](const std::string& text) { return ti::load_model(text); });

    m.def(
        "train",
        [](const ti::InteractionDataset& train, const std::string& kind, std::size_t dim, double c, double lam,
           double lr, int epochs, std::uint64_t seed, const std::string& similarity) {
            ti::ModelSpec spec;
            spec.kind = ti::parse_model_kind(kind);
            spec.similarity = ti::parse_similarity(similarity);
            if (dim > 0) spec.wmf.dim = spec.bpr.dim = dim;
            if (c >= 0) spec.wmf.negative_weight = c;
            if (lam >= 0) spec.wmf.regularization = spec.bpr.regularization = lam;
            if (lr > 0) spec.bpr.learning_rate = lr;
            if (epochs > 0) spec.wmf.epochs = spec.bpr.epochs = epochs;
            py::gil_scoped_release release;
            return ti::train_model(spec, train, seed);
        },
        py::arg("train"), py::arg("kind") = "wmf", py::arg("dim") = 0, py::arg("c") = -1.0, py::arg("lam") = -1.0,
        py::arg("lr") = -1.0, py::arg("epochs") = 0, py::arg("seed") = 0, py::arg("similarity") = "dot",
        "Train wmf|bpr|popularity; non-positive / negative arguments keep the model defaults.");

    m.def(
        "wmf_objective",
        [](const ti::Matrix& U, const ti::Matrix& V, const ti::InteractionDataset& ds, double c, double lam) {
            return ti::wmf_objective(U, V, ti::to_matrix(ds), c, lam);
        },
        py::arg("U"), py::arg("V"), py::arg("dataset"), py::arg("c"), py::arg("lam"));
    m.def(
        "fold_in",
        [](const ti::Matrix& V, const std::vector<std::size_t>& observed, double c, double lam) {
            return ti::fold_in_entity(V, observed, c, lam);
        },
        py::arg("V"), py::arg("observed"), py::arg("c"), py::arg("lam"));
    m.def(
        "rank_items",
        [](const ti::Matrix& V, const ti::Vector& u, const std::vector<std::size_t>& exclude,
           ti::Similarity similarity) {
            std::vector<std::tuple<std::size_t, double, std::size_t>> out;
            for (const auto& r : ti::rank_items(V, u, exclude, similarity)) {
                out.emplace_back(r.item, r.score, r.rank);
            }
            return out;
        },
        py::arg("V"), py::arg("embedding"), py::arg("exclude") = std::vector<std::size_t>{},
        py::arg("similarity") = ti::Similarity::Dot, "Returns [(item, score, rank)].");
    m.def(
        "recall_at_k",
        [](const std::vector<std::size_t>& ranked_items, const std::vector<std::size_t>& targets, std::size_t k) {
            ti::RankedPredictions ranked;
            for (std::size_t r = 0; r < ranked_items.size(); ++r) ranked.push_back({ranked_items[r], 0.0, r + 1});
            return ti::recall_at_k(ranked, targets, k);
        });
    m.def(
        "ndcg_at_k",
        [](const std::vector<std::size_t>& ranked_items, const std::vector<std::size_t>& targets, std::size_t k) {
            ti::RankedPredictions ranked;
            for (std::size_t r = 0; r < ranked_items.size(); ++r) ranked.push_back({ranked_items[r], 0.0, r + 1});
            return ti::ndcg_at_k(ranked, targets, k);
        });
    m.def(
        "evaluate",
        [](const ti::FactorModel& model, const ti::SplitDataset& split, const std::string& target,
           const std::vector<std::size_t>& ks) {
            return metrics_dict(ti::evaluate(model, split,
                                             target == "test" ? ti::EvalTarget::Test : ti::EvalTarget::Validation, ks));
        },
        py::arg("model"), py::arg("split"), py::arg("target") = "test",
        py::arg("ks") = std::vector<std::size_t>{10, 20, 50});

    m.def(
        "tsne",
        [](const ti::Matrix& X, double perplexity, ti::Distance distance, int iterations, std::uint64_t seed) {
            ti::ProjectionConfig cfg;
            cfg.perplexity = perplexity;
            cfg.distance = distance;
            cfg.iterations = iterations;
            cfg.seed = seed;
            py::gil_scoped_release release;
            return ti::tsne(X, cfg);
        },
        py::arg("X"), py::arg("perplexity") = 30.0, py::arg("distance") = ti::Distance::Cosine,
        py::arg("iterations") = 1000, py::arg("seed") = 0);
    m.def(
        "mean_shift",
        [](const ti::Matrix& points, double bandwidth) {
            auto result = ti::mean_shift(points, bandwidth);
            return py::make_tuple(result.labels, result.centers);
        },
        py::arg("points"), py::arg("bandwidth") = 10.0, "Returns (labels, centers).");

    m.def(
        "predict",
        [](const ti::FactorModel& model, const std::vector<std::string>& observed, std::size_t k) {
            ti::PredictRequest request;
            request.observed = observed;
            request.k = k;
            return ti::to_json(ti::predict(model, request)).dump();
        },
        py::arg("model"), py::arg("observed"), py::arg("k") = 20, "Returns the PredictResponse as JSON text.");
    m.def(
        "export_navigator_layer",
        [](const ti::FactorModel& model, const std::vector<std::string>& observed, std::size_t k,
           const std::string& name) {
            ti::PredictRequest request;
            request.observed = observed;
            request.k = k;
            return ti::export_navigator_layer(ti::predict(model, request), name);
        },
        py::arg("model"), py::arg("observed"), py::arg("k") = 20, py::arg("name") = "Inferred techniques");
    m.def(
        "export_csv",
        [](const ti::FactorModel& model, const std::vector<std::string>& observed, std::size_t k) {
            ti::PredictRequest request;
            request.observed = observed;
            request.k = k;
            return ti::export_csv(ti::predict(model, request));
        },
        py::arg("model"), py::arg("observed"), py::arg("k") = 20);

#ifdef VERSION_INFO
    m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
    m.attr("__version__") = "dev";
#endif
}
