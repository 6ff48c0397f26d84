// techinfer: command-line front end for ingestion, training, evaluation,
// prediction, projection and the HTTP service.

#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "techinfer/baseline.hpp"
#include "techinfer/dataset.hpp"
#include "techinfer/embed.hpp"
#include "techinfer/error.hpp"
#include "techinfer/eval.hpp"
#include "techinfer/model.hpp"
#include "techinfer/serve.hpp"
#include "techinfer/synthetic.hpp"
#include "techinfer/text.hpp"
#include "techinfer/training.hpp"

namespace ti = techinfer;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

std::string read_file(const std::string& path) {
    if (path == "-") {
        std::ostringstream buffer;
        buffer << std::cin.rdbuf();
        return buffer.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ti::Error(ti::ErrorCode::Io, "cannot open '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ti::Error(ti::ErrorCode::Io, "cannot write '" + path + "'");
    }
    out << content;
}

ti::InputFormat format_for(const std::string& path, const std::string& format) {
    if (!format.empty()) {
        return ti::parse_input_format(format);
    }
    const bool jsonl = path.size() >= 6 && path.compare(path.size() - 6, 6, ".jsonl") == 0;
    return jsonl ? ti::InputFormat::Jsonl : ti::InputFormat::Csv;
}

ti::InteractionDataset load_dataset_file(const std::string& path, const std::string& format) {
    auto loaded = ti::load_dataset(read_file(path), format_for(path, format));
    if (loaded.diagnostics.duplicates_collapsed > 0) {
        std::cerr << "collapsed " << loaded.diagnostics.duplicates_collapsed << " duplicate observation(s)\n";
    }
    return std::move(loaded.dataset);
}

ti::SplitDataset load_split_file(const std::string& path) {
    std::istringstream in(read_file(path));
    return ti::load_split_csv(in);
}

ti::FactorModel load_model_file(const std::string& path) { return ti::load_model(read_file(path)); }

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    for (const auto& piece : ti::text::split_list(text)) {
        try {
            std::size_t used = 0;
            const auto value = std::stoull(piece, &used);
            if (used != piece.size()) {
                throw std::invalid_argument(piece);
            }
            out.push_back(static_cast<std::size_t>(value));
        } catch (const std::exception&) {
            throw ti::Error(ti::ErrorCode::InvalidArgument, "expected a list of integers, got '" + text + "'");
        }
    }
    return out;
}

std::vector<double> parse_reals(const std::string& text) {
    std::vector<double> out;
    for (const auto& piece : ti::text::split_list(text)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(piece, &used));
            if (used != piece.size()) {
                throw std::invalid_argument(piece);
            }
        } catch (const std::exception&) {
            throw ti::Error(ti::ErrorCode::InvalidArgument, "expected a list of numbers, got '" + text + "'");
        }
    }
    return out;
}

/// Hyperparameter flags shared by train, evaluate and grid-search.
struct HyperFlags {
    std::optional<std::size_t> dim;
    std::optional<double> negative_weight;
    std::optional<double> regularization;
    std::optional<double> learning_rate;
    std::optional<int> epochs;
    std::optional<double> init_scale;
    unsigned threads = 1;

    void attach(CLI::App& cmd) {
        cmd.add_option("--dim", dim, "Embedding dimension (wmf 4, bpr 16)");
        cmd.add_option("--c", negative_weight, "WMF unobserved-cell weight (0.001)");
        cmd.add_option("--lambda", regularization, "Regularization (wmf 1e-5, bpr 0.01)");
        cmd.add_option("--lr", learning_rate, "BPR learning rate (0.02)");
        cmd.add_option("--epochs", epochs, "Training epochs (wmf 25, bpr 100)");
        cmd.add_option("--init-scale", init_scale, "Initialization scale (1.0)");
        cmd.add_option("--threads", threads, "Worker threads for row solves")->check(CLI::PositiveNumber);
    }

    ti::ModelSpec spec(const std::string& kind, const std::string& similarity) const {
        ti::ModelSpec spec;
        spec.kind = ti::parse_model_kind(kind);
        spec.similarity = ti::parse_similarity(similarity);
        if (dim) spec.wmf.dim = spec.bpr.dim = *dim;
        if (negative_weight) spec.wmf.negative_weight = *negative_weight;
        if (regularization) spec.wmf.regularization = spec.bpr.regularization = *regularization;
        if (learning_rate) spec.bpr.learning_rate = *learning_rate;
        if (epochs) spec.wmf.epochs = spec.bpr.epochs = *epochs;
        if (init_scale) spec.wmf.init_scale = spec.bpr.init_scale = *init_scale;
        spec.wmf.threads = threads;
        return spec;
    }
};

std::string metrics_table(const ti::RankingMetrics& metrics) {
    std::ostringstream out;
    out << "K,recall,ndcg\n";
    for (const auto& [k, m] : metrics.at_k) {
        out << k << ',' << std::fixed << std::setprecision(4) << m.recall << ',' << m.ndcg << '\n';
    }
    return out.str();
}

nlohmann::ordered_json metrics_json(const ti::RankingMetrics& metrics) {
    nlohmann::ordered_json out;
    out["entities_evaluated"] = metrics.entities_evaluated;
    for (const auto& [k, m] : metrics.at_k) {
        out["recall@" + std::to_string(k)] = m.recall;
        out["ndcg@" + std::to_string(k)] = m.ndcg;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Technique inference from implicit-feedback matrix factorization"};
    app.set_config("--config", "", "TOML/INI file mirroring the flags; explicit flags win");
    app.require_subcommand(1);

    std::function<void()> action;

    // synth
    ti::PlantedConfig planted;
    std::string synth_output;
    auto* synth = app.add_subcommand("synth", "Write a planted-structure synthetic dataset");
    synth->add_option("--entities", planted.entities);
    synth->add_option("--items", planted.items);
    synth->add_option("--groups", planted.groups);
    synth->add_option("--noise", planted.noise);
    synth->add_option("--seed", planted.seed);
    synth->add_option("-o,--output", synth_output, "Output CSV (stdout by default)");
    synth->callback([&] {
        action = [&] {
            std::ostringstream out;
            ti::write_csv(ti::make_planted_dataset(planted), out);
            write_output(synth_output, out.str());
        };
    });

    // ingest
    std::string ingest_input, ingest_format, ingest_output;
    auto* ingest = app.add_subcommand("ingest", "Validate observations and write normalized CSV");
    ingest->add_option("-i,--input", ingest_input, "CSV or JSONL file ('-' for stdin)")->required();
    ingest->add_option("--format", ingest_format, "csv|jsonl (default from extension)");
    ingest->add_option("-o,--output", ingest_output, "Normalized CSV output");
    ingest->callback([&] {
        action = [&] {
            auto loaded = ti::load_dataset(read_file(ingest_input), format_for(ingest_input, ingest_format));
            const auto& ds = loaded.dataset;
            std::cerr << "reports=" << ds.entity_count() << " techniques=" << ds.item_count()
                      << " observations=" << ds.size() << " records=" << loaded.diagnostics.records_read
                      << " duplicates_collapsed=" << loaded.diagnostics.duplicates_collapsed << '\n';
            if (!ingest_output.empty()) {
                std::ostringstream out;
                ti::write_csv(ds, out);
                write_output(ingest_output, out.str());
            }
        };
    });

    // split
    std::string split_input, split_format, split_output;
    double test_frac = 0.2;
    double val_frac = 0.1;
    std::uint64_t split_seed = 0;
    auto* split_cmd = app.add_subcommand("split", "Interaction-level train/validation/test split");
    split_cmd->add_option("-i,--input", split_input)->required();
    split_cmd->add_option("--format", split_format);
    split_cmd->add_option("--test-frac", test_frac);
    split_cmd->add_option("--val-frac", val_frac);
    split_cmd->add_option("--seed", split_seed);
    split_cmd->add_option("-o,--output", split_output, "Split CSV (report_id,technique_id,partition)");
    split_cmd->callback([&] {
        action = [&] {
            const auto ds = load_dataset_file(split_input, split_format);
            const auto parts = ti::split(ds, test_frac, val_frac, split_seed);
            std::cerr << "train=" << parts.train.size() << " validation=" << parts.validation.size()
                      << " test=" << parts.test.size() << '\n';
            std::ostringstream out;
            ti::write_split_csv(parts, out);
            write_output(split_output, out.str());
        };
    });

    // train
    std::string train_data, train_split, train_kind = "wmf", train_similarity = "dot", train_output;
    std::uint64_t train_seed = 0;
    HyperFlags train_flags;
    auto* train = app.add_subcommand("train", "Train a model and write its JSON file");
    auto* data_opt = train->add_option("--data", train_data, "Dataset CSV/JSONL; all observations train");
    train->add_option("--split", train_split, "Split CSV; the train partition is used")->excludes(data_opt);
    train->add_option("--model", train_kind, "wmf|bpr|popularity");
    train->add_option("--similarity", train_similarity, "Default scoring: dot|cosine");
    train->add_option("--seed", train_seed);
    train->add_option("-o,--output", train_output, "Model JSON (stdout by default)");
    train_flags.attach(*train);
    train->callback([&] {
        action = [&] {
            if (train_data.empty() == train_split.empty()) {
                throw CLI::ValidationError("train", "exactly one of --data or --split is required");
            }
            const auto ds = train_data.empty() ? load_split_file(train_split).train : load_dataset_file(train_data, "");
            const auto model = ti::train_model(train_flags.spec(train_kind, train_similarity), ds, train_seed);
            write_output(train_output, ti::save_model(model) + "\n");
        };
    });

    // grid-search
    std::string grid_split, grid_kind = "wmf", grid_output, grid_dims, grid_rates, grid_lambdas,
                grid_similarities = "dot,cosine";
    std::uint64_t grid_seed = 0;
    HyperFlags grid_flags;
    auto* grid = app.add_subcommand("grid-search", "Tune hyperparameters on validation recall@20");
    grid->add_option("--split", grid_split)->required();
    grid->add_option("--model", grid_kind, "wmf|bpr");
    grid->add_option("--dims", grid_dims, "Comma-separated dimensions");
    grid->add_option("--rates", grid_rates, "WMF c values or BPR learning rates");
    grid->add_option("--lambdas", grid_lambdas, "Regularization values");
    grid->add_option("--similarities", grid_similarities, "dot,cosine");
    grid->add_option("--seed", grid_seed);
    grid->add_option("-o,--output", grid_output, "Grid CSV (stdout by default)");
    grid_flags.attach(*grid);
    grid->callback([&] {
        action = [&] {
            const auto parts = load_split_file(grid_split);
            ti::GridSearchConfig config;
            const auto base = grid_flags.spec(grid_kind, "dot");
            config.kind = base.kind;
            config.wmf_base = base.wmf;
            config.bpr_base = base.bpr;
            config.wmf_base.threads = 1;
            config.threads = grid_flags.threads;
            config.seed = grid_seed;
            if (!grid_dims.empty()) config.wmf.dims = config.bpr.dims = parse_sizes(grid_dims);
            if (!grid_rates.empty()) config.wmf.negative_weights = config.bpr.learning_rates = parse_reals(grid_rates);
            if (!grid_lambdas.empty())
                config.wmf.regularizations = config.bpr.regularizations = parse_reals(grid_lambdas);
            config.similarities.clear();
            for (const auto& s : ti::text::split_list(grid_similarities)) {
                config.similarities.push_back(ti::parse_similarity(s));
            }
            const auto result = ti::grid_search(parts, config);
            std::ostringstream out;
            ti::write_grid_csv(result, out);
            write_output(grid_output, out.str());
            if (result.best) {
                const auto& b = result.records[*result.best];
                std::cerr << "best: d=" << b.dim << " lr_or_c=" << b.lr_or_c << " lambda=" << b.regularization
                          << " similarity=" << ti::to_string(b.similarity) << " recall@20=" << b.recall_at_20
                          << " ndcg@20=" << b.ndcg_at_20 << '\n';
            } else {
                std::cerr << "no combination trained successfully\n";
            }
        };
    });

    // evaluate
    std::string eval_split, eval_kind = "wmf", eval_similarity = "dot", eval_model_file, eval_ks = "10,20,50",
                eval_target = "test";
    int eval_runs = 5;
    std::uint64_t eval_seed = 0;
    bool eval_json = false;
    HyperFlags eval_flags;
    auto* evaluate = app.add_subcommand("evaluate", "Report recall@K and NDCG@K averaged over runs");
    evaluate->add_option("--split", eval_split)->required();
    evaluate->add_option("--model", eval_kind, "wmf|bpr|popularity");
    evaluate->add_option("--model-file", eval_model_file, "Evaluate a saved model instead of training");
    evaluate->add_option("--similarity", eval_similarity);
    evaluate->add_option("--k", eval_ks, "Comma-separated cutoffs");
    evaluate->add_option("--runs", eval_runs)->check(CLI::PositiveNumber);
    evaluate->add_option("--target", eval_target, "test|validation");
    evaluate->add_option("--seed", eval_seed, "Base seed");
    evaluate->add_flag("--json", eval_json, "Emit JSON instead of CSV");
    eval_flags.attach(*evaluate);
    evaluate->callback([&] {
        action = [&] {
            const auto parts = load_split_file(eval_split);
            const auto ks = parse_sizes(eval_ks);
            if (eval_target != "test" && eval_target != "validation") {
                throw CLI::ValidationError("--target", "must be test or validation");
            }
            const auto target = eval_target == "test" ? ti::EvalTarget::Test : ti::EvalTarget::Validation;
            nlohmann::ordered_json doc;
            std::string table;
            if (!eval_model_file.empty()) {
                auto model = load_model_file(eval_model_file);
                const auto metrics = ti::evaluate(model, parts, target, ks, eval_flags.threads);
                doc = metrics_json(metrics);
                table = metrics_table(metrics);
            } else {
                const auto result = ti::repeated_eval(parts, eval_flags.spec(eval_kind, eval_similarity), eval_runs,
                                                      eval_seed, target, ks, eval_flags.threads);
                doc = metrics_json(result.mean);
                auto runs = nlohmann::ordered_json::array();
                for (const auto& run : result.runs) {
                    runs.push_back(metrics_json(run));
                }
                doc["runs"] = std::move(runs);
                table = metrics_table(result.mean);
            }
            std::cout << (eval_json ? doc.dump(2) + "\n" : table);
        };
    });

    // predict
    std::string predict_model, predict_observed, predict_export, predict_output, predict_catalog,
        predict_name = "Inferred techniques";
    std::optional<std::string> predict_similarity;
    std::size_t predict_k = 20;
    auto* predict = app.add_subcommand("predict", "Rank additional techniques for an observed set");
    predict->add_option("--model-file", predict_model)->required();
    predict->add_option("--observed", predict_observed, "Comma-separated technique ids")->required();
    predict->add_option("--k", predict_k)->check(CLI::PositiveNumber);
    predict->add_option("--similarity", predict_similarity, "dot|cosine (model default)");
    predict->add_option("--export", predict_export, "navigator|csv (JSON response otherwise)")
        ->check(CLI::IsMember({"navigator", "csv"}));
    predict->add_option("--name", predict_name, "Navigator layer name");
    predict->add_option("--catalog", predict_catalog, "Technique names CSV (technique_id,name)");
    predict->add_option("-o,--output", predict_output);
    predict->callback([&] {
        action = [&] {
            const auto model = load_model_file(predict_model);
            ti::TechniqueCatalog catalog;
            if (!predict_catalog.empty()) {
                std::istringstream in(read_file(predict_catalog));
                catalog = ti::TechniqueCatalog::load_csv(in);
            }
            ti::PredictRequest request;
            request.observed = ti::text::split_list(predict_observed);
            request.k = predict_k;
            if (predict_similarity) {
                request.similarity = ti::parse_similarity(*predict_similarity);
            }
            const auto response = ti::predict(model, request, &catalog);
            for (const auto& id : response.unknown_ids) {
                std::cerr << "ignored unknown technique " << id << '\n';
            }
            std::string content;
            if (predict_export == "navigator") {
                content = ti::export_navigator_layer(response, predict_name);
            } else if (predict_export == "csv") {
                content = ti::export_csv(response);
            } else {
                content = ti::to_json(response).dump(2) + "\n";
            }
            write_output(predict_output, content);
        };
    });

    // project
    std::string project_model, project_output, project_distance = "cosine";
    ti::ProjectionConfig projection;
    double bandwidth = 10.0;
    auto* project = app.add_subcommand("project", "t-SNE of entity embeddings plus mean-shift clusters");
    project->add_option("--model-file", project_model)->required();
    project->add_option("--perplexity", projection.perplexity);
    project->add_option("--distance", project_distance, "cosine|euclidean");
    project->add_option("--bandwidth", bandwidth);
    project->add_option("--iterations", projection.iterations);
    project->add_option("--exaggeration", projection.early_exaggeration);
    project->add_option("--exaggeration-iters", projection.exaggeration_iters);
    project->add_option("--learning-rate", projection.learning_rate);
    project->add_option("--seed", projection.seed);
    project->add_option("--threads", projection.threads)->check(CLI::PositiveNumber);
    project->add_option("-o,--output", project_output, "CSV report_id,x,y,cluster");
    project->callback([&] {
        action = [&] {
            const auto model = load_model_file(project_model);
            projection.distance = ti::parse_distance(project_distance);
            const auto result = ti::project(model.U, projection, bandwidth);
            std::ostringstream out;
            ti::export_projection(result, model.entities, out);
            write_output(project_output, out.str());
            std::cerr << "clusters=" << result.mode_centers.size() << '\n';
        };
    });

    // serve
    std::string serve_model, serve_catalog, serve_bind = "127.0.0.1:8080";
    auto* serve = app.add_subcommand("serve", "Serve the prediction HTTP API");
    serve->add_option("--model-file", serve_model)->required();
    serve->add_option("--catalog", serve_catalog, "Technique names CSV");
    serve->add_option("--bind", serve_bind, "host:port");
    serve->callback([&] {
        action = [&] { ti::serve_http(serve_model, serve_catalog, ti::parse_bind_address(serve_bind)); };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (action) {
            action();
        }
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ti::Error& e) {
        std::cerr << "error [" << ti::error_code_name(e.code()) << "]: " << e.what() << '\n';
        return e.code() == ti::ErrorCode::InvalidArgument ? kExitUsage : kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return 0;
}
