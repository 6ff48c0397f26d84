#include "techinfer/eval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "parallel.hpp"
#include "techinfer/error.hpp"
#include "techinfer/text.hpp"

namespace techinfer {

namespace {

void require_targets(std::span<const std::size_t> targets, std::size_t k) {
    if (targets.empty()) {
        throw Error(ErrorCode::InvalidArgument, "target set is empty");
    }
    if (k == 0) {
        throw Error(ErrorCode::InvalidArgument, "K must be at least 1");
    }
}

std::vector<std::size_t> sorted_unique(std::span<const std::size_t> values) {
    std::vector<std::size_t> out(values.begin(), values.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::vector<std::size_t>> rows_of(const InteractionDataset& ds) {
    std::vector<std::vector<std::size_t>> rows(ds.entity_count());
    for (const auto& obs : ds.observations()) {
        rows[obs.entity].push_back(obs.item);
    }
    for (auto& row : rows) {
        std::sort(row.begin(), row.end());
    }
    return rows;
}

}  // namespace

RankedPredictions rank_items(const Matrix& item_factors, const Vector& embedding,
                             std::span<const std::size_t> exclude, Similarity similarity, std::size_t limit) {
    if (embedding.size() != item_factors.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "embedding length does not match the model dimension");
    }
    const auto n = static_cast<std::size_t>(item_factors.rows());
    std::vector<char> excluded(n, 0);
    for (auto j : exclude) {
        if (j < n) {
            excluded[j] = 1;
        }
    }
    const Vector raw = item_factors * embedding;
    const double embedding_norm = embedding.norm();

    RankedPredictions ranked;
    ranked.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (excluded[j]) {
            continue;
        }
        double score = raw(static_cast<Eigen::Index>(j));
        if (similarity == Similarity::Cosine) {
            const double denom = embedding_norm * item_factors.row(static_cast<Eigen::Index>(j)).norm();
            score = denom > 0.0 ? score / denom : 0.0;
        }
        ranked.push_back({j, score, 0});
    }
    const auto better = [](const RankedItem& a, const RankedItem& b) {
        return a.score > b.score || (a.score == b.score && a.item < b.item);
    };
    if (limit < ranked.size()) {
        std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(limit), ranked.end(),
                          better);
        ranked.resize(limit);
    } else {
        std::sort(ranked.begin(), ranked.end(), better);
    }
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        ranked[r].rank = r + 1;
    }
    return ranked;
}

RankedPredictions rank_items(const FactorModel& model, const Vector& embedding,
                             std::span<const std::size_t> exclude, Similarity similarity, std::size_t limit) {
    return rank_items(model.V, embedding, exclude, similarity, limit);
}

double recall_at_k(const RankedPredictions& ranked, std::span<const std::size_t> targets, std::size_t k) {
    require_targets(targets, k);
    const auto relevant = sorted_unique(targets);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) {
        hits += std::binary_search(relevant.begin(), relevant.end(), ranked[r].item) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double ndcg_at_k(const RankedPredictions& ranked, std::span<const std::size_t> targets, std::size_t k) {
    require_targets(targets, k);
    const auto relevant = sorted_unique(targets);
    double dcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) {
        if (std::binary_search(relevant.begin(), relevant.end(), ranked[r].item)) {
            dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        }
    }
    double ideal = 0.0;
    for (std::size_t r = 0; r < std::min(k, relevant.size()); ++r) {
        ideal += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
    return dcg / ideal;
}

RankingMetrics evaluate(const FactorModel& model, const SplitDataset& split, EvalTarget target,
                        std::span<const std::size_t> ks, unsigned threads) {
    const auto cutoffs = sorted_unique(ks);
    if (cutoffs.empty() || cutoffs.front() == 0) {
        throw Error(ErrorCode::InvalidArgument, "K values must be positive");
    }
    if (static_cast<std::size_t>(model.U.rows()) != split.train.entity_count() ||
        static_cast<std::size_t>(model.V.rows()) != split.train.item_count()) {
        throw Error(ErrorCode::DimensionMismatch, "model shape does not match the split catalogs");
    }
    const auto train_rows = rows_of(split.train);
    const auto target_rows = rows_of(target == EvalTarget::Test ? split.test : split.validation);
    const std::size_t max_k = cutoffs.back();
    const std::size_t m = train_rows.size();

    // Per-entity values land in fixed slots; the reduction below is sequential.
    std::vector<std::vector<MetricAtK>> per_entity(m);
    detail::parallel_for(m, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            if (target_rows[i].empty()) {
                continue;
            }
            const Vector u = model.U.row(static_cast<Eigen::Index>(i)).transpose();
            const auto ranked = rank_items(model.V, u, train_rows[i], model.similarity, max_k);
            auto& slot = per_entity[i];
            slot.reserve(cutoffs.size());
            for (auto k : cutoffs) {
                slot.push_back({recall_at_k(ranked, target_rows[i], k), ndcg_at_k(ranked, target_rows[i], k)});
            }
        }
    });

    RankingMetrics metrics;
    std::vector<MetricAtK> sums(cutoffs.size());
    for (const auto& slot : per_entity) {
        if (slot.empty()) {
            continue;
        }
        ++metrics.entities_evaluated;
        for (std::size_t c = 0; c < cutoffs.size(); ++c) {
            sums[c].recall += slot[c].recall;
            sums[c].ndcg += slot[c].ndcg;
        }
    }
    if (metrics.entities_evaluated == 0) {
        throw Error(ErrorCode::NoEvaluableEntities, "no entity has withheld items in the target partition");
    }
    const auto count = static_cast<double>(metrics.entities_evaluated);
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
        metrics.at_k[cutoffs[c]] = {sums[c].recall / count, sums[c].ndcg / count};
    }
    return metrics;
}

WmfGrid WmfGrid::standard() {
    return {{4, 8, 16, 32}, {1e-4, 1e-3, 5e-3, 0.01, 0.05, 0.1, 0.3, 0.5, 0.7}, {0.0, 1e-5, 1e-4, 1e-3, 0.01}};
}

BprGrid BprGrid::standard() {
    return {{4, 8, 16, 32}, {1e-5, 5e-5, 1e-4, 1e-3, 5e-3, 0.01, 0.02, 0.05}, {0.0, 1e-4, 1e-3, 0.01}};
}

ModelSpec GridRecord::spec(const GridSearchConfig& config) const {
    ModelSpec spec;
    spec.kind = kind;
    spec.similarity = similarity;
    spec.wmf = config.wmf_base;
    spec.bpr = config.bpr_base;
    if (kind == ModelKind::Wmf) {
        spec.wmf.dim = dim;
        spec.wmf.negative_weight = lr_or_c;
        spec.wmf.regularization = regularization;
    } else {
        spec.bpr.dim = dim;
        spec.bpr.learning_rate = lr_or_c;
        spec.bpr.regularization = regularization;
    }
    return spec;
}

GridSearchResult grid_search(const SplitDataset& split, const GridSearchConfig& config) {
    if (config.kind == ModelKind::Popularity) {
        throw Error(ErrorCode::InvalidArgument, "grid search applies to wmf or bpr");
    }
    if (config.similarities.empty()) {
        throw Error(ErrorCode::InvalidArgument, "at least one similarity is required");
    }
    struct Combination {
        std::size_t dim;
        double lr_or_c;
        double regularization;
    };
    std::vector<Combination> combos;
    const bool wmf = config.kind == ModelKind::Wmf;
    const auto& dims = wmf ? config.wmf.dims : config.bpr.dims;
    const auto& rates = wmf ? config.wmf.negative_weights : config.bpr.learning_rates;
    const auto& regs = wmf ? config.wmf.regularizations : config.bpr.regularizations;
    for (auto d : dims) {
        for (auto r : rates) {
            for (auto l : regs) {
                combos.push_back({d, r, l});
            }
        }
    }
    if (combos.empty()) {
        throw Error(ErrorCode::InvalidArgument, "hyperparameter grid is empty");
    }

    const std::size_t per_combo = config.similarities.size();
    GridSearchResult result;
    result.records.resize(combos.size() * per_combo);
    const std::size_t ks[] = {20};
    detail::parallel_for(combos.size(), config.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
            GridRecord base;
            base.kind = config.kind;
            base.dim = combos[c].dim;
            base.lr_or_c = combos[c].lr_or_c;
            base.regularization = combos[c].regularization;
            std::optional<FactorModel> model;
            std::optional<std::string> failure;
            try {
                model = train_model(base.spec(config), split.train, config.seed);
            } catch (const std::exception& ex) {
                failure = ex.what();
            }
            for (std::size_t s = 0; s < per_combo; ++s) {
                GridRecord record = base;
                record.similarity = config.similarities[s];
                record.error = failure;
                if (model) {
                    try {
                        model->similarity = record.similarity;
                        const auto metrics = evaluate(*model, split, EvalTarget::Validation, ks);
                        record.recall_at_20 = metrics.at_k.at(20).recall;
                        record.ndcg_at_20 = metrics.at_k.at(20).ndcg;
                    } catch (const std::exception& ex) {
                        record.error = ex.what();
                    }
                }
                result.records[c * per_combo + s] = std::move(record);
            }
        }
    });

    for (std::size_t r = 0; r < result.records.size(); ++r) {
        const auto& rec = result.records[r];
        if (rec.error) {
            continue;
        }
        if (!result.best) {
            result.best = r;
            continue;
        }
        const auto& incumbent = result.records[*result.best];
        const bool better = rec.recall_at_20 > incumbent.recall_at_20 ||
                            (rec.recall_at_20 == incumbent.recall_at_20 &&
                             (rec.dim < incumbent.dim ||
                              (rec.dim == incumbent.dim && rec.regularization < incumbent.regularization)));
        if (better) {
            result.best = r;
        }
    }
    return result;
}

void write_grid_csv(const GridSearchResult& result, std::ostream& out) {
    out << "model,d,lr_or_c,lambda,similarity,recall@20,ndcg@20\n";
    for (const auto& rec : result.records) {
        out << to_string(rec.kind) << ',' << rec.dim << ',' << text::format_double(rec.lr_or_c) << ','
            << text::format_double(rec.regularization) << ',' << to_string(rec.similarity) << ',';
        if (rec.error) {
            out << ",\n";
        } else {
            out << text::format_double(rec.recall_at_20) << ',' << text::format_double(rec.ndcg_at_20) << '\n';
        }
    }
}

RepeatedMetrics repeated_eval(const SplitDataset& split, const ModelSpec& spec, int runs, std::uint64_t base_seed,
                              EvalTarget target, std::span<const std::size_t> ks, unsigned threads) {
    if (runs < 1) {
        throw Error(ErrorCode::InvalidArgument, "runs must be at least 1");
    }
    RepeatedMetrics result;
    for (int r = 0; r < runs; ++r) {
        const auto model = train_model(spec, split.train, base_seed + static_cast<std::uint64_t>(r));
        result.runs.push_back(evaluate(model, split, target, ks, threads));
    }
    result.mean.entities_evaluated = result.runs.front().entities_evaluated;
    for (const auto& [k, unused] : result.runs.front().at_k) {
        MetricAtK sum;
        for (const auto& run : result.runs) {
            sum.recall += run.at_k.at(k).recall;
            sum.ndcg += run.at_k.at(k).ndcg;
        }
        result.mean.at_k[k] = {sum.recall / runs, sum.ndcg / runs};
    }
    return result;
}

}  // namespace techinfer
