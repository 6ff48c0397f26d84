#ifndef TECHINFER_EVAL_HPP
#define TECHINFER_EVAL_HPP

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "techinfer/dataset.hpp"
#include "techinfer/model.hpp"
#include "techinfer/training.hpp"

namespace techinfer {

struct RankedItem {
    std::size_t item = 0;
    double score = 0.0;
    /// 1-based.
    std::size_t rank = 0;
};

/// Scores non-increasing, ties by ascending item index, ranks 1..n.
using RankedPredictions = std::vector<RankedItem>;

inline constexpr std::size_t kAllItems = std::numeric_limits<std::size_t>::max();

/// Ranks every item not in `exclude` by ⟨u,V_j⟩ (dot) or the cosine of the
/// angle between u and V_j (0 when either norm vanishes). Only the first
/// `limit` entries are materialized.
RankedPredictions rank_items(const Matrix& item_factors, const Vector& embedding,
                             std::span<const std::size_t> exclude, Similarity similarity,
                             std::size_t limit = kAllItems);
RankedPredictions rank_items(const FactorModel& model, const Vector& embedding,
                             std::span<const std::size_t> exclude, Similarity similarity,
                             std::size_t limit = kAllItems);

/// Hits among the top K divided by |targets|. Throws on empty targets or K = 0.
double recall_at_k(const RankedPredictions& ranked, std::span<const std::size_t> targets, std::size_t k);

/// DCG over the top K with 1/log2(rank+1) gains, normalized by the ideal DCG
/// of min(K, |targets|) hits.
double ndcg_at_k(const RankedPredictions& ranked, std::span<const std::size_t> targets, std::size_t k);

struct MetricAtK {
    double recall = 0.0;
    double ndcg = 0.0;
};

struct RankingMetrics {
    std::map<std::size_t, MetricAtK> at_k;
    std::size_t entities_evaluated = 0;
};

enum class EvalTarget { Validation, Test };

/// Averages recall@K and NDCG@K over entities with a non-empty target set,
/// ranking all items except the entity's training items with the model's
/// similarity. Throws Error(NoEvaluableEntities) if no entity qualifies.
RankingMetrics evaluate(const FactorModel& model, const SplitDataset& split, EvalTarget target,
                        std::span<const std::size_t> ks, unsigned threads = 1);

struct WmfGrid {
    std::vector<std::size_t> dims;
    std::vector<double> negative_weights;
    std::vector<double> regularizations;

    static WmfGrid standard();
};

struct BprGrid {
    std::vector<std::size_t> dims;
    std::vector<double> learning_rates;
    std::vector<double> regularizations;

    static BprGrid standard();
};

struct GridSearchConfig {
    ModelKind kind = ModelKind::Wmf;
    WmfGrid wmf = WmfGrid::standard();
    BprGrid bpr = BprGrid::standard();
    /// Epochs, init scale and other non-grid settings are taken from these.
    WmfHyperparams wmf_base;
    BprHyperparams bpr_base;
    std::vector<Similarity> similarities{Similarity::Dot, Similarity::Cosine};
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct GridRecord {
    ModelKind kind = ModelKind::Wmf;
    std::size_t dim = 0;
    /// Learning rate for BPR, negative weight c for WMF.
    double lr_or_c = 0.0;
    double regularization = 0.0;
    Similarity similarity = Similarity::Dot;
    double recall_at_20 = 0.0;
    double ndcg_at_20 = 0.0;
    std::optional<std::string> error;

    [[nodiscard]] ModelSpec spec(const GridSearchConfig& config) const;
};

struct GridSearchResult {
    std::vector<GridRecord> records;
    /// Maximizes validation recall@20; ties prefer smaller d, then smaller λ.
    std::optional<std::size_t> best;
};

/// Trains every combination on split.train and scores validation recall@20 and
/// NDCG@20 under each similarity. Training failures are recorded, not thrown.
GridSearchResult grid_search(const SplitDataset& split, const GridSearchConfig& config);

/// CSV `model,d,lr_or_c,lambda,similarity,recall@20,ndcg@20`.
void write_grid_csv(const GridSearchResult& result, std::ostream& out);

struct RepeatedMetrics {
    RankingMetrics mean;
    std::vector<RankingMetrics> runs;
};

/// Trains with seeds base_seed .. base_seed+runs−1 and averages each metric.
RepeatedMetrics repeated_eval(const SplitDataset& split, const ModelSpec& spec, int runs, std::uint64_t base_seed,
                              EvalTarget target, std::span<const std::size_t> ks, unsigned threads = 1);

}  // namespace techinfer

#endif
