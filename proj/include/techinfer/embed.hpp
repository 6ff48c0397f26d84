#ifndef TECHINFER_EMBED_HPP
#define TECHINFER_EMBED_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "techinfer/dataset.hpp"
#include "techinfer/model.hpp"

namespace techinfer {

enum class Distance { Cosine, Euclidean };

Distance parse_distance(std::string_view text);

struct ProjectionConfig {
    double perplexity = 30.0;
    Distance distance = Distance::Cosine;
    int iterations = 1000;
    double early_exaggeration = 12.0;
    int exaggeration_iters = 250;
    double learning_rate = 200.0;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    /// Requires perplexity < (points − 1)/3 and positive settings.
    void validate(std::size_t points) const;
};

/// Dissimilarities fed to the Gaussian kernel: squared Euclidean distance, or
/// cosine distance 1 − cos(x_i, x_j) (zero vectors are at distance 1).
Matrix affinity_distances(const Matrix& points, Distance distance);

struct RowCalibration {
    std::vector<double> probabilities;
    double beta = 0.0;
    /// exp of the achieved Shannon entropy (nats).
    double perplexity = 0.0;
};

/// Bisects the kernel precision β so that p_j ∝ exp(−β·d_j) reaches the
/// requested perplexity.
RowCalibration calibrate_row(std::span<const double> distances, double perplexity);

/// Row i holds p_{j|i}; the diagonal is zero.
Matrix conditional_affinities(const Matrix& points, const ProjectionConfig& config);

/// p_ij = (p_{j|i} + p_{i|j}) / 2m.
Matrix joint_affinities(const Matrix& conditional);

/// KL(P‖Q) with Student-t similarities Q of the embedding.
double kl_divergence(const Matrix& joint, const Matrix& embedding);

/// Called after each completed iteration (1-based) with the current embedding.
using TsneObserver = std::function<void(int iteration, const Matrix& embedding)>;

/// Exact t-SNE to two dimensions: plain gradient descent with momentum 0.5
/// during early exaggeration and 0.8 afterwards, no per-parameter gains.
Matrix tsne(const Matrix& points, const ProjectionConfig& config, const TsneObserver& observer = {});

struct MeanShiftResult {
    std::vector<std::size_t> labels;
    std::vector<std::array<double, 2>> centers;
};

/// Flat-kernel mean shift seeded at every point. Modes within one bandwidth
/// merge into the higher-support one; points take the nearest surviving mode.
MeanShiftResult mean_shift(const Matrix& points, double bandwidth);

struct EmbeddingProjection {
    Matrix coords;
    std::vector<std::size_t> cluster_labels;
    std::vector<std::array<double, 2>> mode_centers;
};

EmbeddingProjection project(const Matrix& points, const ProjectionConfig& config, double bandwidth);

/// CSV `report_id,x,y,cluster`.
void export_projection(const EmbeddingProjection& projection, std::span<const ReportId> entities,
                       std::ostream& out);

}  // namespace techinfer

#endif
