#include "techinfer/embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include "parallel.hpp"
#include "techinfer/error.hpp"
#include "techinfer/text.hpp"

namespace techinfer {

namespace {

constexpr int kBisectionSteps = 200;
constexpr double kEntropyTolerance = 1e-12;
constexpr int kMeanShiftMaxIter = 300;
constexpr double kMeanShiftTolerance = 1e-6;

/// Σ_{i≠j} 1/(1+‖y_i−y_j‖²).
double student_normalizer(const Matrix& y) {
    const auto m = y.rows();
    double z = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const double dx = y(i, 0) - y(j, 0);
            const double dy = y(i, 1) - y(j, 1);
            z += 2.0 / (1.0 + dx * dx + dy * dy);
        }
    }
    return z;
}

void check_finite(const Matrix& points) {
    if (!points.allFinite()) {
        throw Error(ErrorCode::NonFiniteInput, "input points contain non-finite values");
    }
}

Vector row_norms(const Matrix& points) {
    Vector norms(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        norms(i) = points.row(i).norm();
    }
    return norms;
}

double pair_distance(const Matrix& points, const Vector& norms, Eigen::Index i, Eigen::Index j, Distance distance) {
    if (distance == Distance::Euclidean) {
        return (points.row(i) - points.row(j)).squaredNorm();
    }
    const double denom = norms(i) * norms(j);
    const double cosine = denom > 0.0 ? points.row(i).dot(points.row(j)) / denom : 0.0;
    return std::max(0.0, 1.0 - std::clamp(cosine, -1.0, 1.0));
}

}  // namespace

Distance parse_distance(std::string_view text) {
    if (text == "cosine") return Distance::Cosine;
    if (text == "euclidean") return Distance::Euclidean;
    throw Error(ErrorCode::InvalidArgument, "unknown distance '" + std::string(text) + "'");
}

void ProjectionConfig::validate(std::size_t points) const {
    if (points < 4) {
        throw Error(ErrorCode::InvalidArgument, "t-SNE needs at least 4 points");
    }
    if (!(perplexity > 0.0) || !(perplexity < (static_cast<double>(points) - 1.0) / 3.0)) {
        throw Error(ErrorCode::PerplexityInfeasible,
                    "perplexity must be positive and below (points - 1) / 3 = " +
                        std::to_string((static_cast<double>(points) - 1.0) / 3.0));
    }
    if (iterations < 1 || exaggeration_iters < 0 || !(early_exaggeration > 0.0) || !(learning_rate > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "invalid t-SNE optimization settings");
    }
}

Matrix affinity_distances(const Matrix& points, Distance distance) {
    check_finite(points);
    const auto m = points.rows();
    const auto norms = row_norms(points);
    Matrix out = Matrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const double value = pair_distance(points, norms, i, j, distance);
            out(i, j) = value;
            out(j, i) = value;
        }
    }
    return out;
}

RowCalibration calibrate_row(std::span<const double> distances, double perplexity) {
    RowCalibration result;
    const std::size_t count = distances.size();
    result.probabilities.assign(count, 0.0);
    if (count == 0) {
        return result;
    }
    const double target = std::log(perplexity);
    // Shifting by the minimum leaves the normalized kernel unchanged and avoids underflow.
    const double shift = *std::min_element(distances.begin(), distances.end());

    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double entropy = 0.0;
    auto evaluate_at = [&](double b) {
        double sum = 0.0;
        double weighted = 0.0;
        for (std::size_t j = 0; j < count; ++j) {
            const double delta = distances[j] - shift;
            const double p = std::exp(-b * delta);
            result.probabilities[j] = p;
            sum += p;
            weighted += delta * p;
        }
        for (auto& p : result.probabilities) {
            p /= sum;
        }
        return std::log(sum) + b * weighted / sum;
    };
    for (int step = 0; step < kBisectionSteps; ++step) {
        entropy = evaluate_at(beta);
        const double gap = entropy - target;
        if (std::abs(gap) < kEntropyTolerance) {
            break;
        }
        if (gap > 0) {
            lo = beta;
            beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
    }
    entropy = evaluate_at(beta);
    result.beta = beta;
    result.perplexity = std::exp(entropy);
    return result;
}

Matrix conditional_affinities(const Matrix& points, const ProjectionConfig& config) {
    check_finite(points);
    const auto norms = row_norms(points);
    const auto m = static_cast<std::size_t>(points.rows());
    Matrix conditional = Matrix::Zero(points.rows(), points.rows());
    detail::parallel_for(m, config.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> row;
        for (std::size_t i = begin; i < end; ++i) {
            row.clear();
            for (std::size_t j = 0; j < m; ++j) {
                if (j != i) {
                    row.push_back(pair_distance(points, norms, static_cast<Eigen::Index>(i),
                                                static_cast<Eigen::Index>(j), config.distance));
                }
            }
            const auto calibration = calibrate_row(row, config.perplexity);
            std::size_t slot = 0;
            for (std::size_t j = 0; j < m; ++j) {
                if (j != i) {
                    conditional(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                        calibration.probabilities[slot++];
                }
            }
        }
    });
    return conditional;
}

Matrix joint_affinities(const Matrix& conditional) {
    const double scale = 2.0 * static_cast<double>(conditional.rows());
    Matrix joint = conditional;
    for (Eigen::Index i = 0; i < joint.rows(); ++i) {
        for (Eigen::Index j = i; j < joint.cols(); ++j) {
            const double value = (joint(i, j) + joint(j, i)) / scale;
            joint(i, j) = value;
            joint(j, i) = value;
        }
    }
    return joint;
}

double kl_divergence(const Matrix& joint, const Matrix& embedding) {
    const double z = student_normalizer(embedding);
    double kl = 0.0;
    for (Eigen::Index i = 0; i < joint.rows(); ++i) {
        for (Eigen::Index j = 0; j < joint.cols(); ++j) {
            const double p = joint(i, j);
            if (i != j && p > 0.0) {
                const double kernel = 1.0 / (1.0 + (embedding.row(i) - embedding.row(j)).squaredNorm());
                const double q = std::max(kernel / z, std::numeric_limits<double>::min());
                kl += p * std::log(p / q);
            }
        }
    }
    return kl;
}

Matrix tsne(const Matrix& points, const ProjectionConfig& config, const TsneObserver& observer) {
    const auto m = points.rows();
    config.validate(static_cast<std::size_t>(m));
    const Matrix joint = joint_affinities(conditional_affinities(points, config));

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1e-4);
    Matrix y(m, 2);
    for (Eigen::Index i = 0; i < m; ++i) {
        y(i, 0) = normal(rng);
        y(i, 1) = normal(rng);
    }
    Matrix velocity = Matrix::Zero(m, 2);
    Matrix gradient(m, 2);

    for (int iter = 0; iter < config.iterations; ++iter) {
        const bool exaggerating = iter < config.exaggeration_iters;
        const double exaggeration = exaggerating ? config.early_exaggeration : 1.0;
        const double momentum = exaggerating ? 0.5 : 0.8;

        const double z = student_normalizer(y);
        detail::parallel_for(static_cast<std::size_t>(m), config.threads, [&](std::size_t begin, std::size_t end) {
            for (auto i = static_cast<Eigen::Index>(begin); i < static_cast<Eigen::Index>(end); ++i) {
                double gx = 0.0;
                double gy = 0.0;
                for (Eigen::Index j = 0; j < m; ++j) {
                    if (j == i) {
                        continue;
                    }
                    const double dx = y(i, 0) - y(j, 0);
                    const double dy = y(i, 1) - y(j, 1);
                    const double k = 1.0 / (1.0 + dx * dx + dy * dy);
                    const double coeff = (exaggeration * joint(i, j) - k / z) * k;
                    gx += coeff * dx;
                    gy += coeff * dy;
                }
                gradient(i, 0) = 4.0 * gx;
                gradient(i, 1) = 4.0 * gy;
            }
        });
        velocity = momentum * velocity - config.learning_rate * gradient;
        y += velocity;
        y.rowwise() -= y.colwise().mean();
        if (observer) {
            observer(iter + 1, y);
        }
    }
    return y;
}

MeanShiftResult mean_shift(const Matrix& points, double bandwidth) {
    if (!(bandwidth > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "bandwidth must be positive");
    }
    if (points.cols() != 2) {
        throw Error(ErrorCode::DimensionMismatch, "mean shift expects 2-D points");
    }
    const auto m = points.rows();
    if (m < 1) {
        throw Error(ErrorCode::InvalidArgument, "mean shift needs at least one point");
    }
    const double radius2 = bandwidth * bandwidth;

    struct Mode {
        std::array<double, 2> center;
        std::size_t support;
    };
    std::vector<Mode> modes;
    modes.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index s = 0; s < m; ++s) {
        double cx = points(s, 0);
        double cy = points(s, 1);
        std::size_t support = 0;
        for (int iter = 0; iter < kMeanShiftMaxIter; ++iter) {
            double sx = 0.0;
            double sy = 0.0;
            std::size_t count = 0;
            for (Eigen::Index p = 0; p < m; ++p) {
                const double dx = points(p, 0) - cx;
                const double dy = points(p, 1) - cy;
                if (dx * dx + dy * dy <= radius2) {
                    sx += points(p, 0);
                    sy += points(p, 1);
                    ++count;
                }
            }
            if (count == 0) {
                break;
            }
            const double nx = sx / static_cast<double>(count);
            const double ny = sy / static_cast<double>(count);
            const double shift = std::hypot(nx - cx, ny - cy);
            cx = nx;
            cy = ny;
            support = count;
            if (shift < kMeanShiftTolerance) {
                break;
            }
        }
        modes.push_back({{cx, cy}, support});
    }

    std::vector<std::size_t> order(modes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return modes[a].support > modes[b].support; });
    MeanShiftResult result;
    for (auto idx : order) {
        const auto& c = modes[idx].center;
        const bool near_kept = std::any_of(result.centers.begin(), result.centers.end(), [&](const auto& kept) {
            return std::hypot(kept[0] - c[0], kept[1] - c[1]) < bandwidth;
        });
        if (!near_kept) {
            result.centers.push_back(c);
        }
    }
    result.labels.resize(static_cast<std::size_t>(m));
    for (Eigen::Index p = 0; p < m; ++p) {
        std::size_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < result.centers.size(); ++c) {
            const double dx = points(p, 0) - result.centers[c][0];
            const double dy = points(p, 1) - result.centers[c][1];
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d2) {
                best_d2 = d2;
                best = c;
            }
        }
        result.labels[static_cast<std::size_t>(p)] = best;
    }
    return result;
}

EmbeddingProjection project(const Matrix& points, const ProjectionConfig& config, double bandwidth) {
    EmbeddingProjection projection;
    projection.coords = tsne(points, config);
    auto clusters = mean_shift(projection.coords, bandwidth);
    projection.cluster_labels = std::move(clusters.labels);
    projection.mode_centers = std::move(clusters.centers);
    return projection;
}

void export_projection(const EmbeddingProjection& projection, std::span<const ReportId> entities,
                       std::ostream& out) {
    if (entities.size() != static_cast<std::size_t>(projection.coords.rows()) ||
        projection.cluster_labels.size() != entities.size()) {
        throw Error(ErrorCode::DimensionMismatch, "projection rows do not match the entity catalog");
    }
    out << "report_id,x,y,cluster\n";
    for (std::size_t i = 0; i < entities.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        out << text::csv_field(entities[i].str()) << ',' << text::format_double(projection.coords(row, 0)) << ','
            << text::format_double(projection.coords(row, 1)) << ',' << projection.cluster_labels[i] << '\n';
    }
}

}  // namespace techinfer
