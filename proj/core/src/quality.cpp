#include "plq/quality.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "plq/errors.hpp"
#include "plq/rng.hpp"

namespace plq {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double quality_raw(const Tensor& stochastic_embeddings, bool normalize) {
    const Tensor& x = stochastic_embeddings;
    if (x.rank() != 2) {
        throw ShapeError("stochastic embeddings must be an {m, D} matrix, got " +
                         shape_to_string(x.shape));
    }
    const std::size_t m = x.shape[0];
    const std::size_t d = x.shape[1];
    if (m < 2) {
        throw std::invalid_argument("quality_raw needs at least 2 stochastic embeddings");
    }

    std::vector<double> rows;
    const double* base = x.data.data();
    if (normalize) {
        rows = x.data;
        for (std::size_t i = 0; i < m; ++i) {
            double norm = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double v = rows[i * d + j];
                norm += v * v;
            }
            norm = std::sqrt(norm);
            if (norm > 0.0) {
                for (std::size_t j = 0; j < d; ++j) rows[i * d + j] /= norm;
            }
        }
        base = rows.data();
    }

    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double dist2 = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = base[i * d + k] - base[j * d + k];
                dist2 += diff * diff;
            }
            sum += std::sqrt(dist2);
        }
    }
    const double mm = static_cast<double>(m);
    return 2.0 * sigmoid(-(2.0 / (mm * mm)) * sum);
}

double scale_quality(double q_raw, double alpha, double r) {
    if (!(alpha > 0.0)) {
        throw std::invalid_argument("alpha must be > 0");
    }
    return sigmoid(alpha * (q_raw - r));
}

QualityResult quality(const EmbeddingModel& model, const Image& image, const FiqConfig& config) {
    const Tensor x = stochastic_embed(model, image, config.m, config.seed, config.dropout_p);
    QualityResult result;
    result.q_raw = quality_raw(x, config.normalize_embeddings);
    result.q_scaled = scale_quality(result.q_raw, config.alpha, config.r);
    result.config_used = config;
    return result;
}

QualityStats quality_stats(const EmbeddingModel& model, const Image& image,
                           const FiqConfig& config, int repeats) {
    if (repeats < 2) {
        throw std::invalid_argument("quality_stats needs repeats >= 2");
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(repeats));
    for (int k = 0; k < repeats; ++k) {
        FiqConfig rep = config;
        rep.seed = derive_stream(config.seed, static_cast<std::uint64_t>(k));
        values.push_back(quality(model, image, rep).q_scaled);
    }
    QualityStats stats;
    for (double v : values) stats.mean += v;
    stats.mean /= static_cast<double>(repeats);
    double ss = 0.0;
    for (double v : values) ss += (v - stats.mean) * (v - stats.mean);
    stats.stddev = std::sqrt(ss / static_cast<double>(repeats - 1));
    return stats;
}

ScalingParams calibrate_scaling(std::span<const double> dev_qualities) {
    if (dev_qualities.size() < 2) {
        throw std::invalid_argument("calibration needs at least 2 development qualities");
    }
    const double n = static_cast<double>(dev_qualities.size());
    double mean = 0.0;
    for (double q : dev_qualities) mean += q;
    mean /= n;
    double ss = 0.0;
    for (double q : dev_qualities) ss += (q - mean) * (q - mean);
    const double stddev = std::sqrt(ss / (n - 1.0));
    // Raw qualities live in (0, 1], so anything below 1e-12 is rounding
    // noise from an effectively constant development set.
    if (stddev < 1e-12) {
        throw NumericError("development qualities have zero variance; pick alpha manually");
    }
    ScalingParams params;
    params.r = mean;
    params.alpha = std::log(19.0) / (2.0 * stddev);
    return params;
}

} // namespace plq
