#pragma once

#include <cstdint>
#include <span>

#include "plq/model.hpp"
#include "plq/tensor.hpp"

namespace plq {

struct FiqConfig {
    int m = 100;                        // stochastic pass count
    double dropout_p = 0.5;             // p_d at the dropout site
    double alpha = 130.0;               // scaling steepness
    double r = 0.88;                    // scaling center
    bool normalize_embeddings = false;  // L2-normalize rows before distances
    std::uint64_t seed = 0;
};

struct QualityResult {
    double q_raw = 0.0;    // in (0, 1]; 1 iff all stochastic embeddings agree
    double q_scaled = 0.0; // sigmoid(alpha * (q_raw - r)), in (0, 1)
    FiqConfig config_used;
};

struct QualityStats {
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation (n - 1)
};

struct ScalingParams {
    double alpha = 0.0;
    double r = 0.0;
};

double sigmoid(double x);

/// Raw quality of an {m, D} stochastic-embedding matrix:
/// 2 * sigmoid(-(2/m^2) * sum of Euclidean distances over unordered pairs).
/// With `normalize` set, rows are scaled to unit L2 norm first (zero rows
/// are left unchanged).
double quality_raw(const Tensor& stochastic_embeddings, bool normalize = false);

/// sigmoid(alpha * (q_raw - r)); strictly increasing in q_raw.
double scale_quality(double q_raw, double alpha, double r);

/// Full pipeline: stochastic_embed with (m, seed, dropout_p from config),
/// then quality_raw and scale_quality.
QualityResult quality(const EmbeddingModel& model, const Image& image, const FiqConfig& config);

/// Mean and sample standard deviation of q_scaled over `repeats` runs;
/// repetition k uses seed derive_stream(config.seed, k).
QualityStats quality_stats(const EmbeddingModel& model, const Image& image,
                           const FiqConfig& config, int repeats);

/// r = mean of the development qualities, alpha = ln(19) / (2 * std) so the
/// values at mean +- 2 std map to 0.95 / 0.05. Throws NumericError on zero
/// variance (choose alpha manually in that case).
ScalingParams calibrate_scaling(std::span<const double> dev_qualities);

} // namespace plq
