#pragma once

#include <optional>
#include <vector>

#include "plq/model.hpp"
#include "plq/quality.hpp"
#include "plq/tensor.hpp"

namespace plq {

enum class WeightMode {
    PaperLiteral,  // every weight is q_scaled / ||e||_1
    SignCorrected, // weight i is q_scaled * sign(e_i) / ||e||_1
};

/// One-node quality regression head attached to the embedding layer.
/// Linear activation, bias fixed at 0. For elementwise-nonnegative
/// embeddings (always true for the reference architecture) evaluating the
/// head on its source embedding reproduces q_scaled exactly in both modes;
/// for signed embeddings only SignCorrected does.
struct QualityHead {
    Tensor weights;             // {D}
    double bias = 0.0;
    double source_quality = 0.0;
    WeightMode mode = WeightMode::PaperLiteral;
};

QualityHead build_head(const Tensor& embedding, double q_scaled, WeightMode mode);

double evaluate_head(const QualityHead& head, const Tensor& embedding);

/// Gradient of the head output w.r.t. the input pixels.
struct SaliencyMap {
    Tensor grads;                         // {H, W, C}, signed
    std::optional<double> clip_norm;      // threshold used, if any
    double max_backward_norm = 0.0;       // largest pre-clip upstream L2 norm
};

/// Backpropagates the head weights through all layers with the dropout site
/// in deterministic pass-through mode. If clip_norm is set and the gradient
/// tensor entering a layer's backward step has L2 norm above it, the tensor
/// is rescaled to that norm before proceeding.
SaliencyMap saliency(const EmbeddingModel& model, const Image& image, const QualityHead& head,
                     std::optional<double> clip_norm = std::nullopt);

/// Elementwise mean of per-channel absolute gradients: an {H, W} grid.
Tensor merge_channels(const SaliencyMap& map);

/// Pixel-level quality map: values are v(s) = 1 - 1/(1 + 10^gamma * s^2),
/// each in [0, 1). The merged saliency is retained for re-visualization.
struct PlqMap {
    Tensor values;          // {H, W}
    double gamma = 0.0;
    Tensor merged_saliency; // {H, W}, nonnegative
};

/// Applies v elementwise. No per-image normalization happens here or
/// anywhere else in the pipeline, so maps of different images remain
/// directly comparable.
PlqMap visualize(const Tensor& merged_saliency, double gamma);

struct PlqResult {
    QualityResult quality;
    PlqMap map;
};

/// Full pipeline: quality -> head -> saliency -> channel merge -> visualize,
/// sharing one deterministic embedding between head construction and the
/// backward pass. Deterministic given config.seed.
PlqResult plq_map(const EmbeddingModel& model, const Image& image, const FiqConfig& config,
                  double gamma, WeightMode mode = WeightMode::PaperLiteral,
                  std::optional<double> clip_norm = std::nullopt);

/// Picks gamma so that the 95th percentile of the merged-saliency values
/// inside face_box (pooled over all references) maps to v = 0.9:
/// gamma = log10(9) - 2 log10(q95).
double calibrate_gamma(const std::vector<Tensor>& reference_merged, const Rect& face_box);

} // namespace plq
