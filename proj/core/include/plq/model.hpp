#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "plq/layers.hpp"
#include "plq/tensor.hpp"

namespace plq {

/// Layered embedding network with one dropout site in front of the final
/// embedding layer. Immutable after construction/loading; all operations
/// on it are pure.
struct EmbeddingModel {
    std::vector<Layer> layers;
    std::array<std::size_t, 3> input_shape{}; // {H, W, C}
    int embedding_dim = 0;
    double dropout_p = 0.5;

    /// Index of the DropoutSite layer, if any.
    std::optional<std::size_t> dropout_index() const;

    /// Checks the reference-architecture invariants: exactly one dropout
    /// site immediately before the final FullyConnected layer, which maps
    /// to embedding_dim and is followed by a terminal ReLU. Throws on
    /// violation. Hand-built layer stacks used for isolated gradient
    /// checks need not satisfy this.
    void validate() const;
};

/// Reference architecture: 32x32x3 -> Conv3x3x8(pad 1) + ReLU -> AvgPool2
/// -> Conv3x3x16(pad 1) + ReLU -> AvgPool2 -> Flatten(1024) -> FC64 + ReLU
/// -> DropoutSite(p) -> FC16 + ReLU. Weights are Glorot-uniform from the
/// seeded stream, biases zero.
EmbeddingModel make_toy16(double dropout_p, std::uint64_t weight_seed);

/// Deterministic forward pass with the dropout site disabled. The returned
/// embedding is elementwise nonnegative for the reference architecture.
Tensor embed(const EmbeddingModel& model, const Image& image);

/// Bernoulli keep-mask for stochastic pass `pass_index`: entries are 1 with
/// probability 1 - p_drop, drawn from the stream derive_stream(seed, pass_index).
Tensor dropout_mask_for_pass(std::uint64_t seed, std::uint64_t pass_index,
                             std::size_t dim, double p_drop);

/// Runs the deterministic pass once up to the dropout site, then completes
/// the remaining layers m times with independent per-pass masks. Returns an
/// {m, D} matrix whose row k used the mask stream derive_stream(seed, k).
/// p_drop = 0 is the degenerate all-keep limit (every row equals embed()).
Tensor stochastic_embed(const EmbeddingModel& model, const Image& image, int m,
                        std::uint64_t seed);
Tensor stochastic_embed(const EmbeddingModel& model, const Image& image, int m,
                        std::uint64_t seed, double p_drop);

} // namespace plq
