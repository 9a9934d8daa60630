#pragma once

#include <string>
#include <variant>
#include <vector>

#include "plq/tensor.hpp"

namespace plq {

// Fixed layer menu with hand-written backward passes. Inputs and outputs of
// the spatial layers use {H, W, C} layout; kernels use {kh, kw, in_c, out_c}.

struct Conv2D {
    int ksize = 3;
    int stride = 1;
    int padding = 0;
    int in_channels = 0;
    int out_channels = 0;
    Tensor kernel; // {ksize, ksize, in_channels, out_channels}
    Tensor bias;   // {out_channels}
};

struct FullyConnected {
    int in_dim = 0;
    int out_dim = 0;
    Tensor weights; // {out_dim, in_dim}
    Tensor bias;    // {out_dim}
};

struct Relu {};

struct AvgPool2 {}; // 2x2 window, stride 2, non-overlapping

struct Flatten {};

/// Marks where stochastic forward passes begin. With a binary mask m the
/// output is input * m / (1 - p) (inverted dropout); without a mask the
/// layer is the identity (deterministic mode).
struct DropoutSite {
    double p = 0.5;
};

using Layer = std::variant<Conv2D, FullyConnected, Relu, AvgPool2, Flatten, DropoutSite>;

const char* layer_kind_name(const Layer& layer);

/// Output shape for the given input shape; validates dimension arithmetic.
std::vector<std::size_t> infer_output_shape(const Layer& layer,
                                            const std::vector<std::size_t>& input_shape,
                                            int layer_index = -1);

/// Standard layer semantics. `dropout_mask` must be supplied only for
/// DropoutSite layers and may be omitted there (deterministic mode).
/// `layer_index` is used in error messages only.
Tensor forward(const Layer& layer, const Tensor& input,
               const Tensor* dropout_mask = nullptr, int layer_index = -1);

/// Transpose-Jacobian product: gradient of a scalar loss w.r.t. the layer
/// input given the gradient w.r.t. the layer output. ReLU uses subgradient
/// 0 at exactly 0; DropoutSite without a mask passes gradients through.
Tensor backward_input(const Layer& layer, const Tensor& input, const Tensor& upstream,
                      const Tensor* dropout_mask = nullptr, int layer_index = -1);

/// Gradient w.r.t. the layer's weight tensor (kernel or matrix). Returns an
/// empty tensor for layers without weights.
Tensor backward_weights(const Layer& layer, const Tensor& input, const Tensor& upstream,
                        const Tensor* dropout_mask = nullptr, int layer_index = -1);

/// Gradient w.r.t. the layer's bias. Empty for layers without one.
Tensor backward_bias(const Layer& layer, const Tensor& upstream);

bool layer_has_weights(const Layer& layer);

} // namespace plq
