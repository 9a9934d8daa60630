#include "plq/layers.hpp"

#include <cstddef>

#include "plq/errors.hpp"

namespace plq {

namespace {

std::string at_layer(int idx) {
    return idx < 0 ? std::string() : " at layer " + std::to_string(idx);
}

[[noreturn]] void shape_fail(int idx, const std::string& what,
                             const std::vector<std::size_t>& expected,
                             const std::vector<std::size_t>& actual) {
    throw ShapeError(what + at_layer(idx) + ": expected " + shape_to_string(expected) +
                         ", got " + shape_to_string(actual),
                     idx);
}

void require_rank3(const Tensor& t, const char* who, int idx) {
    if (t.rank() != 3) {
        throw ShapeError(std::string(who) + at_layer(idx) + ": expected rank-3 input, got " +
                             shape_to_string(t.shape),
                         idx);
    }
}

struct ConvDims {
    std::size_t h, w, oh, ow;
};

ConvDims conv_dims(const Conv2D& c, const Tensor& input, int idx) {
    require_rank3(input, "Conv2D", idx);
    if (input.shape[2] != static_cast<std::size_t>(c.in_channels)) {
        shape_fail(idx, "Conv2D input channels",
                   {input.shape[0], input.shape[1], static_cast<std::size_t>(c.in_channels)},
                   input.shape);
    }
    const long h = static_cast<long>(input.shape[0]);
    const long w = static_cast<long>(input.shape[1]);
    const long span_h = h + 2L * c.padding - c.ksize;
    const long span_w = w + 2L * c.padding - c.ksize;
    if (span_h < 0 || span_w < 0 || span_h % c.stride != 0 || span_w % c.stride != 0) {
        throw ShapeError("Conv2D" + at_layer(idx) + ": kernel " + std::to_string(c.ksize) +
                             " stride " + std::to_string(c.stride) + " padding " +
                             std::to_string(c.padding) + " does not tile input " +
                             shape_to_string(input.shape),
                         idx);
    }
    return {static_cast<std::size_t>(h), static_cast<std::size_t>(w),
            static_cast<std::size_t>(span_h / c.stride + 1),
            static_cast<std::size_t>(span_w / c.stride + 1)};
}

Tensor conv_forward(const Conv2D& c, const Tensor& input, int idx) {
    const ConvDims d = conv_dims(c, input, idx);
    const std::size_t C = c.in_channels, OC = c.out_channels, K = c.ksize;
    Tensor out = Tensor::zeros({d.oh, d.ow, OC});
    for (std::size_t oy = 0; oy < d.oh; ++oy) {
        for (std::size_t ox = 0; ox < d.ow; ++ox) {
            double* orow = &out.data[(oy * d.ow + ox) * OC];
            for (std::size_t oc = 0; oc < OC; ++oc) orow[oc] = c.bias.data[oc];
            for (std::size_t ky = 0; ky < K; ++ky) {
                const long iy = static_cast<long>(oy) * c.stride + static_cast<long>(ky) - c.padding;
                if (iy < 0 || iy >= static_cast<long>(d.h)) continue;
                for (std::size_t kx = 0; kx < K; ++kx) {
                    const long ix = static_cast<long>(ox) * c.stride + static_cast<long>(kx) - c.padding;
                    if (ix < 0 || ix >= static_cast<long>(d.w)) continue;
                    const double* ipix = &input.data[(static_cast<std::size_t>(iy) * d.w +
                                                      static_cast<std::size_t>(ix)) * C];
                    const double* kbase = &c.kernel.data[(ky * K + kx) * C * OC];
                    for (std::size_t ic = 0; ic < C; ++ic) {
                        const double v = ipix[ic];
                        const double* kc = kbase + ic * OC;
                        for (std::size_t oc = 0; oc < OC; ++oc) orow[oc] += v * kc[oc];
                    }
                }
            }
        }
    }
    return out;
}

Tensor conv_backward_input(const Conv2D& c, const Tensor& input, const Tensor& upstream, int idx) {
    const ConvDims d = conv_dims(c, input, idx);
    const std::size_t C = c.in_channels, OC = c.out_channels, K = c.ksize;
    if (upstream.shape != std::vector<std::size_t>{d.oh, d.ow, OC}) {
        shape_fail(idx, "Conv2D upstream gradient", {d.oh, d.ow, OC}, upstream.shape);
    }
    Tensor din = Tensor::zeros(input.shape);
    for (std::size_t oy = 0; oy < d.oh; ++oy) {
        for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const double* urow = &upstream.data[(oy * d.ow + ox) * OC];
            for (std::size_t ky = 0; ky < K; ++ky) {
                const long iy = static_cast<long>(oy) * c.stride + static_cast<long>(ky) - c.padding;
                if (iy < 0 || iy >= static_cast<long>(d.h)) continue;
                for (std::size_t kx = 0; kx < K; ++kx) {
                    const long ix = static_cast<long>(ox) * c.stride + static_cast<long>(kx) - c.padding;
                    if (ix < 0 || ix >= static_cast<long>(d.w)) continue;
                    double* dpix = &din.data[(static_cast<std::size_t>(iy) * d.w +
                                              static_cast<std::size_t>(ix)) * C];
                    const double* kbase = &c.kernel.data[(ky * K + kx) * C * OC];
                    for (std::size_t ic = 0; ic < C; ++ic) {
                        const double* kc = kbase + ic * OC;
                        double acc = 0.0;
                        for (std::size_t oc = 0; oc < OC; ++oc) acc += urow[oc] * kc[oc];
                        dpix[ic] += acc;
                    }
                }
            }
        }
    }
    return din;
}

Tensor conv_backward_weights(const Conv2D& c, const Tensor& input, const Tensor& upstream, int idx) {
    const ConvDims d = conv_dims(c, input, idx);
    const std::size_t C = c.in_channels, OC = c.out_channels, K = c.ksize;
    if (upstream.shape != std::vector<std::size_t>{d.oh, d.ow, OC}) {
        shape_fail(idx, "Conv2D upstream gradient", {d.oh, d.ow, OC}, upstream.shape);
    }
    Tensor dk = Tensor::zeros(c.kernel.shape);
    for (std::size_t oy = 0; oy < d.oh; ++oy) {
        for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const double* urow = &upstream.data[(oy * d.ow + ox) * OC];
            for (std::size_t ky = 0; ky < K; ++ky) {
                const long iy = static_cast<long>(oy) * c.stride + static_cast<long>(ky) - c.padding;
                if (iy < 0 || iy >= static_cast<long>(d.h)) continue;
                for (std::size_t kx = 0; kx < K; ++kx) {
                    const long ix = static_cast<long>(ox) * c.stride + static_cast<long>(kx) - c.padding;
                    if (ix < 0 || ix >= static_cast<long>(d.w)) continue;
                    const double* ipix = &input.data[(static_cast<std::size_t>(iy) * d.w +
                                                      static_cast<std::size_t>(ix)) * C];
                    double* dkbase = &dk.data[(ky * K + kx) * C * OC];
                    for (std::size_t ic = 0; ic < C; ++ic) {
                        const double v = ipix[ic];
                        double* kc = dkbase + ic * OC;
                        for (std::size_t oc = 0; oc < OC; ++oc) kc[oc] += v * urow[oc];
                    }
                }
            }
        }
    }
    return dk;
}

void require_fc_input(const FullyConnected& fc, const Tensor& input, int idx) {
    if (input.rank() != 1 || input.shape[0] != static_cast<std::size_t>(fc.in_dim)) {
        shape_fail(idx, "FullyConnected input", {static_cast<std::size_t>(fc.in_dim)}, input.shape);
    }
}

void require_vec(const Tensor& t, std::size_t dim, const char* what, int idx) {
    if (t.rank() != 1 || t.shape[0] != dim) {
        shape_fail(idx, what, {dim}, t.shape);
    }
}

void require_pool_input(const Tensor& input, int idx) {
    require_rank3(input, "AvgPool2", idx);
    if (input.shape[0] % 2 != 0 || input.shape[1] % 2 != 0) {
        throw ShapeError("AvgPool2" + at_layer(idx) + ": input " + shape_to_string(input.shape) +
                             " must have even height and width",
                         idx);
    }
}

} // namespace

const char* layer_kind_name(const Layer& layer) {
    switch (layer.index()) {
        case 0: return "conv2d";
        case 1: return "fully_connected";
        case 2: return "relu";
        case 3: return "avgpool2";
        case 4: return "flatten";
        default: return "dropout_site";
    }
}

bool layer_has_weights(const Layer& layer) {
    return std::holds_alternative<Conv2D>(layer) || std::holds_alternative<FullyConnected>(layer);
}

std::vector<std::size_t> infer_output_shape(const Layer& layer,
                                            const std::vector<std::size_t>& input_shape,
                                            int layer_index) {
    Tensor probe = Tensor::zeros(input_shape);
    if (const auto* c = std::get_if<Conv2D>(&layer)) {
        const ConvDims d = conv_dims(*c, probe, layer_index);
        return {d.oh, d.ow, static_cast<std::size_t>(c->out_channels)};
    }
    if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
        require_fc_input(*fc, probe, layer_index);
        return {static_cast<std::size_t>(fc->out_dim)};
    }
    if (std::holds_alternative<AvgPool2>(layer)) {
        require_pool_input(probe, layer_index);
        return {input_shape[0] / 2, input_shape[1] / 2, input_shape[2]};
    }
    if (std::holds_alternative<Flatten>(layer)) {
        return {probe.numel()};
    }
    return input_shape; // Relu, DropoutSite
}

Tensor forward(const Layer& layer, const Tensor& input, const Tensor* dropout_mask,
               int layer_index) {
    if (dropout_mask != nullptr && !std::holds_alternative<DropoutSite>(layer)) {
        throw std::invalid_argument(std::string("dropout mask supplied to ") +
                                    layer_kind_name(layer) + at_layer(layer_index));
    }
    if (const auto* c = std::get_if<Conv2D>(&layer)) {
        return conv_forward(*c, input, layer_index);
    }
    if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
        require_fc_input(*fc, input, layer_index);
        const std::size_t IN = fc->in_dim, OUT = fc->out_dim;
        Tensor out = Tensor::zeros({OUT});
        for (std::size_t o = 0; o < OUT; ++o) {
            const double* wrow = &fc->weights.data[o * IN];
            double acc = fc->bias.data[o];
            for (std::size_t i = 0; i < IN; ++i) acc += wrow[i] * input.data[i];
            out.data[o] = acc;
        }
        return out;
    }
    if (std::holds_alternative<Relu>(layer)) {
        Tensor out = input;
        for (double& v : out.data) v = v > 0.0 ? v : 0.0;
        return out;
    }
    if (std::holds_alternative<AvgPool2>(layer)) {
        require_pool_input(input, layer_index);
        const std::size_t H = input.shape[0], W = input.shape[1], C = input.shape[2];
        Tensor out = Tensor::zeros({H / 2, W / 2, C});
        for (std::size_t oy = 0; oy < H / 2; ++oy) {
            for (std::size_t ox = 0; ox < W / 2; ++ox) {
                for (std::size_t ch = 0; ch < C; ++ch) {
                    out.at3(oy, ox, ch) = 0.25 * (input.at3(2 * oy, 2 * ox, ch) +
                                                  input.at3(2 * oy, 2 * ox + 1, ch) +
                                                  input.at3(2 * oy + 1, 2 * ox, ch) +
                                                  input.at3(2 * oy + 1, 2 * ox + 1, ch));
                }
            }
        }
        return out;
    }
    if (std::holds_alternative<Flatten>(layer)) {
        Tensor out;
        out.shape = {input.numel()};
        out.data = input.data;
        return out;
    }
    const auto& site = std::get<DropoutSite>(layer);
    if (dropout_mask == nullptr) {
        return input; // deterministic mode
    }
    if (!dropout_mask->same_shape(input)) {
        shape_fail(layer_index, "DropoutSite mask", input.shape, dropout_mask->shape);
    }
    Tensor out = input;
    const double keep_scale = 1.0 / (1.0 - site.p);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] *= dropout_mask->data[i] * keep_scale;
    }
    return out;
}

Tensor backward_input(const Layer& layer, const Tensor& input, const Tensor& upstream,
                      const Tensor* dropout_mask, int layer_index) {
    if (dropout_mask != nullptr && !std::holds_alternative<DropoutSite>(layer)) {
        throw std::invalid_argument(std::string("dropout mask supplied to ") +
                                    layer_kind_name(layer) + at_layer(layer_index));
    }
    if (const auto* c = std::get_if<Conv2D>(&layer)) {
        return conv_backward_input(*c, input, upstream, layer_index);
    }
    if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
        require_fc_input(*fc, input, layer_index);
        require_vec(upstream, fc->out_dim, "FullyConnected upstream gradient", layer_index);
        const std::size_t IN = fc->in_dim, OUT = fc->out_dim;
        Tensor din = Tensor::zeros({IN});
        for (std::size_t o = 0; o < OUT; ++o) {
            const double u = upstream.data[o];
            const double* wrow = &fc->weights.data[o * IN];
            for (std::size_t i = 0; i < IN; ++i) din.data[i] += u * wrow[i];
        }
        return din;
    }
    if (std::holds_alternative<Relu>(layer)) {
        if (!upstream.same_shape(input)) {
            shape_fail(layer_index, "Relu upstream gradient", input.shape, upstream.shape);
        }
        Tensor din = upstream;
        for (std::size_t i = 0; i < din.data.size(); ++i) {
            if (!(input.data[i] > 0.0)) din.data[i] = 0.0;
        }
        return din;
    }
    if (std::holds_alternative<AvgPool2>(layer)) {
        require_pool_input(input, layer_index);
        const std::size_t H = input.shape[0], W = input.shape[1], C = input.shape[2];
        if (upstream.shape != std::vector<std::size_t>{H / 2, W / 2, C}) {
            shape_fail(layer_index, "AvgPool2 upstream gradient", {H / 2, W / 2, C}, upstream.shape);
        }
        Tensor din = Tensor::zeros(input.shape);
        for (std::size_t oy = 0; oy < H / 2; ++oy) {
            for (std::size_t ox = 0; ox < W / 2; ++ox) {
                for (std::size_t ch = 0; ch < C; ++ch) {
                    const double g = 0.25 * upstream.at3(oy, ox, ch);
                    din.at3(2 * oy, 2 * ox, ch) = g;
                    din.at3(2 * oy, 2 * ox + 1, ch) = g;
                    din.at3(2 * oy + 1, 2 * ox, ch) = g;
                    din.at3(2 * oy + 1, 2 * ox + 1, ch) = g;
                }
            }
        }
        return din;
    }
    if (std::holds_alternative<Flatten>(layer)) {
        require_vec(upstream, input.numel(), "Flatten upstream gradient", layer_index);
        Tensor din;
        din.shape = input.shape;
        din.data = upstream.data;
        return din;
    }
    const auto& site = std::get<DropoutSite>(layer);
    if (!upstream.same_shape(input)) {
        shape_fail(layer_index, "DropoutSite upstream gradient", input.shape, upstream.shape);
    }
    if (dropout_mask == nullptr) {
        return upstream; // deterministic pass-through
    }
    if (!dropout_mask->same_shape(input)) {
        shape_fail(layer_index, "DropoutSite mask", input.shape, dropout_mask->shape);
    }
    Tensor din = upstream;
    const double keep_scale = 1.0 / (1.0 - site.p);
    for (std::size_t i = 0; i < din.data.size(); ++i) {
        din.data[i] *= dropout_mask->data[i] * keep_scale;
    }
    return din;
}

Tensor backward_weights(const Layer& layer, const Tensor& input, const Tensor& upstream,
                        const Tensor* dropout_mask, int layer_index) {
    (void)dropout_mask;
    if (const auto* c = std::get_if<Conv2D>(&layer)) {
        return conv_backward_weights(*c, input, upstream, layer_index);
    }
    if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
        require_fc_input(*fc, input, layer_index);
        require_vec(upstream, fc->out_dim, "FullyConnected upstream gradient", layer_index);
        const std::size_t IN = fc->in_dim, OUT = fc->out_dim;
        Tensor dw = Tensor::zeros({OUT, IN});
        for (std::size_t o = 0; o < OUT; ++o) {
            const double u = upstream.data[o];
            double* row = &dw.data[o * IN];
            for (std::size_t i = 0; i < IN; ++i) row[i] = u * input.data[i];
        }
        return dw;
    }
    return Tensor{};
}

Tensor backward_bias(const Layer& layer, const Tensor& upstream) {
    if (const auto* c = std::get_if<Conv2D>(&layer)) {
        const std::size_t OC = c->out_channels;
        Tensor db = Tensor::zeros({OC});
        const std::size_t pixels = upstream.numel() / OC;
        for (std::size_t p = 0; p < pixels; ++p) {
            const double* urow = &upstream.data[p * OC];
            for (std::size_t oc = 0; oc < OC; ++oc) db.data[oc] += urow[oc];
        }
        return db;
    }
    if (std::holds_alternative<FullyConnected>(layer)) {
        return upstream;
    }
    return Tensor{};
}

} // namespace plq
