#include "plq/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "plq/errors.hpp"
#include "plq/rng.hpp"

namespace plq {

namespace {

Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
                      SplitMix64& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.data) v = rng.next_in(-limit, limit);
    return t;
}

void check_image(const EmbeddingModel& model, const Image& image) {
    const std::vector<std::size_t> expected{model.input_shape[0], model.input_shape[1],
                                            model.input_shape[2]};
    if (image.shape != expected) {
        throw ShapeError("image shape " + shape_to_string(image.shape) +
                         " does not match model input " + shape_to_string(expected));
    }
    if (!image.all_finite()) {
        throw NumericError("image contains non-finite values");
    }
}

} // namespace

std::optional<std::size_t> EmbeddingModel::dropout_index() const {
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (std::holds_alternative<DropoutSite>(layers[i])) {
            if (found) {
                throw ShapeError("model has more than one dropout site",
                                 static_cast<int>(i));
            }
            found = i;
        }
    }
    return found;
}

void EmbeddingModel::validate() const {
    const auto site = dropout_index();
    if (!site) {
        throw ShapeError("model has no dropout site");
    }
    if (*site + 3 != layers.size()) {
        throw ShapeError("dropout site must sit immediately before the final "
                         "FullyConnected layer",
                         static_cast<int>(*site));
    }
    const auto* embed_fc = std::get_if<FullyConnected>(&layers[*site + 1]);
    if (embed_fc == nullptr || embed_fc->out_dim != embedding_dim) {
        throw ShapeError("layer after the dropout site must be FullyConnected to "
                         "embedding_dim " + std::to_string(embedding_dim),
                         static_cast<int>(*site + 1));
    }
    if (!std::holds_alternative<Relu>(layers.back())) {
        throw ShapeError("final layer must be ReLU", static_cast<int>(layers.size() - 1));
    }
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
        throw NumericError("dropout_p must lie in [0, 1)");
    }
    // Shape-check the whole stack once.
    std::vector<std::size_t> shape{input_shape[0], input_shape[1], input_shape[2]};
    for (std::size_t i = 0; i < layers.size(); ++i) {
        shape = infer_output_shape(layers[i], shape, static_cast<int>(i));
    }
    if (shape != std::vector<std::size_t>{static_cast<std::size_t>(embedding_dim)}) {
        throw ShapeError("model output shape " + shape_to_string(shape) +
                         " does not match embedding_dim " + std::to_string(embedding_dim));
    }
}

EmbeddingModel make_toy16(double dropout_p, std::uint64_t weight_seed) {
    EmbeddingModel model;
    model.input_shape = {32, 32, 3};
    model.embedding_dim = 16;
    model.dropout_p = dropout_p;

    auto conv = [&](int in_c, int out_c, int layer_tag) {
        SplitMix64 rng(derive_stream(weight_seed, static_cast<std::uint64_t>(layer_tag)));
        Conv2D c;
        c.ksize = 3;
        c.stride = 1;
        c.padding = 1;
        c.in_channels = in_c;
        c.out_channels = out_c;
        c.kernel = glorot_uniform({3, 3, static_cast<std::size_t>(in_c),
                                   static_cast<std::size_t>(out_c)},
                                  9 * in_c, 9 * out_c, rng);
        c.bias = Tensor::zeros({static_cast<std::size_t>(out_c)});
        return c;
    };
    auto fc = [&](int in_dim, int out_dim, int layer_tag) {
        SplitMix64 rng(derive_stream(weight_seed, static_cast<std::uint64_t>(layer_tag)));
        FullyConnected f;
        f.in_dim = in_dim;
        f.out_dim = out_dim;
        f.weights = glorot_uniform({static_cast<std::size_t>(out_dim),
                                    static_cast<std::size_t>(in_dim)},
                                   in_dim, out_dim, rng);
        f.bias = Tensor::zeros({static_cast<std::size_t>(out_dim)});
        return f;
    };

    model.layers.push_back(conv(3, 8, 0));
    model.layers.push_back(Relu{});
    model.layers.push_back(AvgPool2{});
    model.layers.push_back(conv(8, 16, 1));
    model.layers.push_back(Relu{});
    model.layers.push_back(AvgPool2{});
    model.layers.push_back(Flatten{});
    model.layers.push_back(fc(1024, 64, 2));
    model.layers.push_back(Relu{});
    model.layers.push_back(DropoutSite{dropout_p});
    model.layers.push_back(fc(64, 16, 3));
    model.layers.push_back(Relu{});
    model.validate();
    return model;
}

Tensor embed(const EmbeddingModel& model, const Image& image) {
    check_image(model, image);
    Tensor x = image;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        x = forward(model.layers[i], x, nullptr, static_cast<int>(i));
    }
    return x;
}

Tensor dropout_mask_for_pass(std::uint64_t seed, std::uint64_t pass_index, std::size_t dim,
                             double p_drop) {
    SplitMix64 rng(derive_stream(seed, pass_index));
    Tensor mask = Tensor::zeros({dim});
    for (double& v : mask.data) v = rng.next_double() < p_drop ? 0.0 : 1.0;
    return mask;
}

Tensor stochastic_embed(const EmbeddingModel& model, const Image& image, int m,
                        std::uint64_t seed) {
    return stochastic_embed(model, image, m, seed, model.dropout_p);
}

Tensor stochastic_embed(const EmbeddingModel& model, const Image& image, int m,
                        std::uint64_t seed, double p_drop) {
    if (m < 2) {
        throw std::invalid_argument("stochastic_embed requires m >= 2 passes");
    }
    if (!(p_drop >= 0.0 && p_drop < 1.0)) {
        throw std::invalid_argument("dropout probability must lie in [0, 1)");
    }
    check_image(model, image);
    const auto site = model.dropout_index();
    if (!site) {
        throw std::invalid_argument("stochastic_embed requires a dropout site");
    }

    Tensor x = image;
    for (std::size_t i = 0; i < *site; ++i) {
        x = forward(model.layers[i], x, nullptr, static_cast<int>(i));
    }

    const std::size_t dim = x.numel();
    const std::size_t d = static_cast<std::size_t>(model.embedding_dim);
    DropoutSite site_layer{p_drop};
    Tensor rows = Tensor::zeros({static_cast<std::size_t>(m), d});
    for (int k = 0; k < m; ++k) {
        const Tensor mask =
            dropout_mask_for_pass(seed, static_cast<std::uint64_t>(k), dim, p_drop);
        Tensor y = forward(Layer{site_layer}, x, &mask, static_cast<int>(*site));
        for (std::size_t i = *site + 1; i < model.layers.size(); ++i) {
            y = forward(model.layers[i], y, nullptr, static_cast<int>(i));
        }
        for (std::size_t j = 0; j < d; ++j) {
            rows.at2(static_cast<std::size_t>(k), j) = y.data[j];
        }
    }
    return rows;
}

} // namespace plq
