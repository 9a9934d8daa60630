#include "plq/train.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>

#include "plq/errors.hpp"
#include "plq/rng.hpp"

namespace plq {

namespace {

constexpr std::uint64_t kInitTag = 0x71;
constexpr std::uint64_t kClassifierTag = 0x72;
constexpr std::uint64_t kShuffleTag = 0x73;
constexpr std::uint64_t kMaskTag = 0x74;

struct ParamGrad {
    Tensor weights;
    Tensor bias;
};

void check_dataset(const std::vector<LabeledImage>& dataset, int* n_classes) {
    std::map<int, int> counts;
    for (const LabeledImage& s : dataset) {
        if (s.label < 0) throw std::invalid_argument("labels must be nonnegative");
        ++counts[s.label];
    }
    if (counts.size() < 2) {
        throw std::invalid_argument("training needs at least 2 identities");
    }
    int max_label = 0;
    for (const auto& [label, count] : counts) {
        if (count < 4) {
            throw std::invalid_argument("identity " + std::to_string(label) +
                                        " has fewer than 4 samples");
        }
        max_label = std::max(max_label, label);
    }
    *n_classes = max_label + 1;
}

std::vector<double> softmax(const Tensor& logits) {
    double mx = logits.data[0];
    for (double v : logits.data) mx = std::max(mx, v);
    std::vector<double> p(logits.numel());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits.data[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

} // namespace

TrainResult train_toy(const std::vector<LabeledImage>& dataset, const TrainConfig& config) {
    int n_classes = 0;
    check_dataset(dataset, &n_classes);
    if (config.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (config.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");

    EmbeddingModel model = make_toy16(config.dropout_p, derive_stream(config.seed, kInitTag));

    // Network under training: the embedding stack plus a classification layer.
    std::vector<Layer> net = model.layers;
    {
        SplitMix64 rng(derive_stream(config.seed, kClassifierTag));
        FullyConnected cls;
        cls.in_dim = model.embedding_dim;
        cls.out_dim = n_classes;
        const std::size_t in = static_cast<std::size_t>(cls.in_dim);
        const std::size_t out = static_cast<std::size_t>(cls.out_dim);
        cls.weights = Tensor::zeros({out, in});
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        for (double& v : cls.weights.data) v = rng.next_in(-limit, limit);
        cls.bias = Tensor::zeros({out});
        net.push_back(cls);
    }
    const std::size_t site = *model.dropout_index();
    const std::size_t n_layers = net.size();
    const std::size_t n_samples = dataset.size();

    std::vector<ParamGrad> velocity(n_layers);
    std::vector<ParamGrad> grad(n_layers);
    for (std::size_t i = 0; i < n_layers; ++i) {
        if (auto* c = std::get_if<Conv2D>(&net[i])) {
            velocity[i] = {Tensor::zeros(c->kernel.shape), Tensor::zeros(c->bias.shape)};
        } else if (auto* fc = std::get_if<FullyConnected>(&net[i])) {
            velocity[i] = {Tensor::zeros(fc->weights.shape), Tensor::zeros(fc->bias.shape)};
        }
    }

    const double p_drop = config.dropout_p;
    std::uint64_t mask_counter = 0;
    const std::uint64_t mask_seed = derive_stream(config.seed, kMaskTag);
    std::size_t mask_dim = 0;
    {
        std::vector<std::size_t> shape{model.input_shape[0], model.input_shape[1],
                                       model.input_shape[2]};
        for (std::size_t i = 0; i < site; ++i) shape = infer_output_shape(net[i], shape);
        mask_dim = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                   std::multiplies<>());
    }

    std::vector<std::size_t> order(n_samples);
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    std::vector<Tensor> inputs(n_layers);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        SplitMix64 shuffle_rng(
            derive_stream(derive_stream(config.seed, kShuffleTag), static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = n_samples - 1; i > 0; --i) {
            const std::size_t j = shuffle_rng.next_below(i + 1);
            std::swap(order[i], order[j]);
        }

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n_samples; start += config.batch_size) {
            const std::size_t end = std::min(n_samples, start + config.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            for (std::size_t i = 0; i < n_layers; ++i) {
                if (!velocity[i].weights.empty()) {
                    grad[i] = {Tensor::zeros(velocity[i].weights.shape),
                               Tensor::zeros(velocity[i].bias.shape)};
                }
            }

            for (std::size_t s = start; s < end; ++s) {
                const LabeledImage& sample = dataset[order[s]];
                const Tensor mask =
                    dropout_mask_for_pass(mask_seed, mask_counter++, mask_dim, p_drop);

                Tensor x = sample.image;
                for (std::size_t i = 0; i < n_layers; ++i) {
                    inputs[i] = std::move(x);
                    const Tensor* m = (i == site) ? &mask : nullptr;
                    x = forward(net[i], inputs[i], m, static_cast<int>(i));
                }

                const std::vector<double> probs = softmax(x);
                epoch_loss -= std::log(std::max(probs[static_cast<std::size_t>(sample.label)],
                                                1e-300));
                Tensor g = Tensor::zeros({static_cast<std::size_t>(n_classes)});
                for (int c = 0; c < n_classes; ++c) {
                    g.data[static_cast<std::size_t>(c)] = probs[static_cast<std::size_t>(c)];
                }
                g.data[static_cast<std::size_t>(sample.label)] -= 1.0;

                for (std::size_t i = n_layers; i-- > 0;) {
                    const Tensor* m = (i == site) ? &mask : nullptr;
                    if (!velocity[i].weights.empty()) {
                        const Tensor dw = backward_weights(net[i], inputs[i], g);
                        const Tensor db = backward_bias(net[i], g);
                        for (std::size_t k = 0; k < dw.numel(); ++k) grad[i].weights.data[k] += dw.data[k];
                        for (std::size_t k = 0; k < db.numel(); ++k) grad[i].bias.data[k] += db.data[k];
                    }
                    if (i == 0) break;
                    g = backward_input(net[i], inputs[i], g, m, static_cast<int>(i));
                }
            }

            for (std::size_t i = 0; i < n_layers; ++i) {
                if (velocity[i].weights.empty()) continue;
                Tensor* w = nullptr;
                Tensor* b = nullptr;
                if (auto* c = std::get_if<Conv2D>(&net[i])) {
                    w = &c->kernel;
                    b = &c->bias;
                } else {
                    auto* fc = std::get_if<FullyConnected>(&net[i]);
                    w = &fc->weights;
                    b = &fc->bias;
                }
                for (std::size_t k = 0; k < w->numel(); ++k) {
                    velocity[i].weights.data[k] = config.momentum * velocity[i].weights.data[k] +
                                                  grad[i].weights.data[k] * inv_batch;
                    w->data[k] -= config.lr * velocity[i].weights.data[k];
                }
                for (std::size_t k = 0; k < b->numel(); ++k) {
                    velocity[i].bias.data[k] = config.momentum * velocity[i].bias.data[k] +
                                               grad[i].bias.data[k] * inv_batch;
                    b->data[k] -= config.lr * velocity[i].bias.data[k];
                }
            }
        }
        result.epoch_losses.push_back(epoch_loss / static_cast<double>(n_samples));
    }

    // Training accuracy with the dropout site disabled.
    std::size_t correct = 0;
    for (const LabeledImage& sample : dataset) {
        Tensor x = sample.image;
        for (std::size_t i = 0; i < n_layers; ++i) {
            x = forward(net[i], x, nullptr, static_cast<int>(i));
        }
        std::size_t best = 0;
        for (std::size_t c = 1; c < x.numel(); ++c) {
            if (x.data[c] > x.data[best]) best = c;
        }
        if (static_cast<int>(best) == sample.label) ++correct;
    }
    result.final_accuracy = static_cast<double>(correct) / static_cast<double>(n_samples);

    net.pop_back(); // strip the classification layer
    model.layers = std::move(net);
    model.validate();
    result.model = std::move(model);
    return result;
}

} // namespace plq
