#include "plq/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "plq/errors.hpp"

namespace plq {

QualityHead build_head(const Tensor& embedding, double q_scaled, WeightMode mode) {
    if (embedding.rank() != 1) {
        throw ShapeError("embedding must be rank 1, got " + shape_to_string(embedding.shape));
    }
    double l1 = 0.0;
    for (double v : embedding.data) l1 += std::abs(v);
    if (l1 == 0.0) {
        throw NumericError("embedding has zero L1 norm: the image produced a null "
                           "representation, no quality head can be built");
    }
    QualityHead head;
    head.mode = mode;
    head.source_quality = q_scaled;
    head.weights = Tensor::zeros(embedding.shape);
    const double uniform = q_scaled / l1;
    for (std::size_t i = 0; i < embedding.numel(); ++i) {
        if (mode == WeightMode::PaperLiteral) {
            head.weights.data[i] = uniform;
        } else {
            const double e = embedding.data[i];
            const double sign = e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
            head.weights.data[i] = uniform * sign;
        }
    }
    return head;
}

double evaluate_head(const QualityHead& head, const Tensor& embedding) {
    if (!head.weights.same_shape(embedding)) {
        throw ShapeError("embedding shape " + shape_to_string(embedding.shape) +
                         " does not match head weights " + shape_to_string(head.weights.shape));
    }
    double out = head.bias;
    for (std::size_t i = 0; i < embedding.numel(); ++i) {
        out += head.weights.data[i] * embedding.data[i];
    }
    return out;
}

SaliencyMap saliency(const EmbeddingModel& model, const Image& image, const QualityHead& head,
                     std::optional<double> clip_norm) {
    const std::size_t n = model.layers.size();
    std::vector<Tensor> inputs(n);
    Tensor x = image;
    for (std::size_t i = 0; i < n; ++i) {
        inputs[i] = std::move(x);
        x = forward(model.layers[i], inputs[i], nullptr, static_cast<int>(i));
    }
    if (!head.weights.same_shape(x)) {
        throw ShapeError("head weights " + shape_to_string(head.weights.shape) +
                         " do not match model output " + shape_to_string(x.shape));
    }

    SaliencyMap map;
    map.clip_norm = clip_norm;
    Tensor grad = head.weights;
    for (std::size_t i = n; i-- > 0;) {
        const double norm = grad.l2_norm();
        map.max_backward_norm = std::max(map.max_backward_norm, norm);
        if (clip_norm && norm > *clip_norm) {
            grad.scale(*clip_norm / norm);
        }
        grad = backward_input(model.layers[i], inputs[i], grad, nullptr, static_cast<int>(i));
    }
    map.grads = std::move(grad);
    return map;
}

Tensor merge_channels(const SaliencyMap& map) {
    if (map.grads.rank() != 3) {
        throw ShapeError("saliency gradients must be {H, W, C}, got " +
                         shape_to_string(map.grads.shape));
    }
    const std::size_t h = map.grads.shape[0];
    const std::size_t w = map.grads.shape[1];
    const std::size_t c = map.grads.shape[2];
    Tensor merged = Tensor::zeros({h, w});
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double sum = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) {
                sum += std::abs(map.grads.at3(y, x, ch));
            }
            merged.at2(y, x) = sum / static_cast<double>(c);
        }
    }
    return merged;
}

PlqMap visualize(const Tensor& merged_saliency, double gamma) {
    if (merged_saliency.rank() != 2) {
        throw ShapeError("merged saliency must be {H, W}, got " +
                         shape_to_string(merged_saliency.shape));
    }
    const double scale = std::pow(10.0, gamma);
    PlqMap map;
    map.gamma = gamma;
    map.merged_saliency = merged_saliency;
    map.values = Tensor::zeros(merged_saliency.shape);
    for (std::size_t i = 0; i < merged_saliency.numel(); ++i) {
        const double s = merged_saliency.data[i];
        if (s < 0.0) {
            throw std::invalid_argument("merged saliency must be nonnegative");
        }
        map.values.data[i] = 1.0 - 1.0 / (1.0 + scale * s * s);
    }
    return map;
}

PlqResult plq_map(const EmbeddingModel& model, const Image& image, const FiqConfig& config,
                  double gamma, WeightMode mode, std::optional<double> clip_norm) {
    PlqResult result;
    result.quality = quality(model, image, config);
    const Tensor embedding = embed(model, image);
    const QualityHead head = build_head(embedding, result.quality.q_scaled, mode);
    const SaliencyMap s = saliency(model, image, head, clip_norm);
    result.map = visualize(merge_channels(s), gamma);
    return result;
}

double calibrate_gamma(const std::vector<Tensor>& reference_merged, const Rect& face_box) {
    if (reference_merged.empty()) {
        throw std::invalid_argument("gamma calibration needs at least one reference map");
    }
    std::vector<double> pooled;
    for (const Tensor& merged : reference_merged) {
        if (merged.rank() != 2) {
            throw ShapeError("reference maps must be {H, W}, got " +
                             shape_to_string(merged.shape));
        }
        const int h = static_cast<int>(merged.shape[0]);
        const int w = static_cast<int>(merged.shape[1]);
        if (face_box.top < 0 || face_box.left < 0 || face_box.height <= 0 ||
            face_box.width <= 0 || face_box.top + face_box.height > h ||
            face_box.left + face_box.width > w) {
            throw std::invalid_argument("face box does not fit inside the reference maps");
        }
        for (int y = face_box.top; y < face_box.top + face_box.height; ++y) {
            for (int x = face_box.left; x < face_box.left + face_box.width; ++x) {
                pooled.push_back(merged.at2(static_cast<std::size_t>(y),
                                            static_cast<std::size_t>(x)));
            }
        }
    }
    std::sort(pooled.begin(), pooled.end());
    // Nearest-rank 95th percentile.
    const std::size_t idx = static_cast<std::size_t>(std::max(
        0L, std::lround(std::ceil(0.95 * static_cast<double>(pooled.size()))) - 1));
    const double q95 = pooled[std::min(idx, pooled.size() - 1)];
    if (q95 <= 0.0) {
        throw NumericError("95th percentile of the face-box saliency is zero; "
                           "references carry no gradient signal");
    }
    return std::log10(9.0) - 2.0 * std::log10(q95);
}

} // namespace plq
