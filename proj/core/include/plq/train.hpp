#pragma once

#include <cstdint>
#include <vector>

#include "plq/model.hpp"
#include "plq/synthetic.hpp"

namespace plq {

struct TrainConfig {
    int epochs = 60;
    double lr = 0.005;
    std::uint64_t seed = 0;
    int batch_size = 8;
    double momentum = 0.9;
    double dropout_p = 0.5;
};

struct TrainResult {
    EmbeddingModel model;
    double final_accuracy = 0.0; // training accuracy, dropout disabled
    std::vector<double> epoch_losses;
};

/// Trains the reference architecture plus an auxiliary classification layer
/// with softmax cross-entropy and minibatch SGD with momentum, dropout
/// active at the dropout site, then strips the classifier. Deterministic
/// given (dataset, config): identical runs produce bit-identical weights.
/// Requires at least 2 identities with at least 4 samples each.
TrainResult train_toy(const std::vector<LabeledImage>& dataset, const TrainConfig& config);

} // namespace plq
