#pragma once

#include <vector>

#include "wegpipe/synth.hpp"
#include "wegpipe/vit.hpp"

namespace wegpipe {

struct TrainConfig {
    int64_t epochs = 10;
    int64_t batch_size = 16;
    double learning_rate = 5e-4;
    double weight_decay = 1e-4;
    uint64_t seed = 1;

    void validate() const;
};

struct EpochStats {
    int64_t epoch = 0; // 1-based
    double loss = 0.0;
    double macro_accuracy = 0.0;
};

// AdamW with bias-corrected moments and decoupled weight decay.
struct AdamWHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct AdamWState {
    int64_t step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

void adamw_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamWState& state,
                const AdamWHyper& hyper);

// Graph-level multi-label loss: mean over classes of stable sigmoid
// cross-entropy between logits and a {0,1} target vector.
NodeId bce_multilabel_loss(Graph& g, NodeId logits, const Tensor& targets);

// Trains in place; bit-reproducible for a fixed (dataset, config) regardless
// of thread count. Per-sample gradients are computed in parallel but reduced
// in sample order. Throws TrainError naming the epoch if the loss leaves the
// reals. Reported accuracy is the running macro accuracy of the epoch at
// sigmoid threshold 0.5.
std::vector<EpochStats> train(ViTModel& model, const std::vector<Sample>& dataset, const TrainConfig& config,
                              int64_t threads = 0);

} // namespace wegpipe
