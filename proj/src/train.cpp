#include "wegpipe/train.hpp"

#include <cmath>

#include "wegpipe/kernels.hpp"
#include "wegpipe/parallel.hpp"
#include "wegpipe/rng.hpp"

namespace wegpipe {

void TrainConfig::validate() const {
    if (epochs <= 0 || batch_size <= 0 || learning_rate < 0.0 || weight_decay < 0.0) {
        throw ConfigError("train config fields must be positive (weight decay and lr may be zero)");
    }
}

NodeId bce_multilabel_loss(Graph& g, NodeId logits, const Tensor& targets) {
    return g.bce_multilabel(logits, targets);
}

void adamw_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamWState& state,
                const AdamWHyper& hyper) {
    if (params.size() != grads.size()) throw UsageError("adamw_step parameter/gradient count mismatch");
    if (state.m.empty()) {
        for (const Tensor& p : params) {
            state.m.push_back(Tensor::zeros(p.shape()));
            state.v.push_back(Tensor::zeros(p.shape()));
        }
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i].same_shape(grads[i])) {
            throw ShapeError("gradient shape " + grads[i].shape_str() + " does not match parameter " +
                             params[i].shape_str());
        }
        double* p = params[i].mutable_data();
        double* m = state.m[i].mutable_data();
        double* v = state.v[i].mutable_data();
        const double* g = grads[i].data();
        const int64_t n = params[i].size();
        for (int64_t j = 0; j < n; ++j) {
            m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g[j];
            v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= hyper.lr * (mhat / (std::sqrt(vhat) + hyper.eps) + hyper.weight_decay * p[j]);
        }
    }
}

namespace {

struct SampleResult {
    double loss = 0.0;
    Tensor logits;
    std::vector<Tensor> grads;
};

SampleResult run_sample(const ViTModel& model, const Sample& sample) {
    AttentionTrace tr = vit_build_graph(model, sample.image, false);
    Graph& g = *tr.graph;
    Tensor targets({1, static_cast<int64_t>(sample.labels.size())});
    double* tv = targets.mutable_data();
    for (size_t k = 0; k < sample.labels.size(); ++k) tv[k] = sample.labels[k] ? 1.0 : 0.0;
    const NodeId loss = bce_multilabel_loss(g, tr.logits_id, targets);
    g.backward(loss);

    SampleResult r;
    r.loss = g.value(loss).item();
    r.logits = g.value(tr.logits_id);
    r.grads.reserve(tr.param_ids.size());
    for (NodeId pid : tr.param_ids) {
        const Tensor& pg = g.grad(pid);
        r.grads.push_back(pg.empty() ? Tensor::zeros(g.value(pid).shape()) : pg);
    }
    return r;
}

} // namespace

std::vector<EpochStats> train(ViTModel& model, const std::vector<Sample>& dataset, const TrainConfig& config,
                              int64_t threads) {
    config.validate();
    if (dataset.empty()) throw UsageError("train requires a non-empty dataset");
    const int64_t n = static_cast<int64_t>(dataset.size());
    const int64_t c = model.config.num_classes;
    for (const Sample& s : dataset) {
        if (static_cast<int64_t>(s.labels.size()) != c) {
            throw ShapeError("sample label vector length does not match num_classes");
        }
    }

    Rng shuffle_rng(config.seed);
    AdamWState opt_state;
    AdamWHyper hyper;
    hyper.lr = config.learning_rate;
    hyper.weight_decay = config.weight_decay;

    std::vector<EpochStats> history;
    std::vector<int64_t> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (int64_t i = n - 1; i > 0; --i) {
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(shuffle_rng.uniform_int(i + 1))]);
        }

        double loss_sum = 0.0;
        std::vector<int64_t> class_correct(static_cast<size_t>(c), 0);

        for (int64_t start = 0; start < n; start += config.batch_size) {
            const int64_t bsz = std::min(config.batch_size, n - start);
            std::vector<SampleResult> results(static_cast<size_t>(bsz));
            parallel_for(
                bsz,
                [&](int64_t j) {
                    results[static_cast<size_t>(j)] = run_sample(model, dataset[static_cast<size_t>(
                                                                      order[static_cast<size_t>(start + j)])]);
                },
                threads);

            // reduce in sample order so results do not depend on thread count
            std::vector<Tensor> batch_grads;
            batch_grads.reserve(model.params.size());
            for (const Tensor& p : model.params) batch_grads.push_back(Tensor::zeros(p.shape()));
            const double inv_b = 1.0 / static_cast<double>(bsz);
            for (int64_t j = 0; j < bsz; ++j) {
                const SampleResult& r = results[static_cast<size_t>(j)];
                loss_sum += r.loss;
                const Sample& s = dataset[static_cast<size_t>(order[static_cast<size_t>(start + j)])];
                const double* lg = r.logits.data();
                for (int64_t k = 0; k < c; ++k) {
                    const bool pred = lg[k] > 0.0; // sigmoid(x) > 0.5
                    if (pred == (s.labels[static_cast<size_t>(k)] != 0)) {
                        ++class_correct[static_cast<size_t>(k)];
                    }
                }
                for (size_t pi = 0; pi < batch_grads.size(); ++pi) {
                    kernels::active().axpy(static_cast<size_t>(batch_grads[pi].size()), inv_b,
                                           r.grads[pi].data(), batch_grads[pi].mutable_data());
                }
            }
            adamw_step(model.params, batch_grads, opt_state, hyper);
        }

        EpochStats st;
        st.epoch = epoch + 1;
        st.loss = loss_sum / static_cast<double>(n);
        double acc = 0.0;
        for (int64_t k = 0; k < c; ++k) {
            acc += static_cast<double>(class_correct[static_cast<size_t>(k)]) / static_cast<double>(n);
        }
        st.macro_accuracy = acc / static_cast<double>(c);
        if (!std::isfinite(st.loss)) {
            throw TrainError("loss diverged (non-finite) at epoch " + std::to_string(st.epoch));
        }
        history.push_back(st);
    }
    return history;
}

} // namespace wegpipe
