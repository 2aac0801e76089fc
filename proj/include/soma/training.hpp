#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "soma/checkpoint.hpp"
#include "soma/image.hpp"
#include "soma/network.hpp"
#include "soma/rng.hpp"

namespace soma {

struct TrainConfig {
    double initial_lr = 0.1;
    int batch_size = 32;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int plateau_patience = 5;
    double plateau_epsilon = 1e-3;
    double lr_factor = 10.0;
    int max_epochs = 60;
    int eval_every = 0;  // evaluations per epoch boundary; 0 = every epoch
    double body_lr_ratio = 1.0;  // <1 during fine-tuning
    double min_lr = 1e-6;
    std::uint64_t seed = 0;

    void validate() const {
        if (initial_lr <= 0) throw std::invalid_argument("train: initial_lr must be > 0");
        if (lr_factor <= 1) throw std::invalid_argument("train: lr_factor must be > 1");
        if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    }
};

template <class T>
struct OptimizerState {
    std::vector<std::vector<T>> momentum;  // mirrors params() order
    double lr = 0.0;
    int plateau_counter = 0;
    double best_val = 0.0;
    bool has_best = false;

    template <class Net>
    void init(Net& net, const TrainConfig& cfg) {
        momentum.clear();
        for (auto& p : net.params())
            momentum.push_back(p.grad ? std::vector<T>(p.value->size(), T(0)) : std::vector<T>());
        lr = cfg.initial_lr;
        plateau_counter = 0;
        has_best = false;
    }
};

// v <- momentum*v - lr*(g + wd*w); w <- w + v. Weight decay skips biases and
// batch-norm gamma/beta. Body layers use lr * body_lr_ratio.
template <class T>
void sgd_momentum_step(std::vector<ParamRef<T>>& params, OptimizerState<T>& state,
                       const TrainConfig& cfg) {
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        if (!p.grad) continue;  // running stats
        const T lr = static_cast<T>(state.lr * (p.head ? 1.0 : cfg.body_lr_ratio));
        const T mom = static_cast<T>(cfg.momentum);
        const T wd = p.decay ? static_cast<T>(cfg.weight_decay) : T(0);
        auto& vbuf = state.momentum[pi];
        for (std::size_t i = 0; i < p.value->size(); ++i) {
            const T g = (*p.grad)[i] + wd * (*p.value)[i];
            vbuf[i] = mom * vbuf[i] - lr * g;
            (*p.value)[i] += vbuf[i];
        }
    }
}

// Drops lr by lr_factor after plateau_patience consecutive evaluations
// without improvement of more than plateau_epsilon over the best seen.
template <class T>
void plateau_scheduler(double val_objective, OptimizerState<T>& state, const TrainConfig& cfg) {
    if (!state.has_best || val_objective < state.best_val - cfg.plateau_epsilon) {
        state.best_val = val_objective;
        state.has_best = true;
        state.plateau_counter = 0;
        return;
    }
    if (++state.plateau_counter >= cfg.plateau_patience) {
        state.lr /= cfg.lr_factor;
        state.plateau_counter = 0;
    }
}

struct LabeledSet {
    std::vector<Image> images;
    std::vector<int> labels;

    std::size_t size() const { return images.size(); }
};

template <class T>
Tensor<T> one_hot(const std::vector<int>& labels, int num_classes) {
    Tensor<T> t({static_cast<int>(labels.size()), num_classes});
    for (std::size_t i = 0; i < labels.size(); ++i) t.at2(static_cast<int>(i), labels[i]) = T(1);
    return t;
}

template <class T>
struct EvalStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

template <class T>
EvalStats<T> evaluate_classifier(Network<T>& net, const LabeledSet& set, int batch_size = 32) {
    EvalStats<T> stats;
    std::size_t correct = 0;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < set.size(); start += batch_size) {
        const std::size_t end = std::min(set.size(), start + batch_size);
        std::vector<const Image*> ptrs;
        std::vector<int> labels;
        for (std::size_t i = start; i < end; ++i) {
            ptrs.push_back(&set.images[i]);
            labels.push_back(set.labels[i]);
        }
        auto batch = images_to_batch<T>(ptrs);
        auto out = net.forward(batch, false);
        auto r = ops::softmax_cross_entropy(out.logits, one_hot<T>(labels, net.cfg.num_classes));
        loss_sum += static_cast<double>(r.loss) * static_cast<double>(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            int best = 0;
            for (int k = 1; k < net.cfg.num_classes; ++k)
                if (out.logits.at2(static_cast<int>(i), k) >
                    out.logits.at2(static_cast<int>(i), best))
                    best = k;
            if (best == labels[i]) ++correct;
        }
    }
    stats.loss = loss_sum / static_cast<double>(set.size());
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
    return stats;
}

template <class T>
using EvalCallback = std::function<void(const EvalRecord&, Network<T>&)>;

// Mini-batch SGD with seeded shuffling and per-eval plateau scheduling.
// Stops at max_epochs or when lr underflows min_lr.
template <class T>
std::vector<EvalRecord> train(Network<T>& net, const LabeledSet& train_set,
                              const LabeledSet& val_set, const TrainConfig& cfg,
                              OptimizerState<T>* state_out = nullptr,
                              const EvalCallback<T>& on_eval = {}) {
    cfg.validate();
    if (train_set.size() == 0 || val_set.size() == 0)
        throw std::invalid_argument("train: empty dataset");
    for (int l : train_set.labels)
        if (l < 0 || l >= net.cfg.num_classes)
            throw std::invalid_argument("train: label out of range: " + std::to_string(l));
    for (int l : val_set.labels)
        if (l < 0 || l >= net.cfg.num_classes)
            throw std::invalid_argument("train: label out of range: " + std::to_string(l));

    SeededRng rng(cfg.seed);
    OptimizerState<T> state;
    state.init(net, cfg);
    auto params = net.params();
    std::vector<EvalRecord> history;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.max_epochs && state.lr >= cfg.min_lr; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<const Image*> ptrs;
            std::vector<int> labels;
            for (std::size_t i = start; i < end; ++i) {
                ptrs.push_back(&train_set.images[order[i]]);
                labels.push_back(train_set.labels[order[i]]);
            }
            auto batch = images_to_batch<T>(ptrs);
            auto out = net.forward(batch, true);
            auto r = ops::softmax_cross_entropy(out.logits, one_hot<T>(labels, net.cfg.num_classes));
            epoch_loss += static_cast<double>(r.loss) * static_cast<double>(labels.size());
            seen += labels.size();
            net.zero_grads();
            net.backward(r.grad_logits);
            sgd_momentum_step(params, state, cfg);
        }
        auto val = evaluate_classifier(net, val_set, cfg.batch_size);
        EvalRecord rec{epoch, epoch_loss / static_cast<double>(seen), val.loss, val.accuracy,
                       state.lr};
        history.push_back(rec);
        if (on_eval) on_eval(rec, net);
        plateau_scheduler(val.loss, state, cfg);
    }
    if (state_out) *state_out = std::move(state);
    return history;
}

// Fine-tuning transfer: body copied from the checkpoint, softmax head
// replaced for num_new_classes, body lr scaled down (0.1 by default).
template <class T>
Checkpoint finetune(const Checkpoint& pretrained, const LabeledSet& train_set,
                    const LabeledSet& val_set, int num_new_classes, TrainConfig cfg,
                    const EvalCallback<T>& on_eval = {}) {
    Network<T> net;
    SeededRng rng(cfg.seed);
    NetworkConfig config = pretrained.config;
    config.num_classes = num_new_classes;
    net.build(config, rng);
    restore(pretrained, net, /*skip_head=*/true);
    auto history = train(net, train_set, val_set, cfg, static_cast<OptimizerState<T>*>(nullptr),
                         on_eval);
    return snapshot(net, cfg.seed, history);
}

}  // namespace soma
