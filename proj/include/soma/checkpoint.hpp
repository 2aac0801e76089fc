#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "soma/network.hpp"

namespace soma {

struct EvalRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double lr = 0.0;
};

struct NamedBlob {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;  // held in double; on-disk width follows Checkpoint::dtype
};

struct OptimizerBlob {
    double lr = 0.0;
    int plateau_counter = 0;
    double best_val = 0.0;
    std::vector<NamedBlob> momentum;
};

// On-disk format: magic "SOMF", u32 LE version (=1), u64 LE header length,
// UTF-8 JSON header (config, manifest with shapes/dtype/offsets, seed,
// history, optimizer scalars), then concatenated LE IEEE-754 blobs in
// manifest order.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    NetworkConfig config;
    std::string dtype = "f32";  // "f32" | "f64"
    std::uint64_t seed = 0;
    std::vector<NamedBlob> params;
    std::optional<OptimizerBlob> optimizer;
    std::vector<EvalRecord> history;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

template <class T>
Checkpoint snapshot(Network<T>& net, std::uint64_t seed,
                    const std::vector<EvalRecord>& history = {}) {
    Checkpoint ck;
    ck.config = net.cfg;
    ck.dtype = sizeof(T) == 4 ? "f32" : "f64";
    ck.seed = seed;
    ck.history = history;
    for (auto& p : net.params()) {
        NamedBlob blob;
        blob.name = p.name;
        blob.shape = p.shape;
        blob.values.assign(p.value->begin(), p.value->end());
        ck.params.push_back(std::move(blob));
    }
    return ck;
}

// Copies parameters by name into an already-built network. skip_head leaves
// the softmax head untouched (fine-tuning transfer).
template <class T>
void restore(const Checkpoint& ck, Network<T>& net, bool skip_head = false) {
    auto refs = net.params();
    for (auto& p : refs) {
        if (skip_head && p.head) continue;
        const NamedBlob* found = nullptr;
        for (const auto& blob : ck.params)
            if (blob.name == p.name) { found = &blob; break; }
        if (!found) throw std::runtime_error("checkpoint: missing parameter " + p.name);
        if (found->values.size() != p.value->size())
            throw std::runtime_error("checkpoint: size mismatch for " + p.name);
        for (std::size_t i = 0; i < p.value->size(); ++i)
            (*p.value)[i] = static_cast<T>(found->values[i]);
    }
}

template <class T>
Network<T> build_from_checkpoint(const Checkpoint& ck) {
    Network<T> net;
    SeededRng rng(ck.seed);
    net.build(ck.config, rng);
    restore(ck, net);
    return net;
}

}  // namespace soma
