#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "soma/ops.hpp"
#include "soma/rng.hpp"
#include "soma/tensor.hpp"

namespace soma {

struct ConvSpec {
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;
    int padding = 1;
};

struct PoolSpec {
    int window = 2;
    int stride = 2;
    int padding = 0;
};

struct StemOp {
    enum class Kind { kConv, kPool } kind = Kind::kConv;
    ConvSpec conv;
    PoolSpec pool;
    static StemOp make_conv(int out, int k, int s, int p) {
        StemOp op;
        op.kind = Kind::kConv;
        op.conv = {out, k, s, p};
        return op;
    }
    static StemOp make_pool(int w, int s) {
        StemOp op;
        op.kind = Kind::kPool;
        op.pool = {w, s, 0};
        return op;
    }
};

// Branch widths of one inception module. stride 2 selects the reduced form:
// the standalone 1x1 branch is dropped and the pool branch passes its
// channels through without projection.
struct InceptionSpec {
    int out_1x1 = 0;
    int reduce_3x3 = 0;
    int out_3x3 = 0;
    int reduce_d3x3 = 0;
    int out_d3x3 = 0;
    int pool_proj = 0;
    int stride = 1;
    bool include_1x1_output = true;

    void validate() const {
        if (stride != 1 && stride != 2)
            throw std::invalid_argument("inception: stride must be 1 or 2");
        if (stride == 2 && include_1x1_output)
            throw std::invalid_argument("inception: reduced module cannot keep the 1x1 output branch");
        if (out_3x3 < 1 || reduce_3x3 < 1 || out_d3x3 < 1 || reduce_d3x3 < 1)
            throw std::invalid_argument("inception: 3x3 branch channels must be >= 1");
        if (stride == 1 && include_1x1_output && out_1x1 < 1)
            throw std::invalid_argument("inception: 1x1 branch channels must be >= 1");
        if (stride == 1 && pool_proj < 1)
            throw std::invalid_argument("inception: pool projection channels must be >= 1");
    }

    int out_channels(int in_channels) const {
        int c = out_3x3 + out_d3x3;
        if (stride == 1) {
            if (include_1x1_output) c += out_1x1;
            c += pool_proj;
        } else {
            c += in_channels;  // pass-through pool branch
        }
        return c;
    }
};

struct NetworkConfig {
    int in_channels = 3;
    int in_h = 128;
    int in_w = 64;
    std::vector<StemOp> stem;
    std::vector<InceptionSpec> modules;
    PoolSpec tail_pool{2, 2, 0};
    ConvSpec tail_conv{128, 3, 1, 1};
    int embed_dim = 256;
    int num_classes = 2;

    void validate() const {
        if (embed_dim < 2) throw std::invalid_argument("config: embed_dim must be >= 2");
        if (num_classes < 2) throw std::invalid_argument("config: num_classes must be >= 2");
        for (const auto& m : modules) m.validate();
    }

    // Default mini profile: stem [conv3x3/2 -> 16, conv3x3 -> 24, pool/2],
    // modules 64, 64, 96 (reduced), 96, tail conv -> 128, FC -> 256.
    static NetworkConfig mini(int num_classes, int in_h = 128, int in_w = 64) {
        NetworkConfig c;
        c.in_h = in_h;
        c.in_w = in_w;
        c.stem = {StemOp::make_conv(16, 3, 2, 1), StemOp::make_conv(24, 3, 1, 1),
                  StemOp::make_pool(2, 2)};
        InceptionSpec inc1{16, 12, 24, 8, 16, 8, 1, true};
        InceptionSpec inc2{16, 12, 24, 8, 16, 8, 1, true};
        InceptionSpec red{0, 16, 16, 8, 16, 0, 2, false};
        InceptionSpec inc3{24, 16, 32, 12, 24, 16, 1, true};
        c.modules = {inc1, inc2, red, inc3};
        c.tail_pool = {2, 2, 0};
        c.tail_conv = {128, 3, 1, 1};
        c.embed_dim = 256;
        c.num_classes = num_classes;
        return c;
    }

    // Small profile for quick experiments on 1 CPU core.
    static NetworkConfig small(int num_classes, int in_h = 64, int in_w = 32) {
        NetworkConfig c;
        c.in_h = in_h;
        c.in_w = in_w;
        c.stem = {StemOp::make_conv(12, 3, 2, 1), StemOp::make_conv(16, 3, 1, 1),
                  StemOp::make_pool(2, 2)};
        InceptionSpec inc1{8, 8, 12, 6, 8, 6, 1, true};
        InceptionSpec red{0, 8, 12, 6, 8, 0, 2, false};
        InceptionSpec inc2{12, 8, 16, 6, 12, 8, 1, true};
        c.modules = {inc1, red, inc2};
        c.tail_pool = {2, 2, 0};
        c.tail_conv = {48, 3, 1, 1};
        c.embed_dim = 64;
        c.num_classes = num_classes;
        return c;
    }

    // Tiny profile for 64-bit gradient checks (16x8 input).
    static NetworkConfig tiny(int num_classes = 4) {
        NetworkConfig c;
        c.in_h = 16;
        c.in_w = 8;
        c.stem = {StemOp::make_conv(4, 3, 2, 1), StemOp::make_pool(2, 2)};
        InceptionSpec inc{3, 2, 3, 2, 3, 2, 1, true};
        InceptionSpec red{0, 2, 3, 2, 3, 0, 2, false};
        c.modules = {inc, red};
        c.tail_pool = {1, 1, 0};  // 2x1 map at this point; pooling would collapse it
        c.tail_conv = {6, 3, 1, 1};
        c.embed_dim = 8;
        c.num_classes = num_classes;
        return c;
    }
};

template <class T>
struct ParamRef {
    std::string name;
    std::vector<T>* value = nullptr;
    std::vector<T>* grad = nullptr;  // null for running stats
    std::vector<int> shape;
    bool decay = false;  // weight decay applies
    bool head = false;   // belongs to the softmax head
};

// Conv -> batch norm -> activation. BN momentum/epsilon per module defaults.
template <class T>
struct ConvBnAct {
    Tensor<T> w;
    std::vector<T> b;
    std::vector<T> gamma, beta, rmean, rvar;
    int stride = 1, pad = 0;
    bool use_relu = true;
    T bn_momentum = T(0.9);
    T bn_eps = T(1e-5);

    Tensor<T> gw;
    std::vector<T> gb, ggamma, gbeta;

    Tensor<T> in_cache, bn_out_cache;
    ops::BnCache<T> bn_cache;

    void init(int in_ch, const ConvSpec& spec, SeededRng& rng) {
        stride = spec.stride;
        pad = spec.padding;
        w = Tensor<T>({spec.out_channels, in_ch, spec.kernel, spec.kernel});
        const double fan_in = static_cast<double>(in_ch) * spec.kernel * spec.kernel;
        const double fan_out = static_cast<double>(spec.out_channels) * spec.kernel * spec.kernel;
        const double std_dev = std::sqrt(2.0 / (fan_in + fan_out));
        for (auto& x : w.v) x = static_cast<T>(rng.normal(0.0, std_dev));
        b.assign(static_cast<std::size_t>(spec.out_channels), T(0));
        gamma.assign(b.size(), T(1));
        beta.assign(b.size(), T(0));
        rmean.assign(b.size(), T(0));
        rvar.assign(b.size(), T(1));
        gw = Tensor<T>(w.shape);
        gb.assign(b.size(), T(0));
        ggamma.assign(b.size(), T(0));
        gbeta.assign(b.size(), T(0));
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        in_cache = x;
        Tensor<T> y = ops::conv2d_forward(x, w, b, stride, pad);
        y = ops::batchnorm_forward(y, gamma, beta, rmean, rvar,
                                   train ? ops::BnMode::kTrain : ops::BnMode::kInference,
                                   bn_momentum, bn_eps, train ? &bn_cache : nullptr);
        if (!use_relu) return y;
        bn_out_cache = y;
        return ops::relu(y);
    }

    Tensor<T> backward(const Tensor<T>& grad) {
        Tensor<T> g = use_relu ? ops::relu_backward(grad, bn_out_cache) : grad;
        auto bng = ops::batchnorm_backward(g, gamma, bn_cache);
        for (std::size_t i = 0; i < ggamma.size(); ++i) {
            ggamma[i] += bng.grad_gamma[i];
            gbeta[i] += bng.grad_beta[i];
        }
        auto cg = ops::conv2d_backward(bng.grad_input, in_cache, w, stride, pad);
        for (std::size_t i = 0; i < gw.numel(); ++i) gw.v[i] += cg.grad_weights.v[i];
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += cg.grad_bias[i];
        return std::move(cg.grad_input);
    }

    void zero_grads() {
        gw.fill(T(0));
        std::fill(gb.begin(), gb.end(), T(0));
        std::fill(ggamma.begin(), ggamma.end(), T(0));
        std::fill(gbeta.begin(), gbeta.end(), T(0));
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".w", &w.v, &gw.v, w.shape, true, false});
        out.push_back({prefix + ".b", &b, &gb, {static_cast<int>(b.size())}, false, false});
        out.push_back({prefix + ".gamma", &gamma, &ggamma, {static_cast<int>(gamma.size())}, false, false});
        out.push_back({prefix + ".beta", &beta, &gbeta, {static_cast<int>(beta.size())}, false, false});
        out.push_back({prefix + ".rmean", &rmean, nullptr, {static_cast<int>(rmean.size())}, false, false});
        out.push_back({prefix + ".rvar", &rvar, nullptr, {static_cast<int>(rvar.size())}, false, false});
    }

    int out_channels() const { return static_cast<int>(b.size()); }
};

template <class T>
struct PoolLayer {
    PoolSpec spec;
    std::vector<std::size_t> argmax;
    std::vector<int> in_shape;

    Tensor<T> forward(const Tensor<T>& x) {
        in_shape = x.shape;
        auto r = ops::maxpool_forward(x, spec.window, spec.stride, spec.padding);
        argmax = std::move(r.argmax);
        return std::move(r.output);
    }
    Tensor<T> backward(const Tensor<T>& grad) {
        return ops::maxpool_backward(grad, argmax, in_shape);
    }
};

template <class T>
struct FcLayer {
    Tensor<T> w;
    std::vector<T> b;
    Tensor<T> gw;
    std::vector<T> gb;
    Tensor<T> in_cache;

    void init(int in_dim, int out_dim, SeededRng& rng) {
        w = Tensor<T>({out_dim, in_dim});
        const double std_dev = std::sqrt(2.0 / (static_cast<double>(in_dim) + out_dim));
        for (auto& x : w.v) x = static_cast<T>(rng.normal(0.0, std_dev));
        b.assign(static_cast<std::size_t>(out_dim), T(0));
        gw = Tensor<T>(w.shape);
        gb.assign(b.size(), T(0));
    }

    Tensor<T> forward(const Tensor<T>& x) {
        in_cache = x;
        return ops::fully_connected(x, w, b);
    }
    Tensor<T> backward(const Tensor<T>& grad) {
        auto g = ops::fully_connected_backward(grad, in_cache, w);
        for (std::size_t i = 0; i < gw.numel(); ++i) gw.v[i] += g.grad_weights.v[i];
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g.grad_bias[i];
        return std::move(g.grad_input);
    }
    void zero_grads() {
        gw.fill(T(0));
        std::fill(gb.begin(), gb.end(), T(0));
    }
    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out, bool head) {
        out.push_back({prefix + ".w", &w.v, &gw.v, w.shape, true, head});
        out.push_back({prefix + ".b", &b, &gb, {static_cast<int>(b.size())}, false, head});
    }
};

// Multi-branch block: [1x1], [1x1 -> 3x3], [1x1 -> 3x3 -> 3x3], [pool -> proj].
// The reduced (stride-2) form drops the 1x1 branch and passes pooled channels
// through unprojected.
template <class T>
struct InceptionBlock {
    InceptionSpec spec;
    int in_channels = 0;
    ConvBnAct<T> b1;
    ConvBnAct<T> b2_reduce, b2_conv;
    ConvBnAct<T> b3_reduce, b3_conv1, b3_conv2;
    PoolLayer<T> b4_pool;
    ConvBnAct<T> b4_proj;
    std::vector<int> branch_channels;

    void init(int in_ch, const InceptionSpec& s, SeededRng& rng) {
        spec = s;
        spec.validate();
        in_channels = in_ch;
        branch_channels.clear();
        const bool reduced = spec.stride == 2;
        if (!reduced && spec.include_1x1_output) {
            b1.init(in_ch, {spec.out_1x1, 1, 1, 0}, rng);
            branch_channels.push_back(spec.out_1x1);
        }
        b2_reduce.init(in_ch, {spec.reduce_3x3, 1, 1, 0}, rng);
        b2_conv.init(spec.reduce_3x3, {spec.out_3x3, 3, spec.stride, 1}, rng);
        branch_channels.push_back(spec.out_3x3);
        b3_reduce.init(in_ch, {spec.reduce_d3x3, 1, 1, 0}, rng);
        b3_conv1.init(spec.reduce_d3x3, {spec.out_d3x3, 3, 1, 1}, rng);
        b3_conv2.init(spec.out_d3x3, {spec.out_d3x3, 3, spec.stride, 1}, rng);
        branch_channels.push_back(spec.out_d3x3);
        b4_pool.spec = {3, spec.stride, 1};
        if (!reduced) {
            b4_proj.init(in_ch, {spec.pool_proj, 1, 1, 0}, rng);
            branch_channels.push_back(spec.pool_proj);
        } else {
            branch_channels.push_back(in_ch);
        }
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        std::vector<Tensor<T>> outs;
        const bool reduced = spec.stride == 2;
        if (!reduced && spec.include_1x1_output) outs.push_back(b1.forward(x, train));
        outs.push_back(b2_conv.forward(b2_reduce.forward(x, train), train));
        outs.push_back(b3_conv2.forward(b3_conv1.forward(b3_reduce.forward(x, train), train), train));
        Tensor<T> pooled = b4_pool.forward(x);
        outs.push_back(reduced ? std::move(pooled) : b4_proj.forward(pooled, train));
        std::vector<const Tensor<T>*> ptrs;
        for (const auto& t : outs) ptrs.push_back(&t);
        return ops::channel_concat(ptrs);
    }

    Tensor<T> backward(const Tensor<T>& grad) {
        auto parts = ops::channel_split(grad, branch_channels);
        const bool reduced = spec.stride == 2;
        std::size_t k = 0;
        Tensor<T> gx(b4_pool.in_shape);  // pool branch saw the module input
        auto add = [&gx](const Tensor<T>& g) {
            for (std::size_t i = 0; i < gx.numel(); ++i) gx.v[i] += g.v[i];
        };
        if (!reduced && spec.include_1x1_output) add(b1.backward(parts[k++]));
        add(b2_reduce.backward(b2_conv.backward(parts[k++])));
        add(b3_reduce.backward(b3_conv1.backward(b3_conv2.backward(parts[k++]))));
        Tensor<T> gpool = reduced ? std::move(parts[k++]) : b4_proj.backward(parts[k++]);
        add(b4_pool.backward(gpool));
        return gx;
    }

    void zero_grads() {
        if (spec.stride == 1 && spec.include_1x1_output) b1.zero_grads();
        b2_reduce.zero_grads();
        b2_conv.zero_grads();
        b3_reduce.zero_grads();
        b3_conv1.zero_grads();
        b3_conv2.zero_grads();
        if (spec.stride == 1) b4_proj.zero_grads();
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        if (spec.stride == 1 && spec.include_1x1_output) b1.collect(prefix + ".b1", out);
        b2_reduce.collect(prefix + ".b2_reduce", out);
        b2_conv.collect(prefix + ".b2_conv", out);
        b3_reduce.collect(prefix + ".b3_reduce", out);
        b3_conv1.collect(prefix + ".b3_conv1", out);
        b3_conv2.collect(prefix + ".b3_conv2", out);
        if (spec.stride == 1) b4_proj.collect(prefix + ".b4_proj", out);
    }

    int out_channels() const { return spec.out_channels(in_channels); }
};

template <class T>
struct ForwardResult {
    Tensor<T> logits;     // B x num_classes
    Tensor<T> embedding;  // B x embed_dim, tanh bounded
};

template <class T>
class Network {
public:
    NetworkConfig cfg;
    std::vector<ConvBnAct<T>> stem_convs;
    std::vector<PoolLayer<T>> stem_pools;
    std::vector<InceptionBlock<T>> blocks;
    PoolLayer<T> tail_pool;
    ConvBnAct<T> tail_conv;
    FcLayer<T> fc_embed;
    FcLayer<T> fc_head;

    void build(const NetworkConfig& config, SeededRng& rng) {
        config.validate();
        cfg = config;
        stem_convs.clear();
        stem_pools.clear();
        blocks.clear();
        int ch = cfg.in_channels, h = cfg.in_h, w = cfg.in_w;
        for (const auto& op : cfg.stem) {
            if (op.kind == StemOp::Kind::kConv) {
                ConvBnAct<T> layer;
                layer.init(ch, op.conv, rng);
                stem_convs.push_back(std::move(layer));
                ch = op.conv.out_channels;
                h = ops::conv_out_dim(h, op.conv.kernel, op.conv.stride, op.conv.padding);
                w = ops::conv_out_dim(w, op.conv.kernel, op.conv.stride, op.conv.padding);
            } else {
                PoolLayer<T> layer;
                layer.spec = op.pool;
                stem_pools.push_back(std::move(layer));
                h = ops::conv_out_dim(h, op.pool.window, op.pool.stride, op.pool.padding);
                w = ops::conv_out_dim(w, op.pool.window, op.pool.stride, op.pool.padding);
            }
        }
        for (const auto& spec : cfg.modules) {
            InceptionBlock<T> blk;
            blk.init(ch, spec, rng);
            ch = blk.out_channels();
            if (spec.stride == 2) {
                h = ops::conv_out_dim(h, 3, 2, 1);
                w = ops::conv_out_dim(w, 3, 2, 1);
            }
            blocks.push_back(std::move(blk));
        }
        tail_pool.spec = cfg.tail_pool;
        h = ops::conv_out_dim(h, cfg.tail_pool.window, cfg.tail_pool.stride, cfg.tail_pool.padding);
        w = ops::conv_out_dim(w, cfg.tail_pool.window, cfg.tail_pool.stride, cfg.tail_pool.padding);
        if (h <= 0 || w <= 0) throw std::invalid_argument("config: spatial dims collapse before tail");
        tail_conv.init(ch, cfg.tail_conv, rng);
        ch = cfg.tail_conv.out_channels;
        h = ops::conv_out_dim(h, cfg.tail_conv.kernel, cfg.tail_conv.stride, cfg.tail_conv.padding);
        w = ops::conv_out_dim(w, cfg.tail_conv.kernel, cfg.tail_conv.stride, cfg.tail_conv.padding);
        flat_dim_ = ch * h * w;
        fc_embed.init(flat_dim_, cfg.embed_dim, rng);
        fc_head.init(cfg.embed_dim, cfg.num_classes, rng);
    }

    // Re-initialize only the softmax head (fine-tuning transfer).
    void reinit_head(int num_classes, SeededRng& rng) {
        cfg.num_classes = num_classes;
        fc_head.init(cfg.embed_dim, num_classes, rng);
    }

    ForwardResult<T> forward(const Tensor<T>& batch, bool train) {
        if (batch.dim(1) != cfg.in_channels || batch.dim(2) != cfg.in_h || batch.dim(3) != cfg.in_w)
            throw std::invalid_argument("forward: batch shape " + Tensor<T>::shape_str(batch.shape) +
                                        " does not match config input");
        Tensor<T> x = batch;
        std::size_t ci = 0, pi = 0;
        for (const auto& op : cfg.stem) {
            if (op.kind == StemOp::Kind::kConv) x = stem_convs[ci++].forward(x, train);
            else x = stem_pools[pi++].forward(x);
        }
        for (auto& blk : blocks) x = blk.forward(x, train);
        x = tail_pool.forward(x);
        x = tail_conv.forward(x, train);
        const int B = x.dim(0);
        Tensor<T> flat({B, flat_dim_});
        flat.v = x.v;
        pre_tanh_cache_ = fc_embed.forward(flat);
        ForwardResult<T> r;
        r.embedding = ops::tanh_forward(pre_tanh_cache_);
        embed_cache_ = r.embedding;
        conv_out_shape_ = x.shape;
        r.logits = fc_head.forward(r.embedding);
        return r;
    }

    // Accumulates parameter gradients; requires a preceding train-mode forward.
    void backward(const Tensor<T>& grad_logits) {
        Tensor<T> g = fc_head.backward(grad_logits);
        g = ops::tanh_backward(g, embed_cache_);
        g = fc_embed.backward(g);
        Tensor<T> gx(conv_out_shape_);
        gx.v = g.v;
        gx = tail_conv.backward(gx);
        gx = tail_pool.backward(gx);
        for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) gx = it->backward(gx);
        std::size_t ci = stem_convs.size(), pi = stem_pools.size();
        for (auto it = cfg.stem.rbegin(); it != cfg.stem.rend(); ++it) {
            if (it->kind == StemOp::Kind::kConv) gx = stem_convs[--ci].backward(gx);
            else gx = stem_pools[--pi].backward(gx);
        }
    }

    void zero_grads() {
        for (auto& l : stem_convs) l.zero_grads();
        for (auto& b : blocks) b.zero_grads();
        tail_conv.zero_grads();
        fc_embed.zero_grads();
        fc_head.zero_grads();
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        for (std::size_t i = 0; i < stem_convs.size(); ++i)
            stem_convs[i].collect("stem" + std::to_string(i), out);
        for (std::size_t i = 0; i < blocks.size(); ++i)
            blocks[i].collect("mod" + std::to_string(i), out);
        tail_conv.collect("tail_conv", out);
        fc_embed.collect("fc_embed", out, false);
        fc_head.collect("fc_head", out, true);
        return out;
    }

    Tensor<T> extract_embedding(const Tensor<T>& image_batch) {
        return forward(image_batch, false).embedding;
    }

    int flat_dim() const { return flat_dim_; }

private:
    int flat_dim_ = 0;
    Tensor<T> pre_tanh_cache_, embed_cache_;
    std::vector<int> conv_out_shape_;
};

}  // namespace soma
