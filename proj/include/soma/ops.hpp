#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "soma/tensor.hpp"

// Differentiable primitives. All forward ops are pure; reductions use a
// fixed sequential order so outputs are bitwise reproducible.

namespace soma {
namespace ops {

// C(MxN) += A(MxK) * B(KxN), all row-major. k ascends for every output element.
template <class T>
inline void gemm_acc(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const T av = a[static_cast<std::size_t>(i) * k + p];
            if (av == T(0)) continue;
            const T* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline int conv_out_dim(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

template <class T>
inline void im2col(const T* img, int C, int H, int W, int kh, int kw, int stride,
                   int pad, int oh, int ow, T* col) {
    // col is (C*kh*kw) x (oh*ow)
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                T* dst = col + static_cast<std::size_t>((c * kh + ky) * kw + kx) * oh * ow;
                for (int y = 0; y < oh; ++y) {
                    const int iy = y * stride + ky - pad;
                    if (iy < 0 || iy >= H) {
                        for (int x = 0; x < ow; ++x) dst[y * ow + x] = T(0);
                        continue;
                    }
                    const T* src = img + (static_cast<std::size_t>(c) * H + iy) * W;
                    for (int x = 0; x < ow; ++x) {
                        const int ix = x * stride + kx - pad;
                        dst[y * ow + x] = (ix >= 0 && ix < W) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
inline void col2im_acc(const T* col, int C, int H, int W, int kh, int kw, int stride,
                       int pad, int oh, int ow, T* img) {
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const T* src = col + static_cast<std::size_t>((c * kh + ky) * kw + kx) * oh * ow;
                for (int y = 0; y < oh; ++y) {
                    const int iy = y * stride + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    T* dst = img + (static_cast<std::size_t>(c) * H + iy) * W;
                    for (int x = 0; x < ow; ++x) {
                        const int ix = x * stride + kx - pad;
                        if (ix >= 0 && ix < W) dst[ix] += src[y * ow + x];
                    }
                }
            }
        }
    }
}

// input BCHW, weights OIHW (cross-correlation), bias length O.
template <class T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights,
                         const std::vector<T>& bias, int stride, int padding) {
    if (input.ndim() != 4 || weights.ndim() != 4)
        throw std::invalid_argument("conv2d: expected 4-d input and weights");
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int O = weights.dim(0), I = weights.dim(1), kh = weights.dim(2), kw = weights.dim(3);
    if (C != I)
        throw std::invalid_argument("conv2d: input channels " + std::to_string(C) +
                                    " != weight input channels " + std::to_string(I));
    if (static_cast<int>(bias.size()) != O)
        throw std::invalid_argument("conv2d: bias length != output channels");
    const int oh = conv_out_dim(H, kh, stride, padding);
    const int ow = conv_out_dim(W, kw, stride, padding);
    if (oh <= 0 || ow <= 0)
        throw std::invalid_argument("conv2d: kernel does not fit padded input");

    Tensor<T> out({B, O, oh, ow});
    std::vector<T> col(static_cast<std::size_t>(C) * kh * kw * oh * ow);
    for (int b = 0; b < B; ++b) {
        im2col(&input.v[static_cast<std::size_t>(b) * C * H * W], C, H, W, kh, kw,
               stride, padding, oh, ow, col.data());
        T* ob = &out.v[static_cast<std::size_t>(b) * O * oh * ow];
        for (int o = 0; o < O; ++o)
            std::fill(ob + static_cast<std::size_t>(o) * oh * ow,
                      ob + static_cast<std::size_t>(o + 1) * oh * ow, bias[o]);
        gemm_acc(weights.v.data(), col.data(), ob, O, C * kh * kw, oh * ow);
    }
    return out;
}

template <class T>
struct ConvGrads {
    Tensor<T> grad_input;
    Tensor<T> grad_weights;
    std::vector<T> grad_bias;
};

template <class T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                             const Tensor<T>& weights, int stride, int padding) {
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int O = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
    const int oh = grad_out.dim(2), ow = grad_out.dim(3);
    if (grad_out.dim(0) != B || grad_out.dim(1) != O ||
        oh != conv_out_dim(H, kh, stride, padding) ||
        ow != conv_out_dim(W, kw, stride, padding))
        throw std::invalid_argument("conv2d_backward: grad_out shape mismatch");

    ConvGrads<T> g{Tensor<T>({B, C, H, W}), Tensor<T>({O, C, kh, kw}),
                   std::vector<T>(static_cast<std::size_t>(O), T(0))};
    const int K = C * kh * kw, N = oh * ow;
    std::vector<T> col(static_cast<std::size_t>(K) * N);
    std::vector<T> gcol(static_cast<std::size_t>(K) * N);
    // weights transposed once: K x O
    std::vector<T> wt(static_cast<std::size_t>(K) * O);
    for (int o = 0; o < O; ++o)
        for (int p = 0; p < K; ++p)
            wt[static_cast<std::size_t>(p) * O + o] = weights.v[static_cast<std::size_t>(o) * K + p];

    for (int b = 0; b < B; ++b) {
        const T* go = &grad_out.v[static_cast<std::size_t>(b) * O * N];
        for (int o = 0; o < O; ++o)
            for (int j = 0; j < N; ++j) g.grad_bias[o] += go[static_cast<std::size_t>(o) * N + j];

        im2col(&input.v[static_cast<std::size_t>(b) * C * H * W], C, H, W, kh, kw,
               stride, padding, oh, ow, col.data());
        // grad_w += go(OxN) * col^T(NxK): accumulate per (o,p) with j ascending
        for (int o = 0; o < O; ++o) {
            const T* gor = go + static_cast<std::size_t>(o) * N;
            T* gwr = &g.grad_weights.v[static_cast<std::size_t>(o) * K];
            for (int p = 0; p < K; ++p) {
                const T* cr = &col[static_cast<std::size_t>(p) * N];
                T acc = T(0);
                for (int j = 0; j < N; ++j) acc += gor[j] * cr[j];
                gwr[p] += acc;
            }
        }
        // grad_col = wt(KxO) * go(OxN)
        std::fill(gcol.begin(), gcol.end(), T(0));
        gemm_acc(wt.data(), go, gcol.data(), K, O, N);
        col2im_acc(gcol.data(), C, H, W, kh, kw, stride, padding, oh, ow,
                   &g.grad_input.v[static_cast<std::size_t>(b) * C * H * W]);
    }
    return g;
}

template <class T>
struct MaxPoolResult {
    Tensor<T> output;
    std::vector<std::size_t> argmax;  // flat index into the input per output element
};

// Padding is virtual -inf: the window is clamped to the valid region.
template <class T>
MaxPoolResult<T> maxpool_forward(const Tensor<T>& input, int window, int stride, int pad = 0) {
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    if (window > H + 2 * pad || window > W + 2 * pad)
        throw std::invalid_argument("maxpool: window larger than padded input");
    const int oh = (H + 2 * pad - window) / stride + 1;
    const int ow = (W + 2 * pad - window) / stride + 1;
    MaxPoolResult<T> r{Tensor<T>({B, C, oh, ow}), {}};
    r.argmax.resize(r.output.numel());
    std::size_t oi = 0;
    for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
            const std::size_t base = (static_cast<std::size_t>(b) * C + c) * H * W;
            for (int y = 0; y < oh; ++y) {
                const int y0 = std::max(0, y * stride - pad);
                const int y1 = std::min(H, y * stride - pad + window);
                for (int x = 0; x < ow; ++x, ++oi) {
                    const int x0 = std::max(0, x * stride - pad);
                    const int x1 = std::min(W, x * stride - pad + window);
                    std::size_t best = base + static_cast<std::size_t>(y0) * W + x0;
                    T bv = input.v[best];
                    for (int iy = y0; iy < y1; ++iy) {
                        for (int ix = x0; ix < x1; ++ix) {
                            const std::size_t idx = base + static_cast<std::size_t>(iy) * W + ix;
                            if (input.v[idx] > bv) { bv = input.v[idx]; best = idx; }
                        }
                    }
                    r.output.v[oi] = bv;
                    r.argmax[oi] = best;
                }
            }
        }
    }
    return r;
}

template <class T>
Tensor<T> maxpool_backward(const Tensor<T>& grad_out, const std::vector<std::size_t>& argmax,
                           const std::vector<int>& input_shape) {
    Tensor<T> gi(input_shape);
    for (std::size_t i = 0; i < grad_out.numel(); ++i) gi.v[argmax[i]] += grad_out.v[i];
    return gi;
}

enum class BnMode { kTrain, kInference };

template <class T>
struct BnCache {
    Tensor<T> xhat;
    std::vector<T> inv_std;  // per channel
};

// Per-channel batch norm over (B,H,W). Running stats updated in train mode
// with EMA momentum. gamma/beta length == channels.
template <class T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, const std::vector<T>& gamma,
                            const std::vector<T>& beta, std::vector<T>& running_mean,
                            std::vector<T>& running_var, BnMode mode, T momentum, T eps,
                            BnCache<T>* cache = nullptr) {
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    if (static_cast<int>(gamma.size()) != C || static_cast<int>(beta.size()) != C)
        throw std::invalid_argument("batchnorm: gamma/beta length != channels");
    if (mode == BnMode::kTrain && B == 0)
        throw std::invalid_argument("batchnorm: empty batch in train mode");

    Tensor<T> out(input.shape);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const T n = static_cast<T>(static_cast<std::size_t>(B) * plane);
    if (cache) { cache->xhat = Tensor<T>(input.shape); cache->inv_std.assign(C, T(0)); }

    for (int c = 0; c < C; ++c) {
        T mean, var;
        if (mode == BnMode::kTrain) {
            T sum = T(0);
            for (int b = 0; b < B; ++b) {
                const T* p = &input.v[(static_cast<std::size_t>(b) * C + c) * plane];
                for (std::size_t i = 0; i < plane; ++i) sum += p[i];
            }
            mean = sum / n;
            T ss = T(0);
            for (int b = 0; b < B; ++b) {
                const T* p = &input.v[(static_cast<std::size_t>(b) * C + c) * plane];
                for (std::size_t i = 0; i < plane; ++i) { const T d = p[i] - mean; ss += d * d; }
            }
            var = ss / n;
            running_mean[c] = momentum * running_mean[c] + (T(1) - momentum) * mean;
            running_var[c] = momentum * running_var[c] + (T(1) - momentum) * var;
        } else {
            mean = running_mean[c];
            var = running_var[c];
        }
        const T inv_std = T(1) / std::sqrt(var + eps);
        if (cache) cache->inv_std[c] = inv_std;
        for (int b = 0; b < B; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const T xh = (input.v[off + i] - mean) * inv_std;
                if (cache) cache->xhat.v[off + i] = xh;
                out.v[off + i] = gamma[c] * xh + beta[c];
            }
        }
    }
    return out;
}

template <class T>
struct BnGrads {
    Tensor<T> grad_input;
    std::vector<T> grad_gamma;
    std::vector<T> grad_beta;
};

template <class T>
BnGrads<T> batchnorm_backward(const Tensor<T>& grad_out, const std::vector<T>& gamma,
                              const BnCache<T>& cache) {
    const int B = grad_out.dim(0), C = grad_out.dim(1), H = grad_out.dim(2), W = grad_out.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const T n = static_cast<T>(static_cast<std::size_t>(B) * plane);
    BnGrads<T> g{Tensor<T>(grad_out.shape), std::vector<T>(C, T(0)), std::vector<T>(C, T(0))};
    for (int c = 0; c < C; ++c) {
        T sum_dy = T(0), sum_dy_xhat = T(0);
        for (int b = 0; b < B; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += grad_out.v[off + i];
                sum_dy_xhat += grad_out.v[off + i] * cache.xhat.v[off + i];
            }
        }
        g.grad_beta[c] = sum_dy;
        g.grad_gamma[c] = sum_dy_xhat;
        const T k = gamma[c] * cache.inv_std[c];
        for (int b = 0; b < B; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                g.grad_input.v[off + i] =
                    k * (grad_out.v[off + i] - sum_dy / n - cache.xhat.v[off + i] * sum_dy_xhat / n);
            }
        }
    }
    return g;
}

template <class T>
Tensor<T> relu(const Tensor<T>& input) {
    Tensor<T> out(input.shape);
    for (std::size_t i = 0; i < input.numel(); ++i)
        out.v[i] = input.v[i] > T(0) ? input.v[i] : T(0);
    return out;
}

// Subgradient at 0 taken as 0.
template <class T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& input) {
    Tensor<T> gi(input.shape);
    for (std::size_t i = 0; i < input.numel(); ++i)
        gi.v[i] = input.v[i] > T(0) ? grad_out.v[i] : T(0);
    return gi;
}

// Output kept strictly inside (-1,1): saturated values are nudged to the
// nearest representable interior value.
template <class T>
Tensor<T> tanh_forward(const Tensor<T>& input) {
    static const T hi = std::nextafter(T(1), T(0));
    Tensor<T> out(input.shape);
    for (std::size_t i = 0; i < input.numel(); ++i) {
        const T t = std::tanh(input.v[i]);
        out.v[i] = t >= T(1) ? hi : (t <= T(-1) ? -hi : t);
    }
    return out;
}

template <class T>
Tensor<T> tanh_backward(const Tensor<T>& grad_out, const Tensor<T>& output) {
    Tensor<T> gi(output.shape);
    for (std::size_t i = 0; i < output.numel(); ++i)
        gi.v[i] = grad_out.v[i] * (T(1) - output.v[i] * output.v[i]);
    return gi;
}

// input B x D_in, weights D_out x D_in, bias D_out.
template <class T>
Tensor<T> fully_connected(const Tensor<T>& input, const Tensor<T>& weights,
                          const std::vector<T>& bias) {
    const int B = input.dim(0), din = input.dim(1);
    const int dout = weights.dim(0);
    if (weights.dim(1) != din)
        throw std::invalid_argument("fully_connected: inner dimensions disagree");
    Tensor<T> out({B, dout});
    for (int b = 0; b < B; ++b) {
        for (int o = 0; o < dout; ++o) {
            const T* w = &weights.v[static_cast<std::size_t>(o) * din];
            const T* x = &input.v[static_cast<std::size_t>(b) * din];
            T acc = bias[o];
            for (int i = 0; i < din; ++i) acc += w[i] * x[i];
            out.at2(b, o) = acc;
        }
    }
    return out;
}

template <class T>
struct FcGrads {
    Tensor<T> grad_input;
    Tensor<T> grad_weights;
    std::vector<T> grad_bias;
};

template <class T>
FcGrads<T> fully_connected_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                                    const Tensor<T>& weights) {
    const int B = input.dim(0), din = input.dim(1), dout = weights.dim(0);
    FcGrads<T> g{Tensor<T>({B, din}), Tensor<T>({dout, din}),
                 std::vector<T>(static_cast<std::size_t>(dout), T(0))};
    for (int b = 0; b < B; ++b) {
        for (int o = 0; o < dout; ++o) {
            const T go = grad_out.at2(b, o);
            g.grad_bias[o] += go;
            const T* x = &input.v[static_cast<std::size_t>(b) * din];
            T* gw = &g.grad_weights.v[static_cast<std::size_t>(o) * din];
            const T* w = &weights.v[static_cast<std::size_t>(o) * din];
            T* gx = &g.grad_input.v[static_cast<std::size_t>(b) * din];
            for (int i = 0; i < din; ++i) {
                gw[i] += go * x[i];
                gx[i] += go * w[i];
            }
        }
    }
    return g;
}

template <class T>
Tensor<T> channel_concat(const std::vector<const Tensor<T>*>& inputs) {
    if (inputs.empty()) throw std::invalid_argument("channel_concat: no inputs");
    const int B = inputs[0]->dim(0), H = inputs[0]->dim(2), W = inputs[0]->dim(3);
    int C = 0;
    for (const auto* t : inputs) {
        if (t->dim(0) != B || t->dim(2) != H || t->dim(3) != W)
            throw std::invalid_argument("channel_concat: non-channel dims differ");
        C += t->dim(1);
    }
    Tensor<T> out({B, C, H, W});
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int b = 0; b < B; ++b) {
        std::size_t dst = (static_cast<std::size_t>(b) * C) * plane;
        for (const auto* t : inputs) {
            const std::size_t n = static_cast<std::size_t>(t->dim(1)) * plane;
            std::copy_n(&t->v[static_cast<std::size_t>(b) * n], n, &out.v[dst]);
            dst += n;
        }
    }
    return out;
}

template <class T>
std::vector<Tensor<T>> channel_split(const Tensor<T>& x, const std::vector<int>& channels) {
    const int B = x.dim(0), H = x.dim(2), W = x.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    std::vector<Tensor<T>> parts;
    parts.reserve(channels.size());
    for (int c : channels) parts.emplace_back(std::vector<int>{B, c, H, W});
    for (int b = 0; b < B; ++b) {
        std::size_t src = (static_cast<std::size_t>(b) * x.dim(1)) * plane;
        for (std::size_t k = 0; k < channels.size(); ++k) {
            const std::size_t n = static_cast<std::size_t>(channels[k]) * plane;
            std::copy_n(&x.v[src], n, &parts[k].v[static_cast<std::size_t>(b) * n]);
            src += n;
        }
    }
    return parts;
}

template <class T>
struct SoftmaxXentResult {
    T loss;
    Tensor<T> grad_logits;
    Tensor<T> probs;
};

// loss = mean over batch of -log softmax(logit)[target]; grad = (softmax - target)/B.
template <class T>
SoftmaxXentResult<T> softmax_cross_entropy(const Tensor<T>& logits, const Tensor<T>& targets) {
    const int B = logits.dim(0), K = logits.dim(1);
    if (targets.dim(0) != B || targets.dim(1) != K)
        throw std::invalid_argument("softmax_cross_entropy: target shape mismatch");
    for (int b = 0; b < B; ++b) {
        int ones = 0;
        T sum = T(0);
        for (int k = 0; k < K; ++k) {
            const T t = targets.at2(b, k);
            if (t == T(1)) ++ones;
            else if (t != T(0)) throw std::invalid_argument("softmax_cross_entropy: non-one-hot target");
            sum += t;
        }
        if (ones != 1 || sum != T(1))
            throw std::invalid_argument("softmax_cross_entropy: target row is not one-hot");
    }
    SoftmaxXentResult<T> r{T(0), Tensor<T>({B, K}), Tensor<T>({B, K})};
    for (int b = 0; b < B; ++b) {
        T mx = logits.at2(b, 0);
        for (int k = 1; k < K; ++k) mx = std::max(mx, logits.at2(b, k));
        T z = T(0);
        for (int k = 0; k < K; ++k) z += std::exp(logits.at2(b, k) - mx);
        const T logz = std::log(z);
        for (int k = 0; k < K; ++k) {
            const T logp = logits.at2(b, k) - mx - logz;
            const T p = std::exp(logp);
            r.probs.at2(b, k) = p;
            r.grad_logits.at2(b, k) = (p - targets.at2(b, k)) / static_cast<T>(B);
            if (targets.at2(b, k) == T(1)) r.loss -= logp;
        }
    }
    r.loss /= static_cast<T>(B);
    return r;
}

}  // namespace ops
}  // namespace soma
