#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace soma {

// Dense row-major N-d array. Image layout convention: (batch, channel, height, width).
template <class T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(checked_numel(shape), T(0)) {}
    Tensor(std::vector<int> s, std::vector<T> data) : shape(std::move(s)), v(std::move(data)) {
        if (static_cast<std::size_t>(checked_numel(shape)) != v.size())
            throw std::invalid_argument("tensor: shape/value count mismatch");
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    std::size_t numel() const { return v.size(); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
    int ndim() const { return static_cast<int>(shape.size()); }

    T& operator[](std::size_t i) { return v[i]; }
    const T& operator[](std::size_t i) const { return v[i]; }

    // 4-d accessors for BCHW tensors.
    T& at4(int b, int c, int h, int w) {
        return v[((static_cast<std::size_t>(b) * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    const T& at4(int b, int c, int h, int w) const {
        return v[((static_cast<std::size_t>(b) * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    T& at2(int r, int c) { return v[static_cast<std::size_t>(r) * shape[1] + c]; }
    const T& at2(int r, int c) const { return v[static_cast<std::size_t>(r) * shape[1] + c]; }

    void fill(T x) { std::fill(v.begin(), v.end(), x); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.v.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }

    static std::string shape_str(const std::vector<int>& s) {
        std::string out = "(";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) out += ",";
            out += std::to_string(s[i]);
        }
        return out + ")";
    }

private:
    static std::size_t checked_numel(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }
};

}  // namespace soma
