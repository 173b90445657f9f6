#pragma once

#include "ovqe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace ovqe {

inline size_t numel_of(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return n;
}

// Dense row-major tensor. Rank-3 tensors are laid out {channels, rows, cols};
// weights use rank 4 {out, in, k, k} and biases rank 1.
template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;

    TensorT() = default;

    explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
        for (int d : shape)
            if (d <= 0) throw ArgumentError("tensor: non-positive dimension");
        data.assign(numel_of(shape), T(0));
    }

    TensorT(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        for (int dim : shape)
            if (dim <= 0) throw ArgumentError("tensor: non-positive dimension");
        if (data.size() != numel_of(shape))
            throw ArgumentError("tensor: data size does not match shape");
    }

    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    size_t numel() const { return data.size(); }

    T& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * dim(1) + y) * dim(2) + x];
    }
    T at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * dim(1) + y) * dim(2) + x];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const TensorT& other) const { return shape == other.shape; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

using Tensor32 = TensorT<float>;
using Tensor64 = TensorT<double>;

template <typename T>
std::string shape_string(const TensorT<T>& t) {
    std::string s = "{";
    for (int i = 0; i < t.rank(); ++i) {
        if (i) s += ",";
        s += std::to_string(t.dim(i));
    }
    return s + "}";
}

template <typename T>
void ensure_finite(const TensorT<T>& t, const std::string& context) {
    if (!t.all_finite()) throw NumericError("non-finite values in " + context);
}

} // namespace ovqe
