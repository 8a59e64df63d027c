#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "srh/common.hpp"

namespace srh::nn {

// NCHW batch tensor with an optional gradient buffer of identical shape.
template <typename T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> values;
    std::optional<std::vector<T>> grad;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), values(std::size_t(n_) * c_ * h_ * w_, T(0)) {}

    std::size_t size() const { return std::size_t(n) * c * h * w; }

    T& at(int ni, int ci, int hi, int wi) {
        return values[((std::size_t(ni) * c + ci) * h + hi) * w + wi];
    }
    T at(int ni, int ci, int hi, int wi) const {
        return values[((std::size_t(ni) * c + ci) * h + hi) * w + wi];
    }

    void alloc_grad() {
        if (!grad) grad.emplace(size(), T(0));
        if (grad->size() != size()) throw ShapeError("gradient buffer shape mismatch");
    }
};

}  // namespace srh::nn
