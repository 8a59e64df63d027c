#pragma once

#include <cmath>
#include <span>

#include "srh/common.hpp"

namespace srh::optim {

// v <- momentum * v + g;  theta <- theta - lr * v
template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, double lr, double momentum,
              std::span<T> velocity) {
    if (params.size() != grads.size() || params.size() != velocity.size())
        throw ShapeError("sgd_step shape mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = T(momentum * velocity[i] + grads[i]);
        params[i] -= T(lr * velocity[i]);
    }
}

// Bias-corrected Adam. t is the 1-based step count.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, double lr, double beta1,
               double beta2, double eps, std::span<T> m, std::span<T> v, long t) {
    if (params.size() != grads.size() || params.size() != m.size() || params.size() != v.size())
        throw ShapeError("adam_step shape mismatch");
    if (t < 1) throw ContractError("adam step count must be >= 1");
    const double c1 = 1.0 - std::pow(beta1, double(t));
    const double c2 = 1.0 - std::pow(beta2, double(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = T(beta1 * m[i] + (1.0 - beta1) * grads[i]);
        v[i] = T(beta2 * v[i] + (1.0 - beta2) * double(grads[i]) * grads[i]);
        double mhat = m[i] / c1;
        double vhat = v[i] / c2;
        params[i] -= T(lr * mhat / (std::sqrt(vhat) + eps));
    }
}

}  // namespace srh::optim
