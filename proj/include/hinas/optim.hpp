#pragma once
// SGD with momentum, Adam (L2 weight decay folded into the gradient) and the
// cosine learning-rate schedule.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "hinas/tensor.hpp"

namespace hinas {

// Raised on non-finite losses or gradients; maps to exit code 2.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SgdState {
    std::vector<std::vector<double>> velocity;
};

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long long t = 0;
};

namespace detail {

template <typename T>
void check_grads(const std::vector<Parameter<T>>& params) {
    for (const auto& p : params) {
        for (T g : p.tensor.grad()) {
            if (!std::isfinite(static_cast<double>(g))) throw NumericError("non-finite gradient in " + p.name);
        }
    }
}

// Missing gradients (parameter unused by the graph) read as zero.
template <typename T>
double grad_at(const Parameter<T>& p, std::size_t i) {
    return p.tensor.has_grad() ? static_cast<double>(p.tensor.grad()[i]) : 0.0;
}

inline void ensure_slots(std::vector<std::vector<double>>& slots, std::size_t index, std::size_t n) {
    if (slots.size() <= index) slots.resize(index + 1);
    if (slots[index].empty()) slots[index].assign(n, 0.0);
    if (slots[index].size() != n) throw std::invalid_argument("optimizer state does not match parameter shape");
}

}  // namespace detail

// v <- momentum * v + grad + wd * param;  param <- param - lr * v.
template <typename T>
void sgd_step(std::vector<Parameter<T>>& params, SgdState& state, double lr, double momentum,
              double weight_decay) {
    detail::check_grads(params);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        auto data = p.tensor.data();
        detail::ensure_slots(state.velocity, k, data.size());
        auto& vel = state.velocity[k];
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double g = detail::grad_at(p, i) + weight_decay * static_cast<double>(data[i]);
            vel[i] = momentum * vel[i] + g;
            data[i] = static_cast<T>(static_cast<double>(data[i]) - lr * vel[i]);
        }
    }
}

template <typename T>
void adam_step(std::vector<Parameter<T>>& params, AdamState& state, double lr, double weight_decay,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    detail::check_grads(params);
    ++state.t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        auto data = p.tensor.data();
        detail::ensure_slots(state.m, k, data.size());
        detail::ensure_slots(state.v, k, data.size());
        auto& m = state.m[k];
        auto& v = state.v[k];
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double g = detail::grad_at(p, i) + weight_decay * static_cast<double>(data[i]);
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            data[i] = static_cast<T>(static_cast<double>(data[i]) - lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

inline double cosine_lr(double epoch, double epochs_max, double lr_max, double lr_min) {
    if (!(epochs_max > 0.0) || epoch < 0.0 || epoch > epochs_max) {
        throw std::invalid_argument("cosine_lr: epoch must lie in [0, epochs_max]");
    }
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * epoch / epochs_max));
}

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(std::vector<Parameter<T>>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) {
        for (T g : p.tensor.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
    if (max_norm > 0.0 && norm > max_norm) {
        const double f = max_norm / norm;
        for (auto& p : params) {
            if (!p.tensor.has_grad()) continue;
            for (T& g : p.tensor.grad_mut()) g = static_cast<T>(static_cast<double>(g) * f);
        }
    }
    return norm;
}

template <typename T>
void zero_grads(std::vector<Parameter<T>>& params) {
    for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace hinas
