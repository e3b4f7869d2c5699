#pragma once
// Central-difference gradient verification.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "hinas/tensor.hpp"

namespace hinas {

struct GradCheckResult {
    // ||analytic - numeric|| / max(||analytic||, ||numeric||) over all probes.
    // This is the pass/fail measure: per-element ratios are dominated by
    // round-off wherever a true gradient entry is near zero.
    double rel_error = 0.0;
    double max_rel_error = 0.0;  // worst per-probe ratio, for diagnostics
    double max_abs_error = 0.0;
    std::size_t probes = 0;
};

// A single entry of an input tensor to perturb.
template <typename T>
struct GradProbe {
    Tensor<T> tensor;
    std::size_t index;
};

// Compares the analytic gradient of a scalar function against central
// differences at the given probes. The relative error of each probe is
// |analytic - numeric| / max(|analytic|, |numeric|, floor).
template <typename T>
GradCheckResult grad_check_probes(const std::function<Tensor<T>()>& f,
                                  const std::vector<GradProbe<T>>& probes, double step,
                                  double floor = 1e-10) {
    std::vector<Tensor<T>> inputs;
    for (const auto& p : probes) {
        bool seen = false;
        for (auto& t : inputs) seen = seen || t.same_storage(p.tensor);
        if (!seen) inputs.push_back(p.tensor);
    }
    for (auto& t : inputs) t.zero_grad();
    Tensor<T> out = f();
    if (out.numel() != 1) throw ShapeError("grad_check: function must return a scalar");
    if (!std::isfinite(static_cast<double>(out.item()))) {
        throw std::domain_error("grad_check: non-finite function value");
    }
    backward(out);

    GradCheckResult res;
    double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
    for (const auto& p : probes) {
        Tensor<T> t = p.tensor;
        const double analytic = t.has_grad() ? static_cast<double>(t.grad()[p.index]) : 0.0;
        const T saved = t.values()[p.index];
        double plus = 0.0;
        double minus = 0.0;
        {
            NoGradGuard ng;
            t.values()[p.index] = static_cast<T>(saved + step);
            plus = static_cast<double>(f().item());
            t.values()[p.index] = static_cast<T>(saved - step);
            minus = static_cast<double>(f().item());
        }
        t.values()[p.index] = saved;
        if (!std::isfinite(plus) || !std::isfinite(minus)) {
            throw std::domain_error("grad_check: non-finite function value under perturbation");
        }
        const double numeric = (plus - minus) / (2.0 * step);
        const double abs_err = std::abs(analytic - numeric);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
        diff_sq += abs_err * abs_err;
        a_sq += analytic * analytic;
        n_sq += numeric * numeric;
        res.max_abs_error = std::max(res.max_abs_error, abs_err);
        res.max_rel_error = std::max(res.max_rel_error, abs_err / denom);
        ++res.probes;
    }
    const double scale = std::sqrt(std::max({a_sq, n_sq, floor * floor}));
    res.rel_error = std::sqrt(diff_sq) / scale;
    return res;
}

// Checks every element of every input of f. f maps the inputs to an arbitrary
// tensor; it is reduced to a scalar through a fixed random projection.
template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>(const std::vector<Tensor<T>>&)>& f,
                           const std::vector<Tensor<T>>& inputs, double step,
                           std::uint64_t seed = 1234) {
    Tensor<T> probe_out;
    {
        NoGradGuard ng;
        probe_out = f(inputs);
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<T> r(probe_out.numel());
    for (auto& v : r) v = static_cast<T>(dist(rng));
    const Shape out_shape = probe_out.shape();
    auto scalar_fn = [&]() {
        Tensor<T> y = f(inputs);
        if (y.shape() != out_shape) throw ShapeError("grad_check: output shape changed");
        // <y, r> as a differentiable scalar.
        std::vector<T> values = r;
        Tensor<T> rt = Tensor<T>::from(out_shape, std::move(values));
        double acc = 0.0;
        for (std::size_t i = 0; i < y.numel(); ++i) acc += static_cast<double>(y.data()[i]) * r[i];
        return detail::make_result<T>(Shape{}, {static_cast<T>(acc)}, {&y},
                                      [y, rt](TensorNode<T>& self) {
                                          T* dy = detail::grad_target(y);
                                          if (dy == nullptr) return;
                                          for (std::size_t i = 0; i < y.numel(); ++i) {
                                              dy[i] += self.grad[0] * rt.data()[i];
                                          }
                                      });
    };
    std::vector<GradProbe<T>> probes;
    for (const auto& t : inputs) {
        if (!t.requires_grad()) continue;
        for (std::size_t i = 0; i < t.numel(); ++i) probes.push_back({t, i});
    }
    return grad_check_probes<T>(scalar_fn, probes, step);
}

}  // namespace hinas
