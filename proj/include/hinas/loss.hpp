#pragma once
// Restoration loss (MSE + lambda * log10(1/SSIM)) and the PSNR/SSIM metrics.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "hinas/ops.hpp"

namespace hinas {

struct SsimConfig {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;

    [[nodiscard]] double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    [[nodiscard]] double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }

    // Normalized 1-D Gaussian; the 2-D window is its outer product.
    [[nodiscard]] std::vector<double> kernel_1d() const {
        std::vector<double> g(window);
        const double c = (window - 1) / 2.0;
        double total = 0.0;
        for (int i = 0; i < window; ++i) {
            g[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
            total += g[i];
        }
        for (auto& v : g) v /= total;
        return g;
    }
};

namespace detail {

// Valid separable correlation of every (h, w) plane with g (x) g.
inline void gauss_valid(const double* src, double* dst, int planes, int h, int w,
                        const std::vector<double>& g, std::vector<double>& tmp) {
    const int k = static_cast<int>(g.size());
    const int ho = h - k + 1;
    const int wo = w - k + 1;
    tmp.assign(static_cast<std::size_t>(h) * wo, 0.0);
    for (int p = 0; p < planes; ++p) {
        const double* s = src + static_cast<std::size_t>(p) * h * w;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < wo; ++x) {
                double acc = 0.0;
                for (int t = 0; t < k; ++t) acc += g[t] * s[y * w + x + t];
                tmp[static_cast<std::size_t>(y) * wo + x] = acc;
            }
        }
        double* d = dst + static_cast<std::size_t>(p) * ho * wo;
        for (int y = 0; y < ho; ++y) {
            for (int x = 0; x < wo; ++x) {
                double acc = 0.0;
                for (int t = 0; t < k; ++t) acc += g[t] * tmp[static_cast<std::size_t>(y + t) * wo + x];
                d[static_cast<std::size_t>(y) * wo + x] = acc;
            }
        }
    }
}

// Adjoint of gauss_valid: scatters (ho, wo) planes back to (h, w), accumulating.
inline void gauss_valid_adjoint(const double* src, double* dst, int planes, int h, int w,
                                const std::vector<double>& g, std::vector<double>& tmp) {
    const int k = static_cast<int>(g.size());
    const int ho = h - k + 1;
    const int wo = w - k + 1;
    for (int p = 0; p < planes; ++p) {
        tmp.assign(static_cast<std::size_t>(h) * wo, 0.0);
        const double* s = src + static_cast<std::size_t>(p) * ho * wo;
        for (int y = 0; y < ho; ++y) {
            for (int x = 0; x < wo; ++x) {
                const double v = s[static_cast<std::size_t>(y) * wo + x];
                for (int t = 0; t < k; ++t) tmp[static_cast<std::size_t>(y + t) * wo + x] += g[t] * v;
            }
        }
        double* d = dst + static_cast<std::size_t>(p) * h * w;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < wo; ++x) {
                const double v = tmp[static_cast<std::size_t>(y) * wo + x];
                for (int t = 0; t < k; ++t) d[y * w + x + t] += g[t] * v;
            }
        }
    }
}

}  // namespace detail

// Mean SSIM over all valid window positions, channels and batch items.
// Differentiable with respect to both arguments.
template <typename T>
Tensor<T> ssim(const Tensor<T>& x, const Tensor<T>& y, const SsimConfig& cfg = {}) {
    const Shape s = x.shape();
    if (y.shape() != s) throw ShapeError("ssim: " + s.str() + " vs " + y.shape().str());
    if (s.h < cfg.window || s.w < cfg.window) {
        throw ShapeError("ssim: image " + s.str() + " smaller than the " + std::to_string(cfg.window) +
                         "x" + std::to_string(cfg.window) + " window");
    }
    const int planes = s.n * s.c;
    const int ho = s.h - cfg.window + 1;
    const int wo = s.w - cfg.window + 1;
    const std::size_t in_n = s.numel();
    const std::size_t out_n = static_cast<std::size_t>(planes) * ho * wo;
    const auto g = cfg.kernel_1d();
    const double C1 = cfg.c1();
    const double C2 = cfg.c2();

    std::vector<double> xd(in_n), yd(in_n), xx(in_n), yy(in_n), xy(in_n);
    for (std::size_t i = 0; i < in_n; ++i) {
        xd[i] = x.data()[i];
        yd[i] = y.data()[i];
        xx[i] = xd[i] * xd[i];
        yy[i] = yd[i] * yd[i];
        xy[i] = xd[i] * yd[i];
    }
    std::vector<double> mx(out_n), my(out_n), exx(out_n), eyy(out_n), exy(out_n), tmp;
    detail::gauss_valid(xd.data(), mx.data(), planes, s.h, s.w, g, tmp);
    detail::gauss_valid(yd.data(), my.data(), planes, s.h, s.w, g, tmp);
    detail::gauss_valid(xx.data(), exx.data(), planes, s.h, s.w, g, tmp);
    detail::gauss_valid(yy.data(), eyy.data(), planes, s.h, s.w, g, tmp);
    detail::gauss_valid(xy.data(), exy.data(), planes, s.h, s.w, g, tmp);

    // Partials of the local SSIM map w.r.t. (mu_x, mu_y, E[x^2], E[y^2], E[xy]).
    std::vector<double> d_mx(out_n), d_my(out_n), d_exx(out_n), d_eyy(out_n), d_exy(out_n);
    double total = 0.0;
    for (std::size_t i = 0; i < out_n; ++i) {
        const double sxx = exx[i] - mx[i] * mx[i];
        const double syy = eyy[i] - my[i] * my[i];
        const double sxy = exy[i] - mx[i] * my[i];
        const double a1 = 2.0 * mx[i] * my[i] + C1;
        const double a2 = 2.0 * sxy + C2;
        const double b1 = mx[i] * mx[i] + my[i] * my[i] + C1;
        const double b2 = sxx + syy + C2;
        const double v = (a1 * a2) / (b1 * b2);
        total += v;
        const double dv_dsxy = 2.0 * a1 / (b1 * b2);
        const double dv_dsvar = -v / b2;  // same for sxx and syy
        const double dv_dmx_direct = 2.0 * my[i] * a2 / (b1 * b2) - v * 2.0 * mx[i] / b1;
        const double dv_dmy_direct = 2.0 * mx[i] * a2 / (b1 * b2) - v * 2.0 * my[i] / b1;
        d_mx[i] = dv_dmx_direct - 2.0 * mx[i] * dv_dsvar - my[i] * dv_dsxy;
        d_my[i] = dv_dmy_direct - 2.0 * my[i] * dv_dsvar - mx[i] * dv_dsxy;
        d_exx[i] = dv_dsvar;
        d_eyy[i] = dv_dsvar;
        d_exy[i] = dv_dsxy;
    }
    const double count = static_cast<double>(out_n);
    const T value = static_cast<T>(total / count);

    return detail::make_result<T>(
        Shape{}, {value}, {&x, &y},
        [x, y, s, planes, g, count, d_mx = std::move(d_mx), d_my = std::move(d_my), d_exx = std::move(d_exx),
         d_eyy = std::move(d_eyy), d_exy = std::move(d_exy)](TensorNode<T>& self) {
            T* dx = detail::grad_target(x);
            T* dy = detail::grad_target(y);
            const double up = static_cast<double>(self.grad[0]) / count;
            const std::size_t in_n = s.numel();
            std::vector<double> tmp;
            auto back = [&](const std::vector<double>& d) {
                std::vector<double> out(in_n, 0.0);
                detail::gauss_valid_adjoint(d.data(), out.data(), planes, s.h, s.w, g, tmp);
                return out;
            };
            const auto a_exy = back(d_exy);
            if (dx != nullptr) {
                const auto a_mx = back(d_mx);
                const auto a_exx = back(d_exx);
                for (std::size_t i = 0; i < in_n; ++i) {
                    const double xv = x.data()[i];
                    const double yv = y.data()[i];
                    dx[i] += static_cast<T>(up * (a_mx[i] + 2.0 * xv * a_exx[i] + yv * a_exy[i]));
                }
            }
            if (dy != nullptr) {
                const auto a_my = back(d_my);
                const auto a_eyy = back(d_eyy);
                for (std::size_t i = 0; i < in_n; ++i) {
                    const double xv = x.data()[i];
                    const double yv = y.data()[i];
                    dy[i] += static_cast<T>(up * (a_my[i] + 2.0 * yv * a_eyy[i] + xv * a_exy[i]));
                }
            }
        });
}

// log10(1 / ssim): zero for identical inputs, growing as similarity drops.
template <typename T>
Tensor<T> l_ssim(const Tensor<T>& x, const Tensor<T>& y, const SsimConfig& cfg = {}) {
    Tensor<T> s = ssim(x, y, cfg);
    if (!(s.item() > T(0))) throw std::domain_error("l_ssim: non-positive SSIM");
    return scale(log10(s), T(-1));
}

// Floor applied to SSIM inside the training loss. Network outputs are not
// confined to [0, 1], so SSIM can reach zero or below early in training.
inline constexpr double kSsimLossFloor = 1e-3;

struct LossConfig {
    double lambda = 0.6;
    bool use_ssim_term = true;
};

template <typename T>
Tensor<T> restoration_loss(const Tensor<T>& pred, const Tensor<T>& target, const LossConfig& cfg = {},
                           const SsimConfig& ssim_cfg = {}) {
    if (pred.shape() != target.shape()) {
        throw ShapeError("restoration_loss: " + pred.shape().str() + " vs " + target.shape().str());
    }
    if (cfg.lambda < 0.0) throw std::invalid_argument("restoration_loss: lambda must be >= 0");
    Tensor<T> loss = mse(pred, target);
    if (!cfg.use_ssim_term || cfg.lambda == 0.0) return loss;
    Tensor<T> s = clamp_min(ssim(pred, target, ssim_cfg), static_cast<T>(kSsimLossFloor));
    return add(loss, scale(log10(s), static_cast<T>(-cfg.lambda)));
}

inline constexpr double kPsnrClamp = 100.0;

template <typename T>
double psnr(const Tensor<T>& x, const Tensor<T>& y, double peak = 1.0) {
    if (x.shape() != y.shape()) throw ShapeError("psnr: " + x.shape().str() + " vs " + y.shape().str());
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double d = static_cast<double>(x.data()[i]) - y.data()[i];
        acc += d * d;
    }
    const double m = acc / static_cast<double>(x.numel());
    if (m == 0.0) return kPsnrClamp;
    return std::min(kPsnrClamp, 10.0 * std::log10(peak * peak / m));
}

}  // namespace hinas
