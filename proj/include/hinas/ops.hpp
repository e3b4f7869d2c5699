#pragma once
// Differentiable primitives used by the supernet, the compact nets and the loss.
// Every op computes its forward values eagerly and, when recording, attaches a
// closure that scatters the upstream gradient into its inputs.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "hinas/tensor.hpp"

namespace hinas {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeometry {
    int n, cin, h, w;
    int cout, k;
    int padding, dilation, groups;
    int ho, wo;
    [[nodiscard]] int cin_g() const { return cin / groups; }
    [[nodiscard]] int cout_g() const { return cout / groups; }
    [[nodiscard]] int patch() const { return cin_g() * k * k; }
    [[nodiscard]] int pixels() const { return ho * wo; }
};

// Unfold one group of one image into a (cin_g*k*k, ho*wo) row-major matrix.
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
    const int k = g.k;
    for (int c = 0; c < g.cin_g(); ++c) {
        const T* plane = x + static_cast<std::size_t>(c) * g.h * g.w;
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                T* row = col + (static_cast<std::size_t>(c * k + ki) * k + kj) * g.pixels();
                const int di = ki * g.dilation - g.padding;
                const int dj = kj * g.dilation - g.padding;
                const int ow_lo = std::max(0, -dj);
                const int ow_hi = std::min(g.wo, g.w - dj);
                for (int oh = 0; oh < g.ho; ++oh) {
                    T* dst = row + static_cast<std::size_t>(oh) * g.wo;
                    const int ih = oh + di;
                    if (ih < 0 || ih >= g.h || ow_lo >= ow_hi) {
                        std::fill(dst, dst + g.wo, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(ih) * g.w + dj;
                    std::fill(dst, dst + ow_lo, T(0));
                    std::copy(src + ow_lo, src + ow_hi, dst + ow_lo);
                    std::fill(dst + ow_hi, dst + g.wo, T(0));
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* dx) {
    const int k = g.k;
    for (int c = 0; c < g.cin_g(); ++c) {
        T* plane = dx + static_cast<std::size_t>(c) * g.h * g.w;
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const T* row = col + (static_cast<std::size_t>(c * k + ki) * k + kj) * g.pixels();
                const int di = ki * g.dilation - g.padding;
                const int dj = kj * g.dilation - g.padding;
                const int ow_lo = std::max(0, -dj);
                const int ow_hi = std::min(g.wo, g.w - dj);
                for (int oh = 0; oh < g.ho; ++oh) {
                    const int ih = oh + di;
                    if (ih < 0 || ih >= g.h) continue;
                    const T* src = row + static_cast<std::size_t>(oh) * g.wo;
                    T* dst = plane + static_cast<std::size_t>(ih) * g.w + dj;
                    for (int ow = ow_lo; ow < ow_hi; ++ow) dst[ow] += src[ow];
                }
            }
        }
    }
}

template <typename T>
void depthwise_forward(const T* x, const T* wt, const ConvGeometry& g, T* out) {
    const int k = g.k;
    for (int c = 0; c < g.cin; ++c) {
        const T* plane = x + static_cast<std::size_t>(c) * g.h * g.w;
        T* oplane = out + static_cast<std::size_t>(c) * g.pixels();
        for (int ki = 0; ki < k; ++ki) {
            const int di = ki * g.dilation - g.padding;
            for (int kj = 0; kj < k; ++kj) {
                const T wv = wt[(static_cast<std::size_t>(c) * k + ki) * k + kj];
                const int dj = kj * g.dilation - g.padding;
                const int ow_lo = std::max(0, -dj);
                const int ow_hi = std::min(g.wo, g.w - dj);
                for (int oh = 0; oh < g.ho; ++oh) {
                    const int ih = oh + di;
                    if (ih < 0 || ih >= g.h) continue;
                    const T* src = plane + static_cast<std::size_t>(ih) * g.w + dj;
                    T* dst = oplane + static_cast<std::size_t>(oh) * g.wo;
                    for (int ow = ow_lo; ow < ow_hi; ++ow) dst[ow] += wv * src[ow];
                }
            }
        }
    }
}

template <typename T>
void depthwise_backward(const T* x, const T* wt, const T* gout, const ConvGeometry& g, T* dx,
                        T* dw) {
    const int k = g.k;
    for (int c = 0; c < g.cin; ++c) {
        const T* plane = x + static_cast<std::size_t>(c) * g.h * g.w;
        const T* gplane = gout + static_cast<std::size_t>(c) * g.pixels();
        T* dxplane = dx != nullptr ? dx + static_cast<std::size_t>(c) * g.h * g.w : nullptr;
        for (int ki = 0; ki < k; ++ki) {
            const int di = ki * g.dilation - g.padding;
            for (int kj = 0; kj < k; ++kj) {
                const std::size_t widx = (static_cast<std::size_t>(c) * k + ki) * k + kj;
                const T wv = wt[widx];
                const int dj = kj * g.dilation - g.padding;
                const int ow_lo = std::max(0, -dj);
                const int ow_hi = std::min(g.wo, g.w - dj);
                T acc = T(0);
                for (int oh = 0; oh < g.ho; ++oh) {
                    const int ih = oh + di;
                    if (ih < 0 || ih >= g.h) continue;
                    const T* src = plane + static_cast<std::size_t>(ih) * g.w + dj;
                    const T* gr = gplane + static_cast<std::size_t>(oh) * g.wo;
                    if (dxplane != nullptr) {
                        T* d = dxplane + static_cast<std::size_t>(ih) * g.w + dj;
                        for (int ow = ow_lo; ow < ow_hi; ++ow) d[ow] += wv * gr[ow];
                    }
                    for (int ow = ow_lo; ow < ow_hi; ++ow) acc += gr[ow] * src[ow];
                }
                if (dw != nullptr) dw[widx] += acc;
            }
        }
    }
}

}  // namespace detail

// 2-D cross-correlation, stride 1. weight: (C_out, C_in/groups, k, k).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const std::type_identity_t<Tensor<T>>* bias,
                 int stride, int padding, int dilation, int groups) {
    const Shape xs = x.shape();
    const Shape ws = weight.shape();
    if (stride != 1) throw ShapeError("conv2d: only stride 1 is supported");
    if (groups < 1 || xs.c % groups != 0) {
        throw ShapeError("conv2d: groups " + std::to_string(groups) + " does not divide C_in " +
                         std::to_string(xs.c));
    }
    if (ws.h != ws.w) throw ShapeError("conv2d: kernel must be square, got " + ws.str());
    if (ws.c * groups != xs.c) {
        throw ShapeError("conv2d: weight " + ws.str() + " incompatible with input " + xs.str());
    }
    if (ws.n % groups != 0) throw ShapeError("conv2d: groups must divide C_out");
    if (dilation < 1 || padding < 0) throw ShapeError("conv2d: invalid padding/dilation");
    if (bias != nullptr && bias->numel() != static_cast<std::size_t>(ws.n)) {
        throw ShapeError("conv2d: bias length mismatch");
    }
    detail::ConvGeometry g{xs.n, xs.c, xs.h, xs.w, ws.n, ws.h, padding, dilation, groups, 0, 0};
    g.ho = xs.h + 2 * padding - dilation * (ws.h - 1);
    g.wo = xs.w + 2 * padding - dilation * (ws.w - 1);
    if (g.ho <= 0 || g.wo <= 0) throw ShapeError("conv2d: kernel larger than padded input");

    const Shape os{xs.n, ws.n, g.ho, g.wo};
    std::vector<T> out(os.numel(), T(0));
    const bool depthwise = groups == xs.c && ws.n == xs.c;
    const bool pointwise = ws.h == 1 && padding == 0 && groups == 1;
    const std::size_t in_stride = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
    const std::size_t out_stride = static_cast<std::size_t>(ws.n) * g.pixels();
    const T* xd = x.data().data();
    const T* wd = weight.data().data();

    if (depthwise) {
        for (int b = 0; b < xs.n; ++b) {
            detail::depthwise_forward(xd + b * in_stride, wd, g, out.data() + b * out_stride);
        }
    } else {
        std::vector<T> col(pointwise ? 0 : static_cast<std::size_t>(g.patch()) * g.pixels());
        for (int b = 0; b < xs.n; ++b) {
            for (int gi = 0; gi < groups; ++gi) {
                const T* xin = xd + b * in_stride +
                               static_cast<std::size_t>(gi) * g.cin_g() * xs.h * xs.w;
                const T* colp = xin;
                if (!pointwise) {
                    detail::im2col(xin, g, col.data());
                    colp = col.data();
                }
                Eigen::Map<const detail::RowMat<T>> wm(
                    wd + static_cast<std::size_t>(gi) * g.cout_g() * g.patch(), g.cout_g(),
                    g.patch());
                Eigen::Map<const detail::RowMat<T>> cm(colp, g.patch(), g.pixels());
                Eigen::Map<detail::RowMat<T>> om(
                    out.data() + b * out_stride +
                        static_cast<std::size_t>(gi) * g.cout_g() * g.pixels(),
                    g.cout_g(), g.pixels());
                om.noalias() = wm * cm;
            }
        }
    }
    if (bias != nullptr) {
        const T* bd = bias->data().data();
        for (int b = 0; b < xs.n; ++b) {
            for (int o = 0; o < ws.n; ++o) {
                T* p = out.data() + b * out_stride + static_cast<std::size_t>(o) * g.pixels();
                for (int i = 0; i < g.pixels(); ++i) p[i] += bd[o];
            }
        }
    }

    Tensor<T> bias_t = bias != nullptr ? *bias : Tensor<T>();
    return detail::make_result<T>(
        os, std::move(out), {&x, &weight, bias},
        [x, weight, bias_t, g, depthwise, pointwise, in_stride, out_stride](TensorNode<T>& self) {
            const T* gout = self.grad.data();
            T* dx = detail::grad_target(x);
            T* dw = detail::grad_target(weight);
            T* db = detail::grad_target(bias_t);
            const T* xd = x.data().data();
            const T* wd = weight.data().data();
            if (db != nullptr) {
                for (int b = 0; b < g.n; ++b) {
                    for (int o = 0; o < g.cout; ++o) {
                        const T* p = gout + b * out_stride + static_cast<std::size_t>(o) * g.pixels();
                        T acc = T(0);
                        for (int i = 0; i < g.pixels(); ++i) acc += p[i];
                        db[o] += acc;
                    }
                }
            }
            if (dx == nullptr && dw == nullptr) return;
            if (depthwise) {
                for (int b = 0; b < g.n; ++b) {
                    detail::depthwise_backward(xd + b * in_stride, wd, gout + b * out_stride, g,
                                               dx != nullptr ? dx + b * in_stride : nullptr, dw);
                }
                return;
            }
            std::vector<T> col(pointwise ? 0 : static_cast<std::size_t>(g.patch()) * g.pixels());
            std::vector<T> dcol(col.size());
            for (int b = 0; b < g.n; ++b) {
                for (int gi = 0; gi < g.groups; ++gi) {
                    const std::size_t in_off =
                        b * in_stride + static_cast<std::size_t>(gi) * g.cin_g() * g.h * g.w;
                    Eigen::Map<const detail::RowMat<T>> gm(
                        gout + b * out_stride +
                            static_cast<std::size_t>(gi) * g.cout_g() * g.pixels(),
                        g.cout_g(), g.pixels());
                    Eigen::Map<const detail::RowMat<T>> wm(
                        wd + static_cast<std::size_t>(gi) * g.cout_g() * g.patch(), g.cout_g(),
                        g.patch());
                    if (dw != nullptr) {
                        const T* colp = xd + in_off;
                        if (!pointwise) {
                            detail::im2col(xd + in_off, g, col.data());
                            colp = col.data();
                        }
                        Eigen::Map<const detail::RowMat<T>> cm(colp, g.patch(), g.pixels());
                        Eigen::Map<detail::RowMat<T>> dwm(
                            dw + static_cast<std::size_t>(gi) * g.cout_g() * g.patch(),
                            g.cout_g(), g.patch());
                        dwm.noalias() += gm * cm.transpose();
                    }
                    if (dx != nullptr) {
                        if (pointwise) {
                            Eigen::Map<detail::RowMat<T>> dxm(dx + in_off, g.patch(), g.pixels());
                            dxm.noalias() += wm.transpose() * gm;
                        } else {
                            Eigen::Map<detail::RowMat<T>> dcm(dcol.data(), g.patch(), g.pixels());
                            dcm.noalias() = wm.transpose() * gm;
                            detail::col2im_add(dcol.data(), g, dx + in_off);
                        }
                    }
                }
            }
        });
}

// conv2d with "same" padding = dilation*(k-1)/2; odd kernels only.
template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& x, const Tensor<T>& weight,
                      const std::type_identity_t<Tensor<T>>* bias = nullptr, int dilation = 1, int groups = 1) {
    const int k = weight.shape().h;
    if (k % 2 == 0) {
        throw ShapeError("conv2d_same: even kernel size " + std::to_string(k) +
                         " has no symmetric same padding");
    }
    return conv2d(x, weight, bias, 1, dilation * (k - 1) / 2, dilation, groups);
}

// Depthwise k x k (groups = C_in) followed by a 1x1 pointwise conv.
template <typename T>
Tensor<T> separable_conv(const Tensor<T>& x, const Tensor<T>& depth_weight,
                         const Tensor<T>& point_weight, int k) {
    if (depth_weight.shape().h != k || depth_weight.shape().c != 1 ||
        depth_weight.shape().n != x.shape().c) {
        throw ShapeError("separable_conv: depthwise kernel " + depth_weight.shape().str() +
                         " does not match input " + x.shape().str() + " and k=" +
                         std::to_string(k));
    }
    if (point_weight.shape().h != 1) throw ShapeError("separable_conv: pointwise kernel must be 1x1");
    Tensor<T> mid = conv2d_same(x, depth_weight, nullptr, 1, x.shape().c);
    return conv2d(mid, point_weight, nullptr, 1, 0, 1, 1);
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
    std::vector<T> out(x.numel());
    const T* xd = x.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] >= T(0) ? xd[i] : slope * xd[i];
    return detail::make_result<T>(x.shape(), std::move(out), {&x}, [x, slope](TensorNode<T>& self) {
        T* dx = detail::grad_target(x);
        if (dx == nullptr) return;
        const T* xd = x.data().data();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            dx[i] += xd[i] >= T(0) ? self.grad[i] : slope * self.grad[i];
        }
    });
}

template <typename T>
struct BatchNormState {
    std::vector<T> running_mean;
    std::vector<T> running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);

    BatchNormState() = default;
    explicit BatchNormState(int channels, T momentum_ = T(0.1), T eps_ = T(1e-5))
        : running_mean(channels, T(0)), running_var(channels, T(1)), momentum(momentum_),
          eps(eps_) {}
    [[nodiscard]] int channels() const { return static_cast<int>(running_mean.size()); }
};

// Per-channel normalization. In training mode uses batch statistics (biased
// variance) and updates running stats: r <- (1-m) r + m * batch_stat, with the
// unbiased variance fed to the running estimate.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, BatchNormState<T>& state, const std::type_identity_t<Tensor<T>>* scale,
                     const std::type_identity_t<Tensor<T>>* shift, bool training) {
    const Shape s = x.shape();
    if (state.channels() != s.c) {
        throw ShapeError("batch_norm: state has " + std::to_string(state.channels()) +
                         " channels, input " + s.str());
    }
    if (!(state.eps > T(0))) throw std::invalid_argument("batch_norm: eps must be positive");
    if ((scale == nullptr) != (shift == nullptr)) {
        throw std::invalid_argument("batch_norm: affine needs both scale and shift");
    }
    const std::size_t plane = s.plane();
    const std::size_t count = static_cast<std::size_t>(s.n) * plane;
    std::vector<T> mean(s.c), invstd(s.c);
    const T* xd = x.data().data();
    for (int c = 0; c < s.c; ++c) {
        if (training) {
            double sum = 0.0;
            for (int b = 0; b < s.n; ++b) {
                const T* p = xd + (static_cast<std::size_t>(b) * s.c + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) sum += p[i];
            }
            const double mu = sum / static_cast<double>(count);
            double sq = 0.0;
            for (int b = 0; b < s.n; ++b) {
                const T* p = xd + (static_cast<std::size_t>(b) * s.c + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = p[i] - mu;
                    sq += d * d;
                }
            }
            const double var = sq / static_cast<double>(count);
            mean[c] = static_cast<T>(mu);
            invstd[c] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(state.eps)));
            const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
            state.running_mean[c] = static_cast<T>((1.0 - state.momentum) * state.running_mean[c] +
                                                   state.momentum * mu);
            state.running_var[c] = static_cast<T>((1.0 - state.momentum) * state.running_var[c] +
                                                  state.momentum * unbiased);
        } else {
            mean[c] = state.running_mean[c];
            invstd[c] = T(1) / std::sqrt(state.running_var[c] + state.eps);
        }
    }
    std::vector<T> out(x.numel());
    const T* gd = scale != nullptr ? scale->data().data() : nullptr;
    const T* bd = shift != nullptr ? shift->data().data() : nullptr;
    for (int b = 0; b < s.n; ++b) {
        for (int c = 0; c < s.c; ++c) {
            const std::size_t off = (static_cast<std::size_t>(b) * s.c + c) * plane;
            const T a = gd != nullptr ? gd[c] * invstd[c] : invstd[c];
            const T m = mean[c];
            const T sh = bd != nullptr ? bd[c] : T(0);
            for (std::size_t i = 0; i < plane; ++i) out[off + i] = (xd[off + i] - m) * a + sh;
        }
    }
    Tensor<T> scale_t = scale != nullptr ? *scale : Tensor<T>();
    Tensor<T> shift_t = shift != nullptr ? *shift : Tensor<T>();
    return detail::make_result<T>(
        s, std::move(out), {&x, scale, shift},
        [x, scale_t, shift_t, mean, invstd, training, s, plane, count](TensorNode<T>& self) {
            const T* gout = self.grad.data();
            const T* xd = x.data().data();
            T* dx = detail::grad_target(x);
            T* dg = detail::grad_target(scale_t);
            T* dbeta = detail::grad_target(shift_t);
            const T* gd = scale_t.defined() ? scale_t.data().data() : nullptr;
            for (int c = 0; c < s.c; ++c) {
                double sum_g = 0.0;
                double sum_gx = 0.0;
                for (int b = 0; b < s.n; ++b) {
                    const std::size_t off = (static_cast<std::size_t>(b) * s.c + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        const double xh = (xd[off + i] - mean[c]) * invstd[c];
                        sum_g += gout[off + i];
                        sum_gx += gout[off + i] * xh;
                    }
                }
                if (dg != nullptr) dg[c] += static_cast<T>(sum_gx);
                if (dbeta != nullptr) dbeta[c] += static_cast<T>(sum_g);
                if (dx == nullptr) continue;
                const T gamma = gd != nullptr ? gd[c] : T(1);
                for (int b = 0; b < s.n; ++b) {
                    const std::size_t off = (static_cast<std::size_t>(b) * s.c + c) * plane;
                    if (training) {
                        const double k = gamma * invstd[c] / static_cast<double>(count);
                        for (std::size_t i = 0; i < plane; ++i) {
                            const double xh = (xd[off + i] - mean[c]) * invstd[c];
                            dx[off + i] += static_cast<T>(
                                k * (static_cast<double>(count) * gout[off + i] - sum_g - xh * sum_gx));
                        }
                    } else {
                        const T k = gamma * invstd[c];
                        for (std::size_t i = 0; i < plane; ++i) dx[off + i] += k * gout[off + i];
                    }
                }
            }
        });
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
    if (xs.empty()) throw ShapeError("concat_channels: empty input list");
    if (xs.size() == 1) return xs.front();
    const Shape first = xs.front().shape();
    int total = 0;
    for (const auto& t : xs) {
        const Shape s = t.shape();
        if (s.n != first.n || s.h != first.h || s.w != first.w) {
            throw ShapeError("concat_channels: spatial/batch mismatch " + s.str() + " vs " +
                             first.str());
        }
        total += s.c;
    }
    const Shape os{first.n, total, first.h, first.w};
    const std::size_t plane = first.plane();
    std::vector<T> out(os.numel());
    for (int b = 0; b < first.n; ++b) {
        int c0 = 0;
        for (const auto& t : xs) {
            const int c = t.shape().c;
            const T* src = t.data().data() + static_cast<std::size_t>(b) * c * plane;
            std::copy(src, src + c * plane,
                      out.begin() + (static_cast<std::size_t>(b) * total + c0) * plane);
            c0 += c;
        }
    }
    std::vector<const Tensor<T>*> inputs;
    for (const auto& t : xs) inputs.push_back(&t);
    return detail::make_result<T>(os, std::move(out), inputs, [xs, total, plane](TensorNode<T>& self) {
        const int n = self.shape.n;
        int c0 = 0;
        for (const auto& t : xs) {
            const int c = t.shape().c;
            T* dx = detail::grad_target(t);
            if (dx != nullptr) {
                for (int b = 0; b < n; ++b) {
                    const T* src = self.grad.data() + (static_cast<std::size_t>(b) * total + c0) * plane;
                    T* dst = dx + static_cast<std::size_t>(b) * c * plane;
                    for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
                }
            }
            c0 += c;
        }
    });
}

// Channels [begin, end) of x.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int begin, int end) {
    const Shape s = x.shape();
    if (begin < 0 || end > s.c || begin >= end) throw ShapeError("slice_channels: bad range");
    const int c = end - begin;
    const Shape os{s.n, c, s.h, s.w};
    const std::size_t plane = s.plane();
    std::vector<T> out(os.numel());
    for (int b = 0; b < s.n; ++b) {
        const T* src = x.data().data() + (static_cast<std::size_t>(b) * s.c + begin) * plane;
        std::copy(src, src + c * plane, out.begin() + static_cast<std::size_t>(b) * c * plane);
    }
    return detail::make_result<T>(os, std::move(out), {&x}, [x, begin, c, plane](TensorNode<T>& self) {
        T* dx = detail::grad_target(x);
        if (dx == nullptr) return;
        const Shape s = x.shape();
        for (int b = 0; b < s.n; ++b) {
            const T* src = self.grad.data() + static_cast<std::size_t>(b) * c * plane;
            T* dst = dx + (static_cast<std::size_t>(b) * s.c + begin) * plane;
            for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
        }
    });
}

namespace detail {

// out[n, c, h*S+i, w*S+j] = in[n, c*S*S + i*S + j, h, w]
template <typename T>
void shuffle_copy(const T* src, T* dst, const Shape& in, int S, bool forward_dir, bool accumulate) {
    const int oc = in.c / (S * S);
    for (int b = 0; b < in.n; ++b) {
        for (int c = 0; c < oc; ++c) {
            for (int i = 0; i < S; ++i) {
                for (int j = 0; j < S; ++j) {
                    const int ic = c * S * S + i * S + j;
                    for (int h = 0; h < in.h; ++h) {
                        for (int w = 0; w < in.w; ++w) {
                            const std::size_t a =
                                ((static_cast<std::size_t>(b) * in.c + ic) * in.h + h) * in.w + w;
                            const std::size_t o =
                                ((static_cast<std::size_t>(b) * oc + c) * in.h * S + h * S + i) *
                                    in.w * S +
                                w * S + j;
                            const std::size_t from = forward_dir ? a : o;
                            const std::size_t to = forward_dir ? o : a;
                            if (accumulate) {
                                dst[to] += src[from];
                            } else {
                                dst[to] = src[from];
                            }
                        }
                    }
                }
            }
        }
    }
}

}  // namespace detail

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int S) {
    const Shape s = x.shape();
    if (S < 1 || s.c % (S * S) != 0) {
        throw ShapeError("pixel_shuffle: channels " + std::to_string(s.c) +
                         " not divisible by S^2 for S=" + std::to_string(S));
    }
    if (S == 1) return x;
    const Shape os{s.n, s.c / (S * S), s.h * S, s.w * S};
    std::vector<T> out(os.numel());
    detail::shuffle_copy(x.data().data(), out.data(), s, S, true, false);
    return detail::make_result<T>(os, std::move(out), {&x}, [x, S](TensorNode<T>& self) {
        T* dx = detail::grad_target(x);
        if (dx != nullptr) detail::shuffle_copy(self.grad.data(), dx, x.shape(), S, false, true);
    });
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int S) {
    const Shape s = x.shape();
    if (S < 1 || s.h % S != 0 || s.w % S != 0) {
        throw ShapeError("pixel_unshuffle: spatial size not divisible by S");
    }
    if (S == 1) return x;
    const Shape is{s.n, s.c * S * S, s.h / S, s.w / S};
    std::vector<T> out(is.numel());
    detail::shuffle_copy(x.data().data(), out.data(), is, S, false, false);
    return detail::make_result<T>(is, std::move(out), {&x}, [x, S, is](TensorNode<T>& self) {
        T* dx = detail::grad_target(x);
        if (dx != nullptr) detail::shuffle_copy(self.grad.data(), dx, is, S, true, true);
    });
}

enum class ResizeDirection { Up, Down };

namespace detail {

inline double cubic_kernel(double t, double a = -0.5) {
    t = std::abs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

// Per-output-sample taps of a 1-D bicubic resampler (half-pixel centers,
// edge replication, antialiased kernel when shrinking).
struct ResampleTable {
    int in_size = 0;
    int out_size = 0;
    int taps = 0;
    std::vector<int> index;      // out_size * taps
    std::vector<double> weight;  // out_size * taps

    ResampleTable(int in, int out, double scale) : in_size(in), out_size(out) {
        const double support = scale >= 1.0 ? 2.0 : 2.0 / scale;
        const double kscale = scale >= 1.0 ? 1.0 : scale;
        taps = static_cast<int>(std::ceil(2.0 * support)) + 1;
        index.assign(static_cast<std::size_t>(out) * taps, 0);
        weight.assign(static_cast<std::size_t>(out) * taps, 0.0);
        for (int o = 0; o < out; ++o) {
            const double center = (o + 0.5) / scale - 0.5;
            const int first = static_cast<int>(std::floor(center - support)) + 1;
            double total = 0.0;
            for (int t = 0; t < taps; ++t) {
                const int j = first + t;
                const double wv = cubic_kernel((center - j) * kscale);
                index[o * taps + t] = std::clamp(j, 0, in - 1);
                weight[o * taps + t] = wv;
                total += wv;
            }
            for (int t = 0; t < taps; ++t) weight[o * taps + t] /= total;
        }
    }
};

// Resample along rows (axis_w=true resamples the last axis).
template <typename T>
void resample_axis(const T* src, T* dst, int planes, int h, int w, const ResampleTable& tab,
                   bool axis_w, bool transpose) {
    // forward: dst has the resized axis; transpose: src has the resized axis and
    // gradients are scattered back into dst (accumulating).
    const int oh = axis_w ? h : tab.out_size;
    const int ow = axis_w ? tab.out_size : w;
    for (int p = 0; p < planes; ++p) {
        const std::size_t in_off = static_cast<std::size_t>(p) * h * w;
        const std::size_t out_off = static_cast<std::size_t>(p) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                const int o = axis_w ? x : y;
                const std::size_t oidx = out_off + static_cast<std::size_t>(y) * ow + x;
                if (!transpose) {
                    double acc = 0.0;
                    for (int t = 0; t < tab.taps; ++t) {
                        const int j = tab.index[o * tab.taps + t];
                        const std::size_t iidx =
                            in_off + (axis_w ? static_cast<std::size_t>(y) * w + j
                                             : static_cast<std::size_t>(j) * w + x);
                        acc += tab.weight[o * tab.taps + t] * src[iidx];
                    }
                    dst[oidx] = static_cast<T>(acc);
                } else {
                    const T g = src[oidx];
                    for (int t = 0; t < tab.taps; ++t) {
                        const int j = tab.index[o * tab.taps + t];
                        const std::size_t iidx =
                            in_off + (axis_w ? static_cast<std::size_t>(y) * w + j
                                             : static_cast<std::size_t>(j) * w + x);
                        dst[iidx] += static_cast<T>(tab.weight[o * tab.taps + t] * g);
                    }
                }
            }
        }
    }
}

}  // namespace detail

// Catmull-Rom (a = -0.5) bicubic resize by an integer factor S in {2,3,4},
// half-pixel (align-corners=false) convention. Shrinking widens the kernel by
// S so that degradation is antialiased.
template <typename T>
Tensor<T> bicubic_resize(const Tensor<T>& x, int S, ResizeDirection dir) {
    if (S < 2 || S > 4) throw std::invalid_argument("bicubic_resize: unsupported scale " + std::to_string(S));
    const Shape s = x.shape();
    Shape os = s;
    double scale = 0.0;
    if (dir == ResizeDirection::Up) {
        os.h = s.h * S;
        os.w = s.w * S;
        scale = S;
    } else {
        if (s.h % S != 0 || s.w % S != 0) {
            throw ShapeError("bicubic_resize: " + s.str() + " not divisible by " + std::to_string(S));
        }
        os.h = s.h / S;
        os.w = s.w / S;
        scale = 1.0 / S;
    }
    const detail::ResampleTable tw(s.w, os.w, scale);
    const detail::ResampleTable th(s.h, os.h, scale);
    const int planes = s.n * s.c;
    std::vector<T> mid(static_cast<std::size_t>(planes) * s.h * os.w);
    detail::resample_axis(x.data().data(), mid.data(), planes, s.h, s.w, tw, true, false);
    std::vector<T> out(os.numel());
    detail::resample_axis(mid.data(), out.data(), planes, s.h, os.w, th, false, false);
    return detail::make_result<T>(os, std::move(out), {&x}, [x, tw, th, planes, s, os](TensorNode<T>& self) {
        T* dx = detail::grad_target(x);
        if (dx == nullptr) return;
        std::vector<T> gmid(static_cast<std::size_t>(planes) * s.h * os.w, T(0));
        detail::resample_axis(self.grad.data(), gmid.data(), planes, s.h, os.w, th, false, true);
        detail::resample_axis(gmid.data(), dx, planes, s.h, s.w, tw, true, true);
    });
}

// Softmax over all entries of v, max-subtracted.
template <typename T>
Tensor<T> softmax(const Tensor<T>& v) {
    if (!v.defined() || v.numel() == 0) throw std::invalid_argument("softmax: empty vector");
    const T* d = v.data().data();
    const T mx = *std::max_element(d, d + v.numel());
    std::vector<T> out(v.numel());
    T total = T(0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::exp(d[i] - mx);
        total += out[i];
    }
    for (auto& o : out) o /= total;
    return detail::make_result<T>(v.shape(), std::move(out), {&v}, [v](TensorNode<T>& self) {
        T* dv = detail::grad_target(v);
        if (dv == nullptr) return;
        T dot = T(0);
        for (std::size_t i = 0; i < self.data.size(); ++i) dot += self.grad[i] * self.data[i];
        for (std::size_t i = 0; i < self.data.size(); ++i) {
            dv[i] += self.data[i] * (self.grad[i] - dot);
        }
    });
}

// Plain (non-differentiable) softmax of a value list, used by decoders.
template <typename T>
std::vector<double> softmax_values(std::span<const T> v) {
    if (v.empty()) throw std::invalid_argument("softmax: empty vector");
    const double mx = static_cast<double>(*std::max_element(v.begin(), v.end()));
    std::vector<double> out(v.size());
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(static_cast<double>(v[i]) - mx);
        total += out[i];
    }
    for (auto& o : out) o /= total;
    return out;
}

// sum_k weights[index[k]] * xs[k]; weights is a vector tensor.
template <typename T>
Tensor<T> weighted_sum(const std::vector<Tensor<T>>& xs, const Tensor<T>& weights,
                       const std::vector<int>& index) {
    if (xs.empty() || xs.size() != index.size()) {
        throw ShapeError("weighted_sum: inputs and weight indices differ in length");
    }
    const Shape s = xs.front().shape();
    for (const auto& t : xs) {
        if (t.shape() != s) throw ShapeError("weighted_sum: shape mismatch " + t.shape().str() + " vs " + s.str());
    }
    for (int k : index) {
        if (k < 0 || static_cast<std::size_t>(k) >= weights.numel()) {
            throw ShapeError("weighted_sum: weight index out of range");
        }
    }
    std::vector<T> out(s.numel(), T(0));
    const T* wd = weights.data().data();
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const T wk = wd[index[k]];
        const T* xd = xs[k].data().data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += wk * xd[i];
    }
    std::vector<const Tensor<T>*> inputs{&weights};
    for (const auto& t : xs) inputs.push_back(&t);
    return detail::make_result<T>(s, std::move(out), inputs, [xs, weights, index](TensorNode<T>& self) {
        T* dw = detail::grad_target(weights);
        const T* wd = weights.data().data();
        for (std::size_t k = 0; k < xs.size(); ++k) {
            const T* xd = xs[k].data().data();
            if (dw != nullptr) {
                T acc = T(0);
                for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * xd[i];
                dw[index[k]] += acc;
            }
            T* dx = detail::grad_target(xs[k]);
            if (dx != nullptr) {
                const T wk = wd[index[k]];
                for (std::size_t i = 0; i < self.grad.size(); ++i) dx[i] += wk * self.grad[i];
            }
        }
    });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw ShapeError("add: " + a.shape().str() + " vs " + b.shape().str());
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return detail::make_result<T>(a.shape(), std::move(out), {&a, &b}, [a, b](TensorNode<T>& self) {
        for (const Tensor<T>* t : {&a, &b}) {
            T* d = detail::grad_target(*t);
            if (d == nullptr) continue;
            for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw ShapeError("sub: " + a.shape().str() + " vs " + b.shape().str());
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return detail::make_result<T>(a.shape(), std::move(out), {&a, &b}, [a, b](TensorNode<T>& self) {
        T* da = detail::grad_target(a);
        T* db = detail::grad_target(b);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (da != nullptr) da[i] += self.grad[i];
            if (db != nullptr) db[i] -= self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * x.data()[i];
    return detail::make_result<T>(x.shape(), std::move(out), {&x}, [x, factor](TensorNode<T>& self) {
        T* d = detail::grad_target(x);
        if (d == nullptr) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += factor * self.grad[i];
    });
}

template <typename T>
Tensor<T> log10(const Tensor<T>& x) {
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log10(x.data()[i]);
    return detail::make_result<T>(x.shape(), std::move(out), {&x}, [x](TensorNode<T>& self) {
        T* d = detail::grad_target(x);
        if (d == nullptr) return;
        const T inv_ln10 = T(1) / std::log(T(10));
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            d[i] += self.grad[i] * inv_ln10 / x.data()[i];
        }
    });
}

// max(x, floor) elementwise; the gradient passes only where x > floor.
template <typename T>
Tensor<T> clamp_min(const Tensor<T>& x, T floor) {
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(x.data()[i], floor);
    return detail::make_result<T>(x.shape(), std::move(out), {&x}, [x, floor](TensorNode<T>& self) {
        T* d = detail::grad_target(x);
        if (d == nullptr) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (x.data()[i] > floor) d[i] += self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    double acc = 0.0;
    for (T v : x.data()) acc += v;
    return detail::make_result<T>(Shape{}, {static_cast<T>(acc)}, {&x}, [x](TensorNode<T>& self) {
        T* d = detail::grad_target(x);
        if (d == nullptr) return;
        for (std::size_t i = 0; i < x.numel(); ++i) d[i] += self.grad[0];
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

// Mean of squared differences.
template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw ShapeError("mse: " + a.shape().str() + " vs " + b.shape().str());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(a.data()[i]) - b.data()[i];
        acc += d * d;
    }
    const double n = static_cast<double>(a.numel());
    return detail::make_result<T>(Shape{}, {static_cast<T>(acc / n)}, {&a, &b}, [a, b, n](TensorNode<T>& self) {
        T* da = detail::grad_target(a);
        T* db = detail::grad_target(b);
        const T k = static_cast<T>(2.0 / n) * self.grad[0];
        for (std::size_t i = 0; i < a.numel(); ++i) {
            const T d = a.data()[i] - b.data()[i];
            if (da != nullptr) da[i] += k * d;
            if (db != nullptr) db[i] -= k * d;
        }
    });
}

// Fan-in scaled normal init, std = sqrt(2 / fan_in).
template <typename T>
Tensor<T> kaiming_normal(Shape s, std::mt19937_64& rng) {
    const double fan_in = static_cast<double>(s.c) * s.h * s.w;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    std::vector<T> v(s.numel());
    for (auto& x : v) x = static_cast<T>(dist(rng));
    return Tensor<T>::from(s, std::move(v), true);
}

}  // namespace hinas
