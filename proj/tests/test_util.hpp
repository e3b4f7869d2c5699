#pragma once
// Shared helpers for the unit tests: seeded random tensors and comparisons.

#include <algorithm>
#include <cmath>
#include <random>
#include <type_traits>
#include <vector>

#include "hinas/tensor.hpp"

namespace hinas::testing {

template <typename T>
Tensor<T> random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0, bool requires_grad = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<T> v(s.numel());
    for (auto& x : v) x = static_cast<T>(u(rng));
    return Tensor<T>::from(s, std::move(v), requires_grad);
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
    }
    return m;
}

template <typename T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b) {
    return a.shape() == b.shape() && a.values() == b.values();
}

// Direct-loop cross-correlation used as an oracle for conv2d.
template <typename T>
Tensor<T> naive_conv(const Tensor<T>& x, const Tensor<T>& w, const std::type_identity_t<Tensor<T>>* bias, int pad, int dil, int groups) {
    const Shape xs = x.shape();
    const Shape ws = w.shape();
    const int k = ws.h;
    const int ho = xs.h + 2 * pad - dil * (k - 1);
    const int wo = xs.w + 2 * pad - dil * (k - 1);
    const int cin_g = xs.c / groups;
    const int cout_g = ws.n / groups;
    Tensor<T> out = Tensor<T>::zeros(Shape{xs.n, ws.n, ho, wo});
    for (int b = 0; b < xs.n; ++b) {
        for (int o = 0; o < ws.n; ++o) {
            const int g = o / cout_g;
            for (int y = 0; y < ho; ++y) {
                for (int xx = 0; xx < wo; ++xx) {
                    double acc = bias != nullptr ? static_cast<double>(bias->data()[o]) : 0.0;
                    for (int c = 0; c < cin_g; ++c) {
                        for (int i = 0; i < k; ++i) {
                            for (int j = 0; j < k; ++j) {
                                const int iy = y + i * dil - pad;
                                const int ix = xx + j * dil - pad;
                                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                                acc += static_cast<double>(w.at(o, c, i, j)) * x.at(b, g * cin_g + c, iy, ix);
                            }
                        }
                    }
                    out.at(b, o, y, xx) = static_cast<T>(acc);
                }
            }
        }
    }
    return out;
}

// Direct-window SSIM: the 2-D Gaussian is built and normalized in 2-D and
// every statistic is a plain weighted sum over the window.
inline double reference_ssim(const Tensor<double>& x, const Tensor<double>& y) {
    const int win = 11;
    const double sigma = 1.5, C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    std::vector<double> w(win * win);
    double total = 0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double di = i - 5, dj = j - 5;
            w[i * win + j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
            total += w[i * win + j];
        }
    for (auto& v : w) v /= total;
    const Shape s = x.shape();
    double acc = 0;
    int count = 0;
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int oy = 0; oy + win <= s.h; ++oy)
                for (int ox = 0; ox + win <= s.w; ++ox) {
                    double mx = 0, my = 0;
                    for (int i = 0; i < win; ++i)
                        for (int j = 0; j < win; ++j) {
                            mx += w[i * win + j] * x.at(n, c, oy + i, ox + j);
                            my += w[i * win + j] * y.at(n, c, oy + i, ox + j);
                        }
                    double vx = 0, vy = 0, cxy = 0;
                    for (int i = 0; i < win; ++i)
                        for (int j = 0; j < win; ++j) {
                            const double a = x.at(n, c, oy + i, ox + j) - mx;
                            const double b = y.at(n, c, oy + i, ox + j) - my;
                            vx += w[i * win + j] * a * a;
                            vy += w[i * win + j] * b * b;
                            cxy += w[i * win + j] * a * b;
                        }
                    acc += ((2 * mx * my + C1) * (2 * cxy + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2));
                    ++count;
                }
    return acc / count;
}

}  // namespace hinas::testing
