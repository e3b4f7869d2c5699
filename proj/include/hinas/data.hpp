#pragma once
// Desk-scale data pipeline: procedural clean images, degradations, the
// W/A/V split, patch sampling with augmentation, and tiled inference.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hinas/ops.hpp"
#include "hinas/task.hpp"

namespace hinas {

enum class SynthKind { Textures, Gradients, Mixed };

inline SynthKind synth_kind_from_string(const std::string& s) {
    if (s == "textures") return SynthKind::Textures;
    if (s == "gradients") return SynthKind::Gradients;
    if (s == "mixed") return SynthKind::Mixed;
    throw std::invalid_argument("unknown synthetic dataset kind '" + s + "'");
}

namespace detail {

// Rescale each image into [0.05, 0.95].
template <typename T>
void normalize_unit(std::vector<double>& v, std::vector<T>& out) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double span = std::max(*hi - *lo, 1e-9);
    out.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(0.05 + 0.9 * (v[i] - *lo) / span);
}

inline void fill_gradient(std::vector<double>& v, int size, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> freq(0.3, 1.5);
    for (int c = 0; c < 3; ++c) {
        const double a = u(rng), b = u(rng), f = freq(rng), ph = u(rng) * std::numbers::pi;
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const double fx = static_cast<double>(x) / size, fy = static_cast<double>(y) / size;
                v[(static_cast<std::size_t>(c) * size + y) * size + x] =
                    a * fx + b * fy + 0.3 * std::cos(2.0 * std::numbers::pi * f * (fx + fy) + ph);
            }
        }
    }
}

// Band-limited noise (random sinusoids) plus oriented stripes.
inline void fill_texture(std::vector<double>& v, int size, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    constexpr int kWaves = 10;
    struct Wave {
        double kx, ky, phase, amp;
        std::array<double, 3> color;
    };
    std::vector<Wave> waves;
    for (int k = 0; k < kWaves; ++k) {
        const double freq = 0.03 + 0.22 * u(rng);  // cycles per pixel
        const double theta = u(rng) * std::numbers::pi;
        waves.push_back({freq * std::cos(theta), freq * std::sin(theta), u(rng) * 2.0 * std::numbers::pi,
                         0.3 + 0.7 * u(rng), {u(rng), u(rng), u(rng)}});
    }
    const double stripe_theta = u(rng) * std::numbers::pi;
    const double stripe_f = 0.05 + 0.1 * u(rng);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double base = 0.0;
            std::array<double, 3> acc{0, 0, 0};
            for (const auto& w : waves) {
                const double s = w.amp * std::sin(2.0 * std::numbers::pi * (w.kx * x + w.ky * y) + w.phase);
                for (int c = 0; c < 3; ++c) acc[c] += s * w.color[c];
            }
            const double t = x * std::cos(stripe_theta) + y * std::sin(stripe_theta);
            base = std::sin(2.0 * std::numbers::pi * stripe_f * t) > 0.0 ? 1.0 : -1.0;
            for (int c = 0; c < 3; ++c) {
                v[(static_cast<std::size_t>(c) * size + y) * size + x] = acc[c] + 1.5 * base;
            }
        }
    }
}

}  // namespace detail

// Deterministic procedural RGB images of shape (1, 3, size, size) in [0, 1].
template <typename T>
std::vector<Tensor<T>> synth_dataset(SynthKind kind, int count, int size, std::uint64_t seed) {
    if (size < 32) throw std::invalid_argument("synth_dataset: size must be >= 32");
    std::mt19937_64 rng(seed);
    std::vector<Tensor<T>> out;
    for (int i = 0; i < count; ++i) {
        std::vector<double> v(static_cast<std::size_t>(3) * size * size, 0.0);
        const bool texture = kind == SynthKind::Textures || (kind == SynthKind::Mixed && i % 2 == 0);
        if (texture) {
            detail::fill_texture(v, size, rng);
        } else {
            detail::fill_gradient(v, size, rng);
        }
        if (kind == SynthKind::Mixed) {
            // Blend in a little of the other family for extra structure.
            std::vector<double> extra(v.size(), 0.0);
            if (texture) {
                detail::fill_gradient(extra, size, rng);
            } else {
                detail::fill_texture(extra, size, rng);
            }
            for (std::size_t k = 0; k < v.size(); ++k) v[k] += 0.35 * extra[k];
        }
        std::vector<T> vals;
        detail::normalize_unit(v, vals);
        out.push_back(Tensor<T>::from(Shape{1, 3, size, size}, std::move(vals)));
    }
    return out;
}

// img + N(0, (sigma_255/255)^2), clipped to [0, 1].
template <typename T>
Tensor<T> add_gaussian_noise(const Tensor<T>& img, double sigma_255, std::uint64_t seed) {
    if (sigma_255 < 0.0) throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
    std::vector<T> out(img.values());
    if (sigma_255 == 0.0) return Tensor<T>::from(img.shape(), std::move(out));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sigma_255 / 255.0);
    for (auto& v : out) v = static_cast<T>(std::clamp(static_cast<double>(v) + n(rng), 0.0, 1.0));
    return Tensor<T>::from(img.shape(), std::move(out));
}

// Bicubic downscale by S (same resampler as bicubic_resize), clipped to [0, 1].
template <typename T>
Tensor<T> bicubic_degrade(const Tensor<T>& img, int S) {
    if (img.shape().h % S != 0 || img.shape().w % S != 0) {
        throw ShapeError("bicubic_degrade: " + img.shape().str() + " not divisible by " + std::to_string(S));
    }
    NoGradGuard ng;
    Tensor<T> d = bicubic_resize(img, S, ResizeDirection::Down);
    for (auto& v : d.values()) v = std::clamp(v, T(0), T(1));
    return d;
}

template <typename T>
struct ImagePair {
    Tensor<T> clean;     // (1, 3, H, W)
    Tensor<T> degraded;  // (1, 3, H, W) or (1, 3, H/S, W/S)
    std::string id;
};

// Clean images cropped to multiples of the scale, then degraded per task.
// Noise is drawn once per image (fixed dataset) from seed + index.
template <typename T>
std::vector<ImagePair<T>> make_pairs(const std::vector<Tensor<T>>& clean, const RestorationTask& task,
                                     double sigma_255, std::uint64_t seed) {
    std::vector<ImagePair<T>> out;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        ImagePair<T> p;
        p.id = "img" + std::to_string(i);
        if (task.is_sr()) {
            const Shape s = clean[i].shape();
            const int h = s.h - s.h % task.scale;
            const int w = s.w - s.w % task.scale;
            Tensor<T> c = Tensor<T>::zeros(Shape{1, 3, h, w});
            for (int ch = 0; ch < 3; ++ch) {
                for (int y = 0; y < h; ++y) {
                    for (int x = 0; x < w; ++x) c.at(0, ch, y, x) = clean[i].at(0, ch, y, x);
                }
            }
            p.clean = c;
            p.degraded = bicubic_degrade(c, task.scale);
        } else {
            p.clean = clean[i];
            p.degraded = add_gaussian_noise(clean[i], sigma_255, seed + 7919 * (i + 1));
        }
        out.push_back(std::move(p));
    }
    return out;
}

struct SplitSpec {
    double frac_val = 0.02;
    std::uint64_t seed = 0;
};

struct WavSplit {
    std::vector<std::string> train_w;
    std::vector<std::string> train_a;
    std::vector<std::string> val;
};

// V gets round(frac_val * n) (at least one) ids; the rest is halved into W and
// A, W taking the extra one when the remainder is odd.
inline WavSplit split_wav(const std::vector<std::string>& ids, const SplitSpec& spec) {
    if (ids.size() < 3) throw std::invalid_argument("split_wav: need at least 3 ids");
    std::vector<std::size_t> order(ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n = ids.size();
    std::size_t nv = static_cast<std::size_t>(std::llround(spec.frac_val * static_cast<double>(n)));
    nv = std::clamp<std::size_t>(nv, 1, n - 2);
    const std::size_t rest = n - nv;
    const std::size_t nw = (rest + 1) / 2;
    WavSplit out;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string& id = ids[order[i]];
        if (i < nv) {
            out.val.push_back(id);
        } else if (i < nv + nw) {
            out.train_w.push_back(id);
        } else {
            out.train_a.push_back(id);
        }
    }
    return out;
}

template <typename T>
struct PatchSample {
    ImagePair<T> pair;
    int hr_y = 0, hr_x = 0;  // crop corner in the clean image
    int lr_y = 0, lr_x = 0;  // crop corner in the degraded image
    int rotation = 0;        // quarter turns
    bool flip_h = false, flip_v = false;
};

namespace detail {

// Rotates (k quarter turns, counter-clockwise) and flips a square (1,C,P,P) tensor.
template <typename T>
Tensor<T> orient(const Tensor<T>& x, int rot, bool flip_h, bool flip_v) {
    const Shape s = x.shape();
    if (s.h != s.w) throw ShapeError("orient: patch must be square");
    const int P = s.h;
    Tensor<T> out = Tensor<T>::zeros(s);
    for (int b = 0; b < s.n; ++b) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < P; ++y) {
                for (int xx = 0; xx < P; ++xx) {
                    int sy = y, sx = xx;
                    if (flip_v) sy = P - 1 - sy;
                    if (flip_h) sx = P - 1 - sx;
                    for (int r = 0; r < rot % 4; ++r) {
                        const int ny = sx;
                        const int nx = P - 1 - sy;
                        sy = ny;
                        sx = nx;
                    }
                    out.at(b, c, y, xx) = x.at(b, c, sy, sx);
                }
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, int y0, int x0, int h, int w) {
    const Shape s = x.shape();
    Tensor<T> out = Tensor<T>::zeros(Shape{s.n, s.c, h, w});
    for (int b = 0; b < s.n; ++b) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < h; ++y) {
                for (int xx = 0; xx < w; ++xx) out.at(b, c, y, xx) = x.at(b, c, y0 + y, x0 + xx);
            }
        }
    }
    return out;
}

}  // namespace detail

template <typename T>
Tensor<T> rotate90(const Tensor<T>& x, int quarter_turns) {
    return detail::orient(x, ((quarter_turns % 4) + 4) % 4, false, false);
}

// Aligned random crop of a (clean, degraded) pair; `patch` is the clean-side
// size. Augmentation applies one rotation and optional flips to both members.
template <typename T>
PatchSample<T> sample_patch(const ImagePair<T>& pair, int patch, bool augment, std::mt19937_64& rng) {
    const int S = pair.clean.shape().h / pair.degraded.shape().h;
    if (patch % S != 0) throw std::invalid_argument("sample_patch: patch not divisible by scale");
    const int lp = patch / S;
    const Shape ds = pair.degraded.shape();
    if (ds.h < lp || ds.w < lp) throw std::invalid_argument("sample_patch: image smaller than patch");
    std::uniform_int_distribution<int> ry(0, ds.h - lp);
    std::uniform_int_distribution<int> rx(0, ds.w - lp);
    PatchSample<T> out;
    out.lr_y = ry(rng);
    out.lr_x = rx(rng);
    out.hr_y = out.lr_y * S;
    out.hr_x = out.lr_x * S;
    Tensor<T> c = detail::crop(pair.clean, out.hr_y, out.hr_x, patch, patch);
    Tensor<T> d = detail::crop(pair.degraded, out.lr_y, out.lr_x, lp, lp);
    if (augment) {
        std::uniform_int_distribution<int> rot(0, 3);
        std::bernoulli_distribution coin(0.5);
        out.rotation = rot(rng);
        out.flip_h = coin(rng);
        out.flip_v = coin(rng);
        c = detail::orient(c, out.rotation, out.flip_h, out.flip_v);
        d = detail::orient(d, out.rotation, out.flip_h, out.flip_v);
    }
    out.pair = ImagePair<T>{c, d, pair.id};
    return out;
}

template <typename T>
PatchSample<T> sample_patch(const ImagePair<T>& pair, int patch, bool augment, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_patch(pair, patch, augment, rng);
}

// Stacks (1, C, H, W) tensors along the batch axis.
template <typename T>
Tensor<T> stack_batch(const std::vector<Tensor<T>>& xs) {
    if (xs.empty()) throw ShapeError("stack_batch: empty");
    const Shape s = xs.front().shape();
    std::vector<T> v;
    v.reserve(s.numel() * xs.size());
    for (const auto& t : xs) {
        if (t.shape() != s) throw ShapeError("stack_batch: shape mismatch");
        v.insert(v.end(), t.values().begin(), t.values().end());
    }
    return Tensor<T>::from(Shape{static_cast<int>(xs.size()) * s.n, s.c, s.h, s.w}, std::move(v));
}

// Mirror index without edge repetition, folding as often as needed.
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

// Splits the input into adjacent non-overlapping tile x tile blocks (the
// right/bottom remainder reflect-padded to a full tile), runs `net` per tile
// and stitches the outputs. out_scale is the spatial factor of `net`.
template <typename T>
Tensor<T> tiled_inference(const std::function<Tensor<T>(const Tensor<T>&)>& net, const Tensor<T>& img,
                          int tile = 64, int out_scale = 1) {
    const Shape s = img.shape();
    if (tile < 1) throw std::invalid_argument("tiled_inference: tile must be positive");
    NoGradGuard ng;
    Tensor<T> out = Tensor<T>::zeros(Shape{s.n, 3, s.h * out_scale, s.w * out_scale});
    for (int y0 = 0; y0 < s.h; y0 += tile) {
        for (int x0 = 0; x0 < s.w; x0 += tile) {
            Tensor<T> t = Tensor<T>::zeros(Shape{s.n, s.c, tile, tile});
            for (int b = 0; b < s.n; ++b) {
                for (int c = 0; c < s.c; ++c) {
                    for (int y = 0; y < tile; ++y) {
                        const int sy = reflect_index(y0 + y, s.h);
                        for (int x = 0; x < tile; ++x) t.at(b, c, y, x) = img.at(b, c, sy, reflect_index(x0 + x, s.w));
                    }
                }
            }
            Tensor<T> r = net(t);
            if (r.shape().h != tile * out_scale || r.shape().w != tile * out_scale || r.shape().c != 3) {
                throw ShapeError("tiled_inference: net output " + r.shape().str() + " does not match tile");
            }
            const int vh = std::min(tile, s.h - y0) * out_scale;
            const int vw = std::min(tile, s.w - x0) * out_scale;
            for (int b = 0; b < s.n; ++b) {
                for (int c = 0; c < 3; ++c) {
                    for (int y = 0; y < vh; ++y) {
                        for (int x = 0; x < vw; ++x) {
                            out.at(b, c, y0 * out_scale + y, x0 * out_scale + x) = r.at(b, c, y, x);
                        }
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace hinas
