#pragma once
// Inner search space: candidate operators, mixed edges over softmax(alpha),
// and the N-node supercell whose output concatenates its nodes.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hinas/ops.hpp"

namespace hinas {

// Canonical ordinal order is part of the genotype file format.
enum class OpKind : int { Conv3 = 0, Sep3 = 1, Sep5 = 2, Dil3 = 3, Dil5 = 4, Skip = 5, None = 6 };

inline constexpr int kNumOps = 7;
inline constexpr std::array<OpKind, kNumOps> kAllOps{OpKind::Conv3, OpKind::Sep3, OpKind::Sep5,
                                                     OpKind::Dil3,  OpKind::Dil5, OpKind::Skip,
                                                     OpKind::None};

inline std::string_view op_name(OpKind k) {
    switch (k) {
        case OpKind::Conv3: return "conv3";
        case OpKind::Sep3: return "sep3";
        case OpKind::Sep5: return "sep5";
        case OpKind::Dil3: return "dil3";
        case OpKind::Dil5: return "dil5";
        case OpKind::Skip: return "skip";
        case OpKind::None: return "none";
    }
    return "?";
}

inline OpKind op_from_ordinal(int ordinal) {
    if (ordinal < 0 || ordinal >= kNumOps) {
        throw std::out_of_range("OpKind ordinal " + std::to_string(ordinal) + " out of range");
    }
    return static_cast<OpKind>(ordinal);
}

// Parameter init seeded by (seed, name) so identical names get identical
// values regardless of construction order.
inline std::uint64_t name_seed(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 1469598103934665603ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
    for (char ch : name) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ULL;
    }
    return h;
}

template <typename T>
Tensor<T> init_kernel(Shape s, std::uint64_t seed, const std::string& name) {
    std::mt19937_64 rng(name_seed(seed, name));
    return kaiming_normal<T>(s, rng);
}

// Everything a network exposes to optimizers and checkpoints.
template <typename T>
struct ParamRegistry {
    std::vector<Parameter<T>> params;
    std::vector<std::pair<std::string, BatchNormState<T>*>> bn_states;

    void add(std::string name, const Tensor<T>& t) { params.push_back({std::move(name), t}); }
};

inline constexpr double kTailInitGain = 0.1;

// A 3x3 / 1x1 convolution with bias; used for stem, tail and projections.
template <typename T>
struct ConvLayer {
    Tensor<T> weight;
    Tensor<T> bias;
    int dilation = 1;

    ConvLayer() = default;
    ConvLayer(int cin, int cout, int k, std::uint64_t seed, const std::string& name)
        : weight(init_kernel<T>(Shape{cout, cin, k, k}, seed, name + ".weight")),
          bias(Tensor<T>::zeros(Shape{1, cout, 1, 1}, true)) {}

    Tensor<T> operator()(const Tensor<T>& x) const { return conv2d_same(x, weight, &bias, dilation); }
    void collect(const std::string& prefix, ParamRegistry<T>& reg) const {
        reg.add(prefix + ".weight", weight);
        reg.add(prefix + ".bias", bias);
    }
    // Scales the initial kernel; the final tail conv starts small so an
    // untrained network stays close to its skip path.
    ConvLayer& with_init_gain(T gain) {
        for (auto& v : weight.values()) v *= gain;
        return *this;
    }
    [[nodiscard]] int in_channels() const { return weight.shape().c; }
    [[nodiscard]] int out_channels() const { return weight.shape().n; }
};

// One candidate operator of a mixed edge. Convolutional kinds are
// LeakyReLU -> conv -> BN with same padding (dilation 2 for Dil kinds).
template <typename T>
class CandidateOp {
public:
    using Fn = std::function<Tensor<T>(const Tensor<T>&)>;

    CandidateOp(OpKind kind, int channels, T slope, bool bn_affine, std::uint64_t seed,
                const std::string& name)
        : kind_(kind), channels_(channels), slope_(slope) {
        if (channels < 1) throw std::invalid_argument("candidate op needs at least one channel");
        const int C = channels;
        switch (kind) {
            case OpKind::Conv3:
                weights_.push_back(init_kernel<T>(Shape{C, C, 3, 3}, seed, name + ".weight"));
                break;
            case OpKind::Sep3:
            case OpKind::Sep5: {
                const int k = kind == OpKind::Sep3 ? 3 : 5;
                weights_.push_back(init_kernel<T>(Shape{C, 1, k, k}, seed, name + ".depthwise"));
                weights_.push_back(init_kernel<T>(Shape{C, C, 1, 1}, seed, name + ".pointwise"));
                break;
            }
            case OpKind::Dil3:
            case OpKind::Dil5: {
                const int k = kind == OpKind::Dil3 ? 3 : 5;
                weights_.push_back(init_kernel<T>(Shape{C, C, k, k}, seed, name + ".weight"));
                break;
            }
            case OpKind::Skip:
            case OpKind::None:
                break;
        }
        if (has_bn()) {
            bn_ = std::make_unique<BatchNormState<T>>(C);
            if (bn_affine) {
                bn_scale_ = Tensor<T>::full(Shape{1, C, 1, 1}, T(1), true);
                bn_shift_ = Tensor<T>::zeros(Shape{1, C, 1, 1}, true);
            }
        }
    }

    [[nodiscard]] OpKind kind() const { return kind_; }
    [[nodiscard]] int channels() const { return channels_; }
    [[nodiscard]] bool has_bn() const { return kind_ != OpKind::Skip && kind_ != OpKind::None; }
    [[nodiscard]] bool is_zero() const { return kind_ == OpKind::None && !replacement; }

    Tensor<T> operator()(const Tensor<T>& x, bool training) {
        if (x.shape().c != channels_) {
            throw ShapeError("candidate op " + std::string(op_name(kind_)) + " expects " +
                             std::to_string(channels_) + " channels, got " + x.shape().str());
        }
        if (replacement) return replacement(x);
        switch (kind_) {
            case OpKind::Skip: return x;
            case OpKind::None: return scale(x, T(0));
            default: break;
        }
        Tensor<T> a = leaky_relu(x, slope_);
        Tensor<T> y;
        switch (kind_) {
            case OpKind::Conv3: y = conv2d_same(a, weights_[0], nullptr, 1); break;
            case OpKind::Sep3: y = separable_conv(a, weights_[0], weights_[1], 3); break;
            case OpKind::Sep5: y = separable_conv(a, weights_[0], weights_[1], 5); break;
            case OpKind::Dil3: y = conv2d_same(a, weights_[0], nullptr, 2); break;
            case OpKind::Dil5: y = conv2d_same(a, weights_[0], nullptr, 2); break;
            default: break;
        }
        const Tensor<T>* sc = bn_scale_.defined() ? &bn_scale_ : nullptr;
        const Tensor<T>* sh = bn_shift_.defined() ? &bn_shift_ : nullptr;
        return batch_norm(y, *bn_, sc, sh, training);
    }

    void collect(const std::string& prefix, ParamRegistry<T>& reg) const {
        switch (kind_) {
            case OpKind::Sep3:
            case OpKind::Sep5:
                reg.add(prefix + ".depthwise", weights_[0]);
                reg.add(prefix + ".pointwise", weights_[1]);
                break;
            case OpKind::Conv3:
            case OpKind::Dil3:
            case OpKind::Dil5:
                reg.add(prefix + ".weight", weights_[0]);
                break;
            default:
                break;
        }
        if (bn_scale_.defined()) {
            reg.add(prefix + ".bn.scale", bn_scale_);
            reg.add(prefix + ".bn.shift", bn_shift_);
        }
        if (bn_) reg.bn_states.emplace_back(prefix + ".bn", bn_.get());
    }

    // Overrides the operator's computation; used to build test fixtures.
    Fn replacement;

private:
    OpKind kind_;
    int channels_;
    T slope_;
    std::vector<Tensor<T>> weights_;
    std::unique_ptr<BatchNormState<T>> bn_;
    Tensor<T> bn_scale_;
    Tensor<T> bn_shift_;
};

template <typename T>
CandidateOp<T> make_candidate_op(OpKind kind, int channels, T slope = T(0.2),
                                 bool bn_affine = false, std::uint64_t seed = 0,
                                 const std::string& name = "op") {
    return CandidateOp<T>(kind, channels, slope, bn_affine, seed, name);
}

// Edges of an N-node cell in canonical order: node i receives from inputs
// 0..(2+i)-1, where 0 and 1 are the two cell inputs.
inline int edge_count(int nodes) { return 2 * nodes + nodes * (nodes - 1) / 2; }
inline int edge_index(int node, int input) {
    // edges before node i: sum_{m<i} (2+m) = 2i + i(i-1)/2
    return 2 * node + node * (node - 1) / 2 + input;
}

// The per-edge alpha vectors of one cell architecture (one set per layer with
// layer-wise sharing, a single global set without).
template <typename T>
struct AlphaSet {
    std::vector<Tensor<T>> edges;

    AlphaSet() = default;
    explicit AlphaSet(int nodes) {
        for (int e = 0; e < edge_count(nodes); ++e) {
            edges.push_back(Tensor<T>::zeros(Shape{1, kNumOps, 1, 1}, true));
        }
    }
    void reset() {
        for (auto& a : edges) std::fill(a.values().begin(), a.values().end(), T(0));
    }
    [[nodiscard]] std::vector<std::vector<double>> snapshot() const {
        std::vector<std::vector<double>> out;
        for (const auto& a : edges) out.emplace_back(a.values().begin(), a.values().end());
        return out;
    }
};

// sum_k softmax(alpha)_k * o^k(x) over one edge.
template <typename T>
struct EdgeMixture {
    Tensor<T> alpha;
    std::vector<CandidateOp<T>> ops;
    int channels = 0;

    EdgeMixture(Tensor<T> alpha_, int C, T slope, bool bn_affine, std::uint64_t seed,
                const std::string& name)
        : alpha(std::move(alpha_)), channels(C) {
        if (alpha.numel() != static_cast<std::size_t>(kNumOps)) {
            throw ShapeError("edge alpha must have " + std::to_string(kNumOps) + " entries");
        }
        for (OpKind k : kAllOps) {
            ops.emplace_back(k, C, slope, bn_affine, seed, name + "." + std::string(op_name(k)));
        }
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        if (x.shape().c != channels) {
            throw ShapeError("mixed edge expects " + std::to_string(channels) +
                             " channels, got " + x.shape().str());
        }
        Tensor<T> probs = softmax(alpha);
        std::vector<Tensor<T>> outs;
        std::vector<int> idx;
        for (int k = 0; k < kNumOps; ++k) {
            if (ops[k].is_zero()) continue;  // contributes exactly zero
            outs.push_back(ops[k](x, training));
            idx.push_back(k);
        }
        return weighted_sum(outs, probs, idx);
    }

    void collect(const std::string& prefix, ParamRegistry<T>& reg) const {
        for (int k = 0; k < kNumOps; ++k) {
            ops[k].collect(prefix + "." + std::string(op_name(ops[k].kind())), reg);
        }
    }
};

// Relaxed cell: node i = sum over its inputs j of edge(i, j)(state_j); the
// cell output concatenates all N nodes (N * node_width channels).
template <typename T>
class SuperCell {
public:
    SuperCell(int nodes, int level, int node_width, int layer_index, const AlphaSet<T>& alphas,
              T slope, bool bn_affine, std::uint64_t seed, const std::string& name)
        : nodes_(nodes), level_(level), node_width_(node_width), layer_(layer_index) {
        if (static_cast<int>(alphas.edges.size()) != edge_count(nodes)) {
            throw ShapeError("alpha set does not match node count");
        }
        for (int i = 0; i < nodes; ++i) {
            for (int j = 0; j < 2 + i; ++j) {
                edges_.emplace_back(alphas.edges[edge_index(i, j)], node_width, slope, bn_affine,
                                    seed,
                                    name + ".node" + std::to_string(i) + ".edge" + std::to_string(j));
            }
        }
    }

    Tensor<T> forward(const Tensor<T>& in1, const Tensor<T>& in2, bool training) {
        if (in1.shape().c != node_width_ || in2.shape().c != node_width_) {
            throw ShapeError("supercell inputs must have " + std::to_string(node_width_) +
                             " channels, got " + in1.shape().str() + " and " + in2.shape().str());
        }
        ++forward_calls;
        std::vector<Tensor<T>> states{in1, in2};
        for (int i = 0; i < nodes_; ++i) {
            Tensor<T> acc;
            for (int j = 0; j < 2 + i; ++j) {
                Tensor<T> y = edges_[edge_index(i, j)].forward(states[j], training);
                acc = acc.defined() ? add(acc, y) : y;
            }
            states.push_back(acc);
        }
        return concat_channels(std::vector<Tensor<T>>(states.begin() + 2, states.end()));
    }

    void collect(const std::string& prefix, ParamRegistry<T>& reg) const {
        for (int i = 0; i < nodes_; ++i) {
            for (int j = 0; j < 2 + i; ++j) {
                edges_[edge_index(i, j)].collect(
                    prefix + ".node" + std::to_string(i) + ".edge" + std::to_string(j), reg);
            }
        }
    }

    [[nodiscard]] int nodes() const { return nodes_; }
    [[nodiscard]] int level() const { return level_; }
    [[nodiscard]] int node_width() const { return node_width_; }
    [[nodiscard]] int output_width() const { return nodes_ * node_width_; }
    [[nodiscard]] int layer_index() const { return layer_; }
    EdgeMixture<T>& edge(int node, int input) { return edges_[edge_index(node, input)]; }

    std::size_t forward_calls = 0;

private:
    int nodes_;
    int level_;
    int node_width_;
    int layer_;
    std::vector<EdgeMixture<T>> edges_;
};

// Sets every alpha to zero, i.e. a uniform 1/7 mixture.
template <typename T>
void init_alpha(std::vector<AlphaSet<T>>& sets) {
    for (auto& s : sets) s.reset();
}

}  // namespace hinas
