#pragma once
// The discrete network built from searched (or hand-picked) genotypes and
// widths. Each layer projects the previous two features to its node width and
// runs one discrete cell; the tail consumes the last cell output.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hinas/genotype.hpp"
#include "hinas/task.hpp"

namespace hinas {

// Node widths per layer: from a width path (2^level * W) or given manually,
// e.g. all-40 or 20/40/80 doubling for the width-search ablation.
struct WidthSpec {
    std::vector<int> node_widths;

    static WidthSpec from_path(const WidthPath& p, int W) {
        p.validate();
        WidthSpec s;
        for (int v : p.levels) s.node_widths.push_back(level_factor(v) * W);
        return s;
    }
    static WidthSpec manual(std::vector<int> widths) {
        for (int w : widths) {
            if (w < 1) throw GenotypeError("manual width must be positive");
        }
        return WidthSpec{std::move(widths)};
    }
    static WidthSpec doubling(int first, int L) {
        WidthSpec s;
        for (int l = 0; l < L; ++l) s.node_widths.push_back(first << l);
        return s;
    }
};

template <typename T>
class DiscreteCell {
public:
    DiscreteCell(const CellGenotype& g, int width, T slope, bool bn_affine, std::uint64_t seed,
                 const std::string& name)
        : genotype_(g), width_(width) {
        g.validate();
        for (int i = 0; i < g.N; ++i) {
            for (int p = 0; p < 2; ++p) {
                ops_.emplace_back(g.picks[i][p].op, width, slope, bn_affine, seed,
                                  name + ".node" + std::to_string(i) + ".pick" + std::to_string(p) + "." +
                                      std::string(op_name(g.picks[i][p].op)));
            }
        }
    }

    Tensor<T> forward(const Tensor<T>& in1, const Tensor<T>& in2, bool training) {
        std::vector<Tensor<T>> states{in1, in2};
        for (int i = 0; i < genotype_.N; ++i) {
            Tensor<T> a = ops_[2 * i](states[genotype_.picks[i][0].input], training);
            Tensor<T> b = ops_[2 * i + 1](states[genotype_.picks[i][1].input], training);
            states.push_back(add(a, b));
        }
        return concat_channels(std::vector<Tensor<T>>(states.begin() + 2, states.end()));
    }

    void collect(const std::string& prefix, ParamRegistry<T>& reg) const {
        for (int i = 0; i < genotype_.N; ++i) {
            for (int p = 0; p < 2; ++p) {
                ops_[2 * i + p].collect(prefix + ".node" + std::to_string(i) + ".pick" + std::to_string(p) +
                                            "." + std::string(op_name(genotype_.picks[i][p].op)),
                                        reg);
            }
        }
    }

    [[nodiscard]] int width() const { return width_; }
    [[nodiscard]] int output_width() const { return genotype_.N * width_; }

private:
    CellGenotype genotype_;
    int width_;
    std::vector<CandidateOp<T>> ops_;
};

struct CompactNetConfig {
    int W = 8;  // stem/tail width
    RestorationTask task = RestorationTask::denoise();
    double slope = 0.2;
    bool bn_affine = true;
    std::uint64_t seed = 0;
};

template <typename T>
class CompactNet {
public:
    // genotypes: one per layer, or a single genotype replicated over all layers.
    CompactNet(const std::vector<CellGenotype>& genotypes, const WidthSpec& widths, CompactNetConfig cfg)
        : cfg_(cfg), widths_(widths) {
        const int L = static_cast<int>(widths.node_widths.size());
        if (L < 1) throw GenotypeError("compact net needs at least one layer");
        if (genotypes.size() != 1 && static_cast<int>(genotypes.size()) != L) {
            throw GenotypeError("got " + std::to_string(genotypes.size()) + " genotypes for " +
                                std::to_string(L) + " layers");
        }
        const T slope = static_cast<T>(cfg.slope);
        stem1_ = ConvLayer<T>(3, cfg.W, 3, cfg.seed, "stem.conv1");
        stem2_ = ConvLayer<T>(cfg.W, cfg.W, 3, cfg.seed, "stem.conv2");
        std::vector<int> feature{cfg.W};  // feature widths, index 0 = stem
        for (int l = 0; l < L; ++l) {
            const CellGenotype& g = genotypes.size() == 1 ? genotypes[0] : genotypes[l];
            genotypes_.push_back(g);
            const int w = widths.node_widths[l];
            const std::string base = "layer" + std::to_string(l);
            const int prev = feature.back();
            const int prev2 = l >= 1 ? feature[feature.size() - 2] : cfg.W;
            proj_prev_.emplace_back(prev, w, 1, cfg.seed, base + ".proj_prev");
            proj_prev2_.emplace_back(prev2, w, 1, cfg.seed, base + ".proj_prev2");
            cells_.push_back(std::make_unique<DiscreteCell<T>>(g, w, slope, cfg.bn_affine, cfg.seed, base + ".cell"));
            feature.push_back(g.N * w);
        }
        tail1_ = ConvLayer<T>(feature.back(), cfg.W, 3, cfg.seed, "tail.conv1");
        tail2_ = ConvLayer<T>(cfg.W, cfg.task.tail_channels(), 3, cfg.seed, "tail.conv2");
        tail2_.with_init_gain(static_cast<T>(kTailInitGain));
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        if (x.shape().c != 3) throw ShapeError("compact net expects 3 input channels, got " + x.shape().str());
        const T slope = static_cast<T>(cfg_.slope);
        Tensor<T> s = stem2_(leaky_relu(stem1_(x), slope));
        Tensor<T> prev2 = s;
        Tensor<T> prev = s;
        for (std::size_t l = 0; l < cells_.size(); ++l) {
            Tensor<T> h = cells_[l]->forward(proj_prev_[l](prev), proj_prev2_[l](prev2), training);
            prev2 = prev;
            prev = h;
        }
        Tensor<T> r = tail2_(leaky_relu(tail1_(prev), slope));
        return finish_restoration(r, x, cfg_.task);
    }

    [[nodiscard]] ParamRegistry<T> registry() const {
        ParamRegistry<T> reg;
        stem1_.collect("stem.conv1", reg);
        stem2_.collect("stem.conv2", reg);
        for (std::size_t l = 0; l < cells_.size(); ++l) {
            const std::string base = "layer" + std::to_string(l);
            proj_prev_[l].collect(base + ".proj_prev", reg);
            proj_prev2_[l].collect(base + ".proj_prev2", reg);
            cells_[l]->collect(base + ".cell", reg);
        }
        tail1_.collect("tail.conv1", reg);
        tail2_.collect("tail.conv2", reg);
        return reg;
    }

    [[nodiscard]] const CompactNetConfig& config() const { return cfg_; }
    [[nodiscard]] const WidthSpec& widths() const { return widths_; }
    [[nodiscard]] const std::vector<CellGenotype>& genotypes() const { return genotypes_; }
    [[nodiscard]] std::vector<int> cell_node_widths() const { return widths_.node_widths; }
    ConvLayer<T>& tail_final() { return tail2_; }

private:
    CompactNetConfig cfg_;
    WidthSpec widths_;
    std::vector<CellGenotype> genotypes_;
    ConvLayer<T> stem1_, stem2_, tail1_, tail2_;
    std::vector<ConvLayer<T>> proj_prev_, proj_prev2_;
    std::vector<std::unique_ptr<DiscreteCell<T>>> cells_;
};

// Number of scalar parameters (kernels, biases, BN affine terms).
template <typename T>
std::size_t count_params(const ParamRegistry<T>& reg) {
    std::size_t n = 0;
    for (const auto& p : reg.params) n += p.tensor.numel();
    return n;
}

template <typename Net>
std::size_t count_params(const Net& net) {
    return count_params(net.registry());
}

template <typename T>
std::size_t count_params(const ConvLayer<T>& conv) {
    ParamRegistry<T> reg;
    conv.collect("conv", reg);
    return count_params(reg);
}

}  // namespace hinas
