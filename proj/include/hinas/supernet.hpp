#pragma once
// Outer search space: stem, L layers of width-level cells mixed by beta, tail
// and the task's residual framing.
//
// With cell sharing the beta-weighted sum of the projected previous-layer
// features enters the level's cell once. Without it every admissible source
// level runs through its own cell and the outputs are mixed by beta.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hinas/search_space.hpp"
#include "hinas/task.hpp"
#include "hinas/topology.hpp"

namespace hinas {

struct SuperNetConfig {
    int W = 8;
    int N = 4;
    int L = 3;
    RestorationTask task = RestorationTask::denoise();
    bool lwas = true;          // one alpha set per layer
    bool cell_sharing = true;  // shared vs. per-source cells
    double slope = 0.2;
    bool bn_affine = false;
    std::uint64_t seed = 0;
};

// Raw beta values indexed [layer][level] -> vector over source_levels(layer, level).
struct BetaTable {
    int L = 0;
    std::vector<std::vector<std::vector<double>>> raw;

    explicit BetaTable(int layers = 0) : L(layers), raw(layers, std::vector<std::vector<double>>(kMaxLevel + 1)) {
        for (int l = 0; l < layers; ++l) {
            for (int i : levels_at(l)) raw[l][i].assign(source_levels(l, i).size(), 0.0);
        }
    }
    double& at(int layer, int level, int source) {
        const auto src = source_levels(layer, level);
        for (std::size_t p = 0; p < src.size(); ++p) {
            if (src[p] == source) return raw[layer][level][p];
        }
        throw std::out_of_range("beta: source level not admissible");
    }
    [[nodiscard]] double get(int layer, int level, int source) const {
        return const_cast<BetaTable*>(this)->at(layer, level, source);
    }
};

template <typename T>
class SuperNet {
public:
    using LevelFeatures = std::map<int, Tensor<T>>;

    explicit SuperNet(SuperNetConfig cfg) : cfg_(cfg) {
        if (cfg.W < 1 || cfg.N < 1 || cfg.L < 1) throw std::invalid_argument("supernet needs W, N, L >= 1");
        const T slope = static_cast<T>(cfg.slope);
        const std::uint64_t seed = cfg.seed;
        stem1_ = ConvLayer<T>(3, cfg.W, 3, seed, "stem.conv1");
        stem2_ = ConvLayer<T>(cfg.W, cfg.W, 3, seed, "stem.conv2");

        const int alpha_sets = cfg.lwas ? cfg.L : 1;
        for (int s = 0; s < alpha_sets; ++s) alphas_.emplace_back(cfg.N);

        layers_.resize(cfg.L);
        for (int l = 0; l < cfg.L; ++l) {
            const AlphaSet<T>& aset = alphas_[cfg.lwas ? l : 0];
            for (int i : levels_at(l)) {
                Level& lv = layers_[l][i];
                const int width = node_width(i);
                const std::string base = "layer" + std::to_string(l) + ".level" + std::to_string(i);
                lv.sources = source_levels(l, i);
                lv.beta = Tensor<T>::zeros(Shape{1, static_cast<int>(lv.sources.size()), 1, 1}, true);
                for (int k : lv.sources) {
                    lv.proj_prev.emplace_back(feature_width(l - 1, k), width, 1, seed,
                                              base + ".proj_prev.src" + std::to_string(k));
                }
                lv.proj_prev2 = ConvLayer<T>(feature_width(l - 2, two_back_level(l, i)), width, 1,
                                             seed, base + ".proj_prev2");
                if (cfg.cell_sharing) {
                    lv.cells.push_back(std::make_unique<SuperCell<T>>(cfg.N, i, width, l, aset, slope,
                                                                      cfg.bn_affine, seed, base + ".cell"));
                } else {
                    for (int k : lv.sources) {
                        lv.cells.push_back(std::make_unique<SuperCell<T>>(
                            cfg.N, i, width, l, aset, slope, cfg.bn_affine, seed,
                            base + ".src" + std::to_string(k) + ".cell"));
                    }
                }
            }
        }
        int tail_in = 0;
        for (int i : levels_at(cfg.L - 1)) tail_in += cfg.N * node_width(i);
        tail1_ = ConvLayer<T>(tail_in, cfg.W, 3, seed, "tail.conv1");
        tail2_ = ConvLayer<T>(cfg.W, cfg.task.tail_channels(), 3, seed, "tail.conv2");
        tail2_.with_init_gain(static_cast<T>(kTailInitGain));
    }

    [[nodiscard]] const SuperNetConfig& config() const { return cfg_; }
    [[nodiscard]] int node_width(int level) const { return level_factor(level) * cfg_.W; }

    // Channel width of h_layer^level; layer -1 (and below) denotes the stem.
    [[nodiscard]] int feature_width(int layer, int level) const {
        if (layer < 0) return cfg_.W;
        return cfg_.N * node_width(level);
    }

    // Level of the two-layers-back feature consumed by (layer, level). Layers 0
    // and 1 read the stem; a level missing two layers back falls to the
    // nearest lower available level.
    [[nodiscard]] static int two_back_level(int layer, int level) {
        if (layer - 2 < 0) return 0;
        int k = level;
        while (!level_available(layer - 2, k)) --k;
        return k;
    }

    Tensor<T> stem_forward(const Tensor<T>& x) const {
        if (x.shape().c != 3) throw ShapeError("stem expects 3 input channels, got " + x.shape().str());
        return stem2_(leaky_relu(stem1_(x), static_cast<T>(cfg_.slope)));
    }

    // h_layer^level from the previous two layers' features.
    Tensor<T> level_forward(int l, int i, const LevelFeatures& prev, const LevelFeatures& prev2,
                            bool training) {
        Level& lv = level(l, i);
        std::vector<Tensor<T>> f;
        for (std::size_t p = 0; p < lv.sources.size(); ++p) {
            auto it = prev.find(lv.sources[p]);
            if (it == prev.end()) {
                throw ShapeError("layer " + std::to_string(l) + " level " + std::to_string(i) +
                                 ": missing source level " + std::to_string(lv.sources[p]));
            }
            f.push_back(lv.proj_prev[p](it->second));
        }
        const int k2 = two_back_level(l, i);
        auto it2 = prev2.find(k2);
        if (it2 == prev2.end()) {
            throw ShapeError("layer " + std::to_string(l) + ": missing two-back level " + std::to_string(k2));
        }
        Tensor<T> f2 = lv.proj_prev2(it2->second);
        Tensor<T> probs = softmax(lv.beta);
        std::vector<int> idx(lv.sources.size());
        for (std::size_t p = 0; p < idx.size(); ++p) idx[p] = static_cast<int>(p);
        if (cfg_.cell_sharing) {
            Tensor<T> mix = weighted_sum(f, probs, idx);
            return lv.cells[0]->forward(mix, f2, training);
        }
        std::vector<Tensor<T>> outs;
        for (std::size_t p = 0; p < f.size(); ++p) outs.push_back(lv.cells[p]->forward(f[p], f2, training));
        return weighted_sum(outs, probs, idx);
    }

    LevelFeatures layer_forward(int l, const LevelFeatures& prev, const LevelFeatures& prev2,
                                bool training) {
        LevelFeatures out;
        for (int i : levels_at(l)) out[i] = level_forward(l, i, prev, prev2, training);
        return out;
    }

    // Concatenated raw outputs of every last-layer level, through the tail.
    Tensor<T> tail_forward(const LevelFeatures& last) const {
        std::vector<Tensor<T>> parts;
        for (const auto& [lvl, t] : last) parts.push_back(t);
        Tensor<T> cat = concat_channels(parts);
        return tail2_(leaky_relu(tail1_(cat), static_cast<T>(cfg_.slope)));
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        Tensor<T> s = stem_forward(x);
        LevelFeatures stem{{0, s}};
        LevelFeatures prev2 = stem;
        LevelFeatures prev = stem;
        for (int l = 0; l < cfg_.L; ++l) {
            LevelFeatures cur = layer_forward(l, prev, prev2, training);
            prev2 = std::move(prev);
            prev = std::move(cur);
        }
        return finish_restoration(tail_forward(prev), x, cfg_.task);
    }

    [[nodiscard]] SuperCell<T>& cell(int l, int i, int source_pos = 0) {
        return *level(l, i).cells.at(source_pos);
    }
    [[nodiscard]] std::size_t cells_at(int l, int i) const { return level(l, i).cells.size(); }
    [[nodiscard]] std::size_t cell_calls(int l, int i) const {
        std::size_t n = 0;
        for (const auto& c : level(l, i).cells) n += c->forward_calls;
        return n;
    }
    void reset_call_counters() {
        for (auto& layer : layers_) {
            for (auto& [i, lv] : layer) {
                for (auto& c : lv.cells) c->forward_calls = 0;
            }
        }
    }

    [[nodiscard]] Tensor<T>& beta(int l, int i) { return level(l, i).beta; }
    [[nodiscard]] const std::vector<int>& sources(int l, int i) const { return level(l, i).sources; }
    [[nodiscard]] std::vector<AlphaSet<T>>& alphas() { return alphas_; }
    [[nodiscard]] const AlphaSet<T>& alpha_for_layer(int l) const { return alphas_[cfg_.lwas ? l : 0]; }
    ConvLayer<T>& tail_final() { return tail2_; }

    [[nodiscard]] BetaTable beta_table() const {
        BetaTable tab(cfg_.L);
        for (int l = 0; l < cfg_.L; ++l) {
            for (int i : levels_at(l)) {
                const auto& v = level(l, i).beta.values();
                tab.raw[l][i].assign(v.begin(), v.end());
            }
        }
        return tab;
    }

    // Convolution kernels, biases and (optional) BN affine terms.
    [[nodiscard]] ParamRegistry<T> kernel_registry() const {
        ParamRegistry<T> reg;
        stem1_.collect("stem.conv1", reg);
        stem2_.collect("stem.conv2", reg);
        for (int l = 0; l < cfg_.L; ++l) {
            for (const auto& [i, lv] : layers_[l]) {
                const std::string base = "layer" + std::to_string(l) + ".level" + std::to_string(i);
                for (std::size_t p = 0; p < lv.sources.size(); ++p) {
                    lv.proj_prev[p].collect(base + ".proj_prev.src" + std::to_string(lv.sources[p]), reg);
                }
                lv.proj_prev2.collect(base + ".proj_prev2", reg);
                if (cfg_.cell_sharing) {
                    lv.cells[0]->collect(base + ".cell", reg);
                } else {
                    for (std::size_t p = 0; p < lv.cells.size(); ++p) {
                        lv.cells[p]->collect(base + ".src" + std::to_string(lv.sources[p]) + ".cell", reg);
                    }
                }
            }
        }
        tail1_.collect("tail.conv1", reg);
        tail2_.collect("tail.conv2", reg);
        return reg;
    }

    [[nodiscard]] ParamRegistry<T> registry() const { return kernel_registry(); }

    [[nodiscard]] std::vector<Parameter<T>> arch_parameters() const {
        std::vector<Parameter<T>> out;
        for (std::size_t s = 0; s < alphas_.size(); ++s) {
            const std::string base = cfg_.lwas ? "alpha.layer" + std::to_string(s) : std::string("alpha.shared");
            for (std::size_t e = 0; e < alphas_[s].edges.size(); ++e) {
                out.push_back({base + ".edge" + std::to_string(e), alphas_[s].edges[e]});
            }
        }
        for (int l = 0; l < cfg_.L; ++l) {
            for (const auto& [i, lv] : layers_[l]) {
                out.push_back({"beta.layer" + std::to_string(l) + ".level" + std::to_string(i), lv.beta});
            }
        }
        return out;
    }

private:
    struct Level {
        std::vector<int> sources;
        Tensor<T> beta;
        std::vector<ConvLayer<T>> proj_prev;
        ConvLayer<T> proj_prev2;
        std::vector<std::unique_ptr<SuperCell<T>>> cells;
    };

    Level& level(int l, int i) {
        auto it = layers_.at(l).find(i);
        if (it == layers_[l].end()) {
            throw std::out_of_range("level " + std::to_string(i) + " not available at layer " + std::to_string(l));
        }
        return it->second;
    }
    const Level& level(int l, int i) const { return const_cast<SuperNet*>(this)->level(l, i); }

    SuperNetConfig cfg_;
    ConvLayer<T> stem1_, stem2_, tail1_, tail2_;
    std::vector<AlphaSet<T>> alphas_;
    std::vector<std::map<int, Level>> layers_;
};

}  // namespace hinas
