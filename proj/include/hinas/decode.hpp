#pragma once
// Discretization of a searched supernet.
//
// Cells keep, per node, the two incoming edges whose best non-None operator is
// most probable. Widths are decoded as the maximum-probability level path,
// reading exp(beta) as transition affinities normalized over the levels a
// source can move to (Viterbi in log space).

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hinas/genotype.hpp"
#include "hinas/supernet.hpp"

namespace hinas {

// alpha: raw per-edge vectors in canonical edge order.
inline CellGenotype derive_cell(const std::vector<std::vector<double>>& alpha, int N) {
    if (static_cast<int>(alpha.size()) != edge_count(N)) {
        throw GenotypeError("derive_cell: expected " + std::to_string(edge_count(N)) + " edges, got " +
                            std::to_string(alpha.size()));
    }
    CellGenotype g;
    g.N = N;
    const int none = static_cast<int>(OpKind::None);
    for (int i = 0; i < N; ++i) {
        struct Scored {
            int input;
            int op;
            double score;
        };
        std::vector<Scored> edges;
        for (int j = 0; j < 2 + i; ++j) {
            const auto& a = alpha[edge_index(i, j)];
            if (a.size() != static_cast<std::size_t>(kNumOps)) throw GenotypeError("derive_cell: bad alpha length");
            for (double v : a) {
                if (!std::isfinite(v)) throw GenotypeError("derive_cell: non-finite alpha");
            }
            const auto probs = softmax_values<double>(a);
            int best = 0;
            for (int k = 1; k < kNumOps; ++k) {
                if (k != none && probs[k] > probs[best]) best = k;
            }
            edges.push_back({j, best, probs[best]});
        }
        if (edges.size() < 2) throw GenotypeError("derive_cell: node with fewer than two inputs");
        std::stable_sort(edges.begin(), edges.end(),
                         [](const Scored& a, const Scored& b) { return a.score > b.score; });
        std::array<Pick, 2> pair{Pick{edges[0].input, op_from_ordinal(edges[0].op)},
                                 Pick{edges[1].input, op_from_ordinal(edges[1].op)}};
        if (pair[1].input < pair[0].input) std::swap(pair[0], pair[1]);
        g.picks.push_back(pair);
    }
    g.validate();
    return g;
}

// log P(level at `layer` = target | level at layer-1 = source).
inline double transition_log_prob(const BetaTable& beta, int layer, int source, int target) {
    const auto targets = target_levels(layer, source);
    std::vector<double> raw;
    int pos = -1;
    for (int t : targets) {
        if (t == target) pos = static_cast<int>(raw.size());
        raw.push_back(beta.get(layer, t, source));
    }
    if (pos < 0) return -std::numeric_limits<double>::infinity();
    const double mx = *std::max_element(raw.begin(), raw.end());
    double total = 0.0;
    for (double r : raw) total += std::exp(r - mx);
    return (raw[pos] - mx) - std::log(total);
}

inline void check_beta(const BetaTable& beta) {
    if (beta.L < 1) throw GenotypeError("beta table has no layers");
    for (const auto& layer : beta.raw) {
        for (const auto& v : layer) {
            for (double x : v) {
                if (!std::isfinite(x)) throw GenotypeError("non-finite beta");
            }
        }
    }
}

// Dynamic programming over layers; ties prefer the lower predecessor level and
// the lower final level.
inline WidthPath viterbi_widths(const BetaTable& beta) {
    check_beta(beta);
    const int L = beta.L;
    constexpr double kNeg = -std::numeric_limits<double>::infinity();
    std::vector<std::array<double, kMaxLevel + 1>> score(L);
    std::vector<std::array<int, kMaxLevel + 1>> back(L);
    for (int l = 0; l < L; ++l) {
        score[l].fill(kNeg);
        back[l].fill(-1);
        for (int i : levels_at(l)) {
            for (int k : source_levels(l, i)) {
                const double prior = l == 0 ? 0.0 : score[l - 1][k];
                if (prior == kNeg) continue;
                const double s = prior + transition_log_prob(beta, l, k, i);
                if (s > score[l][i]) {
                    score[l][i] = s;
                    back[l][i] = k;
                }
            }
        }
    }
    int best = -1;
    for (int i : levels_at(L - 1)) {
        if (best < 0 || score[L - 1][i] > score[L - 1][best]) best = i;
    }
    WidthPath p;
    p.levels.assign(L, 0);
    for (int l = L - 1; l >= 0; --l) {
        p.levels[l] = best;
        best = back[l][best];
    }
    return p;
}

inline constexpr int kMaxEnumerationLayers = 12;

// Exhaustive enumeration of every availability-respecting path. Among equal
// scores the path with the lowest last level wins, then the lowest
// second-to-last, and so on, matching the DP back-pointer rule.
inline WidthPath brute_force_widths(const BetaTable& beta) {
    check_beta(beta);
    const int L = beta.L;
    if (L > kMaxEnumerationLayers) {
        throw std::invalid_argument("brute_force_widths: L=" + std::to_string(L) +
                                    " exceeds enumeration bound " + std::to_string(kMaxEnumerationLayers));
    }
    std::vector<int> path(L, 0);
    std::vector<int> best_path;
    double best_score = -std::numeric_limits<double>::infinity();
    auto reverse_less = [](const std::vector<int>& a, const std::vector<int>& b) {
        for (int l = static_cast<int>(a.size()) - 1; l >= 0; --l) {
            if (a[l] != b[l]) return a[l] < b[l];
        }
        return false;
    };
    auto visit = [&](auto&& self, int layer, int prev, double acc) -> void {
        if (layer == L) {
            if (best_path.empty() || acc > best_score || (acc == best_score && reverse_less(path, best_path))) {
                best_score = acc;
                best_path = path;
            }
            return;
        }
        for (int v : target_levels(layer, prev)) {
            path[layer] = v;
            self(self, layer + 1, v, acc + transition_log_prob(beta, layer, prev, v));
        }
    };
    visit(visit, 0, 0, 0.0);
    return WidthPath{best_path};
}

template <typename T>
Architecture derive_architecture(const SuperNet<T>& net) {
    const auto& cfg = net.config();
    Architecture a;
    const int sets = cfg.lwas ? cfg.L : 1;
    for (int l = 0; l < sets; ++l) a.genotypes.push_back(derive_cell(net.alpha_for_layer(l).snapshot(), cfg.N));
    a.path = viterbi_widths(net.beta_table());
    return a;
}

}  // namespace hinas
