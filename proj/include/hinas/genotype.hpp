#pragma once
// Discrete architectures: per-node top-2 picks of a cell and the per-layer
// width path, with JSON/DOT serialization and the edits used for R1/R2-style
// architecture analysis.

#include <json.hpp>

#include <array>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hinas/search_space.hpp"
#include "hinas/topology.hpp"

namespace hinas {

class GenotypeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Pick {
    int input = 0;
    OpKind op = OpKind::Conv3;
    friend bool operator==(const Pick&, const Pick&) = default;
};

struct CellGenotype {
    int N = 0;
    std::vector<std::array<Pick, 2>> picks;  // one pair per node

    friend bool operator==(const CellGenotype&, const CellGenotype&) = default;

    void validate() const {
        if (N < 1) throw GenotypeError("genotype needs at least one node");
        if (static_cast<int>(picks.size()) != N) {
            throw GenotypeError("genotype has " + std::to_string(picks.size()) + " pick pairs for " +
                                std::to_string(N) + " nodes");
        }
        for (int i = 0; i < N; ++i) {
            for (const Pick& p : picks[i]) {
                if (p.input < 0 || p.input >= 2 + i) {
                    throw GenotypeError("node " + std::to_string(i) + ": input index " +
                                        std::to_string(p.input) + " out of range");
                }
                if (p.op == OpKind::None) {
                    throw GenotypeError("node " + std::to_string(i) + ": None cannot be picked");
                }
                const int ord = static_cast<int>(p.op);
                if (ord < 0 || ord >= kNumOps) throw GenotypeError("invalid op ordinal");
            }
        }
    }
};

struct WidthPath {
    std::vector<int> levels;

    friend bool operator==(const WidthPath&, const WidthPath&) = default;

    void validate() const {
        if (levels.empty()) throw GenotypeError("width path is empty");
        int prev = 0;  // the stem sits at level 0
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const int v = levels[l];
            if (!level_available(static_cast<int>(l), v)) {
                throw GenotypeError("level " + std::to_string(v) + " unavailable at layer " + std::to_string(l));
            }
            if (std::abs(v - prev) > 1) {
                throw GenotypeError("width path steps more than one level at layer " + std::to_string(l));
            }
            prev = v;
        }
    }
};

// ---- JSON ---------------------------------------------------------------

inline nlohmann::json to_json(const CellGenotype& g) {
    nlohmann::json picks = nlohmann::json::array();
    for (const auto& pair : g.picks) {
        nlohmann::json node = nlohmann::json::array();
        for (const Pick& p : pair) node.push_back({p.input, static_cast<int>(p.op)});
        picks.push_back(node);
    }
    return {{"version", 1}, {"N", g.N}, {"picks", picks}};
}

inline CellGenotype genotype_from_json(const nlohmann::json& j) {
    if (j.value("version", 0) != 1) throw GenotypeError("unsupported genotype version");
    CellGenotype g;
    g.N = j.at("N").get<int>();
    for (const auto& node : j.at("picks")) {
        if (node.size() != 2) throw GenotypeError("each node needs exactly two picks");
        std::array<Pick, 2> pair;
        for (int k = 0; k < 2; ++k) {
            pair[k].input = node[k].at(0).get<int>();
            pair[k].op = op_from_ordinal(node[k].at(1).get<int>());
        }
        g.picks.push_back(pair);
    }
    g.validate();
    return g;
}

inline nlohmann::json to_json(const WidthPath& p) { return {{"levels", p.levels}}; }

inline WidthPath width_path_from_json(const nlohmann::json& j) {
    WidthPath p{j.at("levels").get<std::vector<int>>()};
    p.validate();
    return p;
}

// Architecture file: one genotype per layer (or a single shared one) plus the path.
struct Architecture {
    std::vector<CellGenotype> genotypes;
    WidthPath path;
};

inline nlohmann::json to_json(const Architecture& a) {
    nlohmann::json gs = nlohmann::json::array();
    for (const auto& g : a.genotypes) gs.push_back(to_json(g));
    return {{"genotypes", gs}, {"path", to_json(a.path)}};
}

inline Architecture architecture_from_json(const nlohmann::json& j) {
    Architecture a;
    for (const auto& g : j.at("genotypes")) a.genotypes.push_back(genotype_from_json(g));
    a.path = width_path_from_json(j.at("path"));
    return a;
}

// ---- DOT ----------------------------------------------------------------

inline std::string to_dot(const CellGenotype& g, const std::string& name = "cell") {
    std::ostringstream os;
    os << "digraph " << name << " {\n  rankdir=LR;\n";
    os << "  in0 [label=\"h(l-1)\", shape=box];\n  in1 [label=\"h(l-2)\", shape=box];\n";
    auto state = [](int idx) {
        return idx < 2 ? "in" + std::to_string(idx) : "n" + std::to_string(idx - 2);
    };
    for (int i = 0; i < g.N; ++i) os << "  n" << i << " [label=\"node " << i << "\"];\n";
    os << "  out [label=\"concat\", shape=box];\n";
    for (int i = 0; i < g.N; ++i) {
        for (const Pick& p : g.picks[i]) {
            os << "  " << state(p.input) << " -> n" << i << " [label=\"" << op_name(p.op) << "\"];\n";
        }
        os << "  n" << i << " -> out;\n";
    }
    os << "}\n";
    return os.str();
}

// ---- Edits --------------------------------------------------------------

struct ReplaceOp {
    int node;
    int pick;
    OpKind op;
};
struct RewireInput {
    int node;
    int pick;
    int input;
};
using GenotypeEdit = std::variant<ReplaceOp, RewireInput>;

inline CellGenotype perturb_genotype(const CellGenotype& g, const GenotypeEdit& edit) {
    CellGenotype out = g;
    auto target = [&](int node, int pick) -> Pick& {
        if (node < 0 || node >= g.N || pick < 0 || pick > 1) {
            throw GenotypeError("edit targets a nonexistent pick");
        }
        return out.picks[node][pick];
    };
    if (const auto* r = std::get_if<ReplaceOp>(&edit)) {
        target(r->node, r->pick).op = r->op;
    } else {
        const auto& w = std::get<RewireInput>(edit);
        target(w.node, w.pick).input = w.input;
    }
    out.validate();
    return out;
}

// ---- Random sampling (random search with weight sharing baseline) -------

inline CellGenotype random_genotype(int N, std::mt19937_64& rng) {
    CellGenotype g;
    g.N = N;
    std::uniform_int_distribution<int> op_dist(0, kNumOps - 2);  // excludes None
    for (int i = 0; i < N; ++i) {
        const int inputs = 2 + i;
        std::uniform_int_distribution<int> first(0, inputs - 1);
        std::uniform_int_distribution<int> second(0, inputs - 2);
        const int a = first(rng);
        int b = second(rng);
        if (b >= a) ++b;  // distinct inputs
        std::array<Pick, 2> pair{Pick{std::min(a, b), op_from_ordinal(op_dist(rng))},
                                 Pick{std::max(a, b), op_from_ordinal(op_dist(rng))}};
        g.picks.push_back(pair);
    }
    return g;
}

// Uniform over availability-respecting paths (by counting completions).
inline WidthPath random_width_path(int L, std::mt19937_64& rng) {
    // completions[l][v]: number of valid path suffixes from level v at layer l
    std::vector<std::array<double, kMaxLevel + 1>> completions(L);
    for (int l = L - 1; l >= 0; --l) {
        completions[l].fill(0.0);
        for (int v : levels_at(l)) {
            if (l == L - 1) {
                completions[l][v] = 1.0;
                continue;
            }
            for (int next : target_levels(l + 1, v)) completions[l][v] += completions[l + 1][next];
        }
    }
    WidthPath p;
    int prev = 0;
    for (int l = 0; l < L; ++l) {
        const auto options = target_levels(l, prev);
        double total = 0.0;
        for (int v : options) total += completions[l][v];
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng);
        int chosen = options.back();
        for (int v : options) {
            if (r < completions[l][v]) {
                chosen = v;
                break;
            }
            r -= completions[l][v];
        }
        p.levels.push_back(chosen);
        prev = chosen;
    }
    return p;
}

inline Architecture random_architecture(int N, int L, bool per_layer, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Architecture a;
    const int count = per_layer ? L : 1;
    for (int l = 0; l < count; ++l) a.genotypes.push_back(random_genotype(N, rng));
    a.path = random_width_path(L, rng);
    return a;
}

}  // namespace hinas
