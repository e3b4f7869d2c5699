#pragma once
// Width-level availability of the outer search space.
//
// Level i means node width 2^i * W. Layer 0 offers levels {0,1}; every later
// layer offers {0,1,2}. The stem acts as layer -1 with the single level 0, so
// layer l's cell at level i may read previous-layer levels {i-1, i, i+1} that
// exist there.

#include <stdexcept>
#include <string>
#include <vector>

namespace hinas {

inline constexpr int kMaxLevel = 2;

inline std::vector<int> levels_at(int layer) {
    if (layer < 0) return {0};
    if (layer == 0) return {0, 1};
    return {0, 1, 2};
}

inline bool level_available(int layer, int level) {
    for (int v : levels_at(layer)) {
        if (v == level) return true;
    }
    return false;
}

// Admissible source levels (ascending) feeding level `level` of `layer`.
inline std::vector<int> source_levels(int layer, int level) {
    std::vector<int> out;
    for (int k : levels_at(layer - 1)) {
        if (k >= level - 1 && k <= level + 1) out.push_back(k);
    }
    return out;
}

// Reachable target levels (ascending) of `layer` from source level `source`.
inline std::vector<int> target_levels(int layer, int source) {
    std::vector<int> out;
    for (int i : levels_at(layer)) {
        if (i >= source - 1 && i <= source + 1) out.push_back(i);
    }
    return out;
}

inline int level_factor(int level) { return 1 << level; }

}  // namespace hinas
