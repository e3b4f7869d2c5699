// Acceptance suite: one PASS/FAIL line per criterion on stdout, diagnostics on
// stderr. Exit status is 0 only when every selected criterion passes.
//
//   acceptance               run criteria 1-9
//   acceptance --only 1,2,6  run a subset

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hinas/gradcheck.hpp"
#include "hinas/hinas.hpp"
#include "test_util.hpp"

using namespace hinas;
using hinas::testing::random_tensor;
using hinas::testing::reference_ssim;
using T64 = Tensor<double>;
using Clock = std::chrono::steady_clock;

namespace {

// ---------------------------------------------------------------- tolerances

constexpr double kPrimitiveGradTol = 1e-6;
constexpr double kEndToEndGradTol = 1e-4;
constexpr double kGradSuiteSeconds = 300.0;
constexpr int kDecodeDraws = 1000;
constexpr double kDecodeSeconds = 10.0;
constexpr double kSharingRatioMin = 2.5;
constexpr double kMinuteSeconds = 60.0;
constexpr double kLossCompositionTol = 1e-7;
constexpr int kSsimPairs = 20;
constexpr double kSsimReferenceTol = 1e-6;
constexpr double kResidualTol = 1e-6;
constexpr int kGenotypeCases = 1000;
constexpr double kDeskGainDb = 2.0;
constexpr double kDeskSeconds = 1800.0;
constexpr double kPsnrTieDb = 0.05;
constexpr double kSsimTie = 0.002;

// The fixed seed of the desk run; the ablation adds two more.
constexpr std::uint64_t kDeskSeed = 7;
const std::vector<std::uint64_t> kAblationSeeds{7, 8, 9};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------- 1. gradients

Outcome criterion_gradients() {
    const auto t0 = Clock::now();
    using Inputs = std::vector<T64>;
    auto rnd = [](Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
        return random_tensor<double>(s, seed, lo, hi, true);
    };
    // Inputs keep clear of kinks (LeakyReLU at 0, clamp_min at its floor).
    auto away_from_zero = [](T64 t) {
        for (auto& v : t.values()) v = v >= 0 ? v + 0.05 : v - 0.05;
        return t;
    };
    struct Case {
        std::string name;
        std::function<T64(const Inputs&)> f;
        Inputs in;
    };
    BatchNormState<double> bn_train(3), bn_eval(3);
    bn_eval.running_mean = {0.1, -0.2, 0.3};
    bn_eval.running_var = {0.5, 1.5, 2.0};
    const std::vector<int> ws_index{0, 2, 1};
    std::vector<Case> cases{
        {"conv2d 3x3 bias",
         [](const Inputs& v) { return conv2d(v[0], v[1], &v[2], 1, 1, 1, 1); },
         {rnd({2, 3, 6, 6}, 1), rnd({4, 3, 3, 3}, 2), rnd({1, 1, 1, 4}, 3)}},
        {"conv2d unpadded",
         [](const Inputs& v) { return conv2d(v[0], v[1], nullptr, 1, 0, 1, 1); },
         {rnd({1, 2, 7, 7}, 4), rnd({3, 2, 3, 3}, 5)}},
        {"conv2d dilated",
         [](const Inputs& v) { return conv2d_same(v[0], v[1], nullptr, 2); },
         {rnd({1, 2, 9, 9}, 6), rnd({2, 2, 5, 5}, 7)}},
        {"conv2d grouped", [](const Inputs& v) { return conv2d_same(v[0], v[1], nullptr, 1, 2); },
         {rnd({1, 4, 5, 5}, 8), rnd({6, 2, 3, 3}, 9)}},
        {"conv2d depthwise", [](const Inputs& v) { return conv2d_same(v[0], v[1], nullptr, 1, 3); },
         {rnd({2, 3, 5, 5}, 10), rnd({3, 1, 3, 3}, 11)}},
        {"separable_conv", [](const Inputs& v) { return separable_conv(v[0], v[1], v[2], 5); },
         {rnd({1, 3, 7, 7}, 12), rnd({3, 1, 5, 5}, 13), rnd({4, 3, 1, 1}, 14)}},
        {"leaky_relu", [](const Inputs& v) { return leaky_relu(v[0], 0.2); },
         {away_from_zero(rnd({1, 2, 4, 4}, 15))}},
        {"batch_norm train",
         [&](const Inputs& v) { return batch_norm(v[0], bn_train, &v[1], &v[2], true); },
         {rnd({3, 3, 4, 4}, 16), rnd({1, 1, 1, 3}, 17), rnd({1, 1, 1, 3}, 18)}},
        {"batch_norm eval",
         [&](const Inputs& v) { return batch_norm(v[0], bn_eval, &v[1], &v[2], false); },
         {rnd({2, 3, 4, 4}, 19), rnd({1, 1, 1, 3}, 20), rnd({1, 1, 1, 3}, 21)}},
        {"concat_channels", [](const Inputs& v) { return concat_channels(Inputs{v[0], v[1]}); },
         {rnd({2, 2, 3, 3}, 22), rnd({2, 3, 3, 3}, 23)}},
        {"slice_channels", [](const Inputs& v) { return slice_channels(v[0], 1, 4); }, {rnd({2, 5, 3, 3}, 24)}},
        {"pixel_shuffle", [](const Inputs& v) { return pixel_shuffle(v[0], 2); }, {rnd({1, 12, 3, 3}, 25)}},
        {"pixel_unshuffle", [](const Inputs& v) { return pixel_unshuffle(v[0], 3); }, {rnd({1, 2, 6, 6}, 26)}},
        {"bicubic up", [](const Inputs& v) { return bicubic_resize(v[0], 3, ResizeDirection::Up); },
         {rnd({1, 2, 5, 4}, 27)}},
        {"bicubic down", [](const Inputs& v) { return bicubic_resize(v[0], 2, ResizeDirection::Down); },
         {rnd({1, 2, 8, 6}, 28)}},
        {"softmax", [](const Inputs& v) { return softmax(v[0]); }, {rnd({1, 1, 1, 7}, 29, -3, 3)}},
        {"weighted_sum",
         [&](const Inputs& v) { return weighted_sum(Inputs{v[0], v[1], v[2]}, v[3], ws_index); },
         {rnd({1, 2, 3, 3}, 30), rnd({1, 2, 3, 3}, 31), rnd({1, 2, 3, 3}, 32), rnd({1, 1, 1, 3}, 33)}},
        {"add", [](const Inputs& v) { return add(v[0], v[1]); }, {rnd({1, 2, 3, 3}, 34), rnd({1, 2, 3, 3}, 35)}},
        {"sub", [](const Inputs& v) { return sub(v[0], v[1]); }, {rnd({1, 2, 3, 3}, 36), rnd({1, 2, 3, 3}, 37)}},
        {"scale", [](const Inputs& v) { return scale(v[0], -1.7); }, {rnd({1, 2, 3, 3}, 38)}},
        {"log10", [](const Inputs& v) { return log10(v[0]); }, {rnd({1, 2, 3, 3}, 39, 0.2, 2.0)}},
        {"clamp_min", [](const Inputs& v) { return clamp_min(v[0], 0.0); }, {away_from_zero(rnd({1, 2, 3, 3}, 40))}},
        {"sum", [](const Inputs& v) { return sum(v[0]); }, {rnd({1, 2, 3, 3}, 41)}},
        {"mean", [](const Inputs& v) { return mean(v[0]); }, {rnd({1, 2, 3, 3}, 42)}},
        {"mse", [](const Inputs& v) { return mse(v[0], v[1]); }, {rnd({1, 2, 3, 3}, 43), rnd({1, 2, 3, 3}, 44)}},
        {"ssim", [](const Inputs& v) { return ssim(v[0], v[1]); },
         {rnd({1, 3, 14, 14}, 45, 0, 1), rnd({1, 3, 14, 14}, 46, 0, 1)}},
        {"l_ssim", [](const Inputs& v) { return l_ssim(v[0], v[1]); },
         {rnd({1, 3, 13, 13}, 47, 0.3, 0.7), rnd({1, 3, 13, 13}, 48, 0.3, 0.7)}},
        {"restoration_loss", [](const Inputs& v) { return restoration_loss(v[0], v[1]); },
         {rnd({2, 3, 12, 12}, 49, 0.3, 0.7), rnd({2, 3, 12, 12}, 50, 0.3, 0.7)}},
    };

    double worst = 0.0;
    std::string worst_name;
    for (const auto& c : cases) {
        const auto r = grad_check<double>(c.f, c.in, 1e-6, 99);
        std::cerr << "  [1] " << c.name << ": rel " << r.rel_error << " over " << r.probes << " probes\n";
        if (r.rel_error >= worst) {
            worst = r.rel_error;
            worst_name = c.name;
        }
    }

    // End to end: every parameter kind of a tiny supernet, random probes.
    SuperNetConfig sc;
    sc.W = 2;
    sc.N = 2;
    sc.L = 2;
    sc.seed = 11;
    SuperNet<double> net(sc);
    // 12x12 leaves room for the SSIM window; the target stays near the input
    // so SSIM sits well above the loss floor.
    const auto x = random_tensor<double>(Shape{2, 3, 12, 12}, 60, 0, 1);
    auto target = random_tensor<double>(Shape{2, 3, 12, 12}, 61, -0.1, 0.1);
    for (std::size_t i = 0; i < target.numel(); ++i) target.values()[i] += x.values()[i];
    std::mt19937_64 rng(3);
    for (auto& p : net.arch_parameters()) {
        for (auto& v : p.tensor.values()) v = std::normal_distribution<double>(0.0, 0.5)(rng);
    }
    auto params = net.registry().params;
    for (const auto& p : net.arch_parameters()) params.push_back(p);
    std::vector<GradProbe<double>> probes;
    for (int k = 0; k < 60; ++k) {
        const auto& p = params[std::uniform_int_distribution<std::size_t>(0, params.size() - 1)(rng)];
        probes.push_back({p.tensor, std::uniform_int_distribution<std::size_t>(0, p.tensor.numel() - 1)(rng)});
    }
    const auto e2e = grad_check_probes<double>(
        [&] { return restoration_loss(net.forward(x, true), target); }, probes, 1e-6);
    std::cerr << "  [1] end-to-end supernet: rel " << e2e.rel_error << " over " << e2e.probes << " probes\n";

    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = worst < kPrimitiveGradTol && e2e.rel_error < kEndToEndGradTol && secs < kGradSuiteSeconds;
    o.detail = std::to_string(cases.size()) + " primitives worst " + fmt("%.2e", worst) + " (" + worst_name +
               ") < 1e-6, end-to-end " + fmt("%.2e", e2e.rel_error) + " < 1e-4, " + fmt("%.1f", secs) +
               " s < 300 s";
    return o;
}

// ---------------------------------------------------------------- 2. decoding

Outcome criterion_decoding() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> d(0.0, 1.5);
    int mismatches = 0, total = 0;
    for (int L = 2; L <= 6; ++L) {
        for (int draw = 0; draw < kDecodeDraws; ++draw) {
            BetaTable b(L);
            for (auto& layer : b.raw)
                for (auto& v : layer)
                    for (auto& x : v) x = d(rng);
            if (viterbi_widths(b) != brute_force_widths(b)) ++mismatches;
            ++total;
        }
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < kDecodeSeconds,
            std::to_string(mismatches) + " mismatches over " + std::to_string(total) + " draws (L=2..6), " +
                fmt("%.2f", secs) + " s < 10 s"};
}

// ---------------------------------------------------------------- 3. cell sharing

Outcome criterion_sharing() {
    const auto t0 = Clock::now();
    auto make = [](bool sharing) {
        SuperNetConfig c;
        c.W = 4;
        c.N = 3;
        c.L = 3;
        c.cell_sharing = sharing;
        c.seed = 5;
        return std::make_unique<SuperNet<float>>(c);
    };
    auto shared = make(true);
    auto unshared = make(false);
    const auto x = random_tensor<float>(Shape{2, 3, 16, 16}, 1, 0, 1);

    // Invocation counts and output shapes.
    shared->reset_call_counters();
    unshared->reset_call_counters();
    const auto ys = shared->forward(x, true);
    const auto yu = unshared->forward(x, true);
    bool calls_ok = true;
    std::string calls;
    for (int l = 0; l < 3; ++l) {
        for (int i : levels_at(l)) {
            const auto cs = shared->cell_calls(l, i);
            const auto cu = unshared->cell_calls(l, i);
            const auto ns = shared->sources(l, i).size();
            calls_ok = calls_ok && cs == 1 && cu == ns;
            calls += (calls.empty() ? "" : " ") + std::to_string(cs) + "/" + std::to_string(cu);
        }
    }
    const bool interior_three = unshared->cell_calls(2, 1) == 3;
    const bool shapes_ok = ys.shape() == yu.shape() && ys.shape() == x.shape();

    // Live activations held by the interior level (layer 2, level 1), with
    // identical incoming features for both modes.
    auto interior_live = [&](SuperNet<float>& net) {
        using F = SuperNet<float>::LevelFeatures;
        F stem{{0, net.stem_forward(x)}};
        F f0 = net.layer_forward(0, stem, stem, true);
        F f1 = net.layer_forward(1, f0, stem, true);
        const long long before = ActivationStats::current().live_elements;
        const auto out = net.level_forward(2, 1, f1, f0, true);
        return ActivationStats::current().live_elements - before;
    };
    auto whole_live = [&](SuperNet<float>& net) {
        const long long before = ActivationStats::current().live_elements;
        const auto y = net.forward(x, true);
        return ActivationStats::current().live_elements - before;
    };
    const double interior = static_cast<double>(interior_live(*unshared)) / static_cast<double>(interior_live(*shared));
    const double whole = static_cast<double>(whole_live(*unshared)) / static_cast<double>(whole_live(*shared));
    std::cerr << "  [3] calls shared/unshared per (layer, level): " << calls << "\n";
    std::cerr << "  [3] live-activation ratio: interior " << interior << ", whole network " << whole << "\n";

    const double secs = seconds_since(t0);
    return {calls_ok && interior_three && shapes_ok && interior >= kSharingRatioMin && secs < kMinuteSeconds,
            std::string("calls 1 vs |sources| ") + (calls_ok && interior_three ? "ok" : "WRONG") +
                " (interior 1 vs 3), interior live ratio " + fmt("%.2f", interior) + " >= 2.5 (whole net " +
                fmt("%.2f", whole) + ", informational), shapes " + (shapes_ok ? "equal" : "DIFFER") + ", " +
                fmt("%.1f", secs) + " s < 60 s"};
}

// ---------------------------------------------------------------- 4. loss composition

Outcome criterion_loss() {
    const auto t0 = Clock::now();
    double comp = 0.0, self = 0.0, ref = 0.0;
    for (int k = 0; k < kSsimPairs; ++k) {
        const auto x = random_tensor<double>(Shape{1, 3, 24, 24}, 100 + k, 0, 1);
        auto y = x.detach();
        const auto n = random_tensor<double>(Shape{1, 3, 24, 24}, 200 + k, -0.2, 0.2);
        for (std::size_t i = 0; i < y.numel(); ++i) y.values()[i] = std::clamp(y.values()[i] + n.values()[i], 0.0, 1.0);
        const double total = restoration_loss(x, y).item();
        const double parts = mse(x, y).item() + 0.6 * l_ssim(x, y).item();
        comp = std::max(comp, std::abs(total - parts));
        self = std::max(self, std::abs(l_ssim(x, x).item()));
        // Independent pairs for the reference comparison.
        const auto a = random_tensor<double>(Shape{1, 3, 20, 20}, 300 + k, 0, 1);
        const auto b = random_tensor<double>(Shape{1, 3, 20, 20}, 400 + k, 0, 1);
        ref = std::max(ref, std::abs(ssim(a, b).item() - reference_ssim(a, b)));
    }
    const double secs = seconds_since(t0);
    return {comp < kLossCompositionTol && self == 0.0 && ref < kSsimReferenceTol && secs < kMinuteSeconds,
            "composition diff " + fmt("%.2e", comp) + " < 1e-7, l_ssim(x,x) = " + fmt("%g", self) +
                ", SSIM vs reference " + fmt("%.2e", ref) + " < 1e-6 on 20 pairs, " + fmt("%.2f", secs) +
                " s < 60 s"};
}

// ---------------------------------------------------------------- 5. residual framing

Outcome criterion_residual() {
    const auto t0 = Clock::now();
    const auto x = random_tensor<double>(Shape{1, 3, 16, 16}, 5, 0, 1);
    auto zero_tail = [](SuperNet<double>& net) {
        for (auto& v : net.tail_final().weight.values()) v = 0.0;
        for (auto& v : net.tail_final().bias.values()) v = 0.0;
    };
    SuperNetConfig c;
    c.W = 2;
    c.N = 2;
    c.L = 2;
    c.seed = 9;
    SuperNet<double> den(c);
    zero_tail(den);
    const double dn = hinas::testing::max_abs_diff(den.forward(x, true), x);
    double sr = 0.0;
    for (int S : {2, 3, 4}) {
        c.task = RestorationTask::super_resolve(S);
        SuperNet<double> net(c);
        zero_tail(net);
        sr = std::max(sr, hinas::testing::max_abs_diff(net.forward(x, true), bicubic_resize(x, S, ResizeDirection::Up)));
    }
    const double secs = seconds_since(t0);
    return {dn <= kResidualTol && sr <= kResidualTol && secs < kMinuteSeconds,
            "denoise |y-x| " + fmt("%.2e", dn) + " <= 1e-6, SR x2/x3/x4 |y-bicubic| " + fmt("%.2e", sr) +
                " <= 1e-6, " + fmt("%.2f", secs) + " s < 60 s"};
}

// ---------------------------------------------------------------- 6. genotype validity

// Checks written out here rather than through the library's validate().
std::string genotype_violation(const CellGenotype& g, int N) {
    if (static_cast<int>(g.picks.size()) != N) return "node count";
    for (int i = 0; i < N; ++i) {
        if (g.picks[i].size() != 2) return "pick count";
        for (const Pick& p : g.picks[i]) {
            if (p.op == OpKind::None) return "None picked";
            if (p.input < 0 || p.input >= 2 + i) return "input index";
        }
    }
    return "";
}

std::string path_violation(const WidthPath& w, int L) {
    if (static_cast<int>(w.levels.size()) != L) return "path length";
    int prev = 0;
    for (int l = 0; l < L; ++l) {
        const int v = w.levels[l];
        if (v < 0 || v > std::min(l + 1, kMaxLevel)) return "unavailable level";
        if (std::abs(v - prev) > 1) return "step > 1";
        prev = v;
    }
    return "";
}

Outcome criterion_genotypes() {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> d(0.0, 2.0);
    int failures = 0;
    std::string first;
    auto note = [&](const std::string& what, int k) {
        if (what.empty()) return;
        if (failures++ == 0) first = what + " in case " + std::to_string(k);
    };
    for (int k = 0; k < kGenotypeCases; ++k) {
        const int N = 1 + k % 5;
        const int L = 1 + k % 6;
        // Derived from random alphas, including heavy ties every fourth case.
        std::vector<std::vector<double>> alpha(edge_count(N), std::vector<double>(kNumOps));
        for (auto& e : alpha)
            for (auto& v : e) v = k % 4 == 3 ? std::round(d(rng) / 3.0) : d(rng);
        note(genotype_violation(derive_cell(alpha, N), N), k);
        // Random architectures.
        const auto ra = random_architecture(N, L, k % 2 == 0, static_cast<std::uint64_t>(k));
        for (const auto& g : ra.genotypes) note(genotype_violation(g, N), k);
        note(path_violation(ra.path, L), k);
        // Viterbi paths from random betas.
        BetaTable b(L);
        for (auto& layer : b.raw)
            for (auto& v : layer)
                for (auto& x : v) x = d(rng);
        note(path_violation(viterbi_widths(b), L), k);
        // Full derivation from a supernet with perturbed parameters, every tenth case.
        if (k % 10 == 0) {
            SuperNetConfig c;
            c.W = 2;
            c.N = N;
            c.L = L;
            c.cell_sharing = true;
            c.seed = static_cast<std::uint64_t>(k);
            SuperNet<float> net(c);
            for (auto& p : net.arch_parameters())
                for (auto& v : p.tensor.values()) v = static_cast<float>(d(rng));
            const auto a = derive_architecture(net);
            for (const auto& g : a.genotypes) note(genotype_violation(g, N), k);
            note(path_violation(a.path, L), k);
        }
    }
    return {failures == 0, std::to_string(failures) + " failures over " + std::to_string(kGenotypeCases) +
                               " cases (derived, random, Viterbi, supernet)" +
                               (first.empty() ? "" : ", first: " + first)};
}

// ---------------------------------------------------------------- 7-9. desk runs

RunConfig desk_config(std::uint64_t seed) {
    RunConfig c;
    c.data.task = "denoise";
    c.data.sigma = 25.0;
    c.data.synth = "mixed";
    c.data.count = 40;
    c.data.test_count = 10;
    c.data.size = 64;
    c.search.W = 4;
    c.search.N = 3;
    c.search.L = 2;
    c.search.epochs_max = 30;
    c.train.iterations = 2000;
    apply_seed(c, seed);
    validate(c.data);
    validate(c.search);
    validate(c.train);
    return c;
}

struct DeskRun {
    SearchResult search;
    TrainResult<float> train;
    EvalReport test;
    EvalReport test_input;
    double seconds = 0.0;
};

DeskRun desk_run(const RunConfig& cfg, const std::string& label) {
    const auto t0 = Clock::now();
    const auto ds = build_dataset<float>(cfg.data, cfg.search.residual);
    DeskRun r;
    r.search = run_search(cfg, ds);
    r.train = run_train(cfg, r.search.architecture, ds);
    r.test = run_eval(*r.train.net, ds.test, cfg.train.tile);
    r.test_input = evaluate_identity(ds.test, ds.task);
    r.seconds = seconds_since(t0);
    std::cerr << "  [desk] " << label << ": search best val " << r.search.best_val_psnr << " dB (epoch "
              << r.search.best_epoch << "), train val " << r.train.final_val_psnr << " dB / SSIM "
              << r.train.final_val_ssim << ", test " << r.test.mean_psnr << " dB vs input " << r.test_input.mean_psnr
              << " dB, " << r.seconds << " s\n";
    return r;
}

class DeskCache {
public:
    const DeskRun& get(const std::string& key, const RunConfig& cfg) {
        auto it = runs_.find(key);
        if (it == runs_.end()) it = runs_.emplace(key, desk_run(cfg, key)).first;
        return it->second;
    }

private:
    std::map<std::string, DeskRun> runs_;
};

std::string desk_key(const char* arm, std::uint64_t seed) { return std::string(arm) + " seed " + std::to_string(seed); }

Outcome criterion_desk(DeskCache& cache) {
    const auto& r = cache.get(desk_key("base", kDeskSeed), desk_config(kDeskSeed));
    const double gain = r.test.mean_psnr - r.test_input.mean_psnr;
    return {gain >= kDeskGainDb && r.seconds < kDeskSeconds,
            "seed " + std::to_string(kDeskSeed) + ": " + fmt("%.2f", r.test.mean_psnr) + " dB vs noisy input " +
                fmt("%.2f", r.test_input.mean_psnr) + " dB, gain " + fmt("%.2f", gain) + " >= 2 dB on " +
                std::to_string(r.test.images.size()) + " held-out images, " + fmt("%.0f", r.seconds) +
                " s < 1800 s"};
}

Outcome criterion_ablation(DeskCache& cache) {
    double base_psnr = 0, base_ssim = 0, off_psnr = 0, l0_ssim = 0;
    for (auto seed : kAblationSeeds) {
        const auto& base = cache.get(desk_key("base", seed), desk_config(seed));
        RunConfig off = desk_config(seed);
        off.search.residual = false;
        off.train.residual = false;
        const auto& r_off = cache.get(desk_key("residual-off", seed), off);
        RunConfig l0 = desk_config(seed);
        l0.search.loss.lambda = 0.0;
        l0.train.loss.lambda = 0.0;
        const auto& r_l0 = cache.get(desk_key("lambda-0", seed), l0);
        base_psnr += base.train.final_val_psnr;
        base_ssim += base.train.final_val_ssim;
        off_psnr += r_off.train.final_val_psnr;
        l0_ssim += r_l0.train.final_val_ssim;
    }
    const double n = static_cast<double>(kAblationSeeds.size());
    base_psnr /= n;
    base_ssim /= n;
    off_psnr /= n;
    l0_ssim /= n;
    const bool residual_ok = base_psnr >= off_psnr - kPsnrTieDb;
    const bool lambda_ok = base_ssim >= l0_ssim - kSsimTie;
    return {residual_ok && lambda_ok,
            "val PSNR residual on " + fmt("%.2f", base_psnr) + " vs off " + fmt("%.2f", off_psnr) + " dB (" +
                (residual_ok ? "ok" : "WRONG SIGN") + "), val SSIM lambda 0.6 " + fmt("%.4f", base_ssim) +
                " vs 0 " + fmt("%.4f", l0_ssim) + " (" + (lambda_ok ? "ok" : "WRONG SIGN") + "), mean of " +
                std::to_string(kAblationSeeds.size()) + " seeds, ties 0.05 dB / 0.002"};
}

Outcome criterion_determinism(DeskCache& cache) {
    const auto& a = cache.get(desk_key("base", kDeskSeed), desk_config(kDeskSeed));
    const DeskRun b = desk_run(desk_config(kDeskSeed), desk_key("repeat", kDeskSeed));
    const auto pa = a.train.net->registry().params;
    const auto pb = b.train.net->registry().params;
    bool params_equal = pa.size() == pb.size();
    for (std::size_t k = 0; params_equal && k < pa.size(); ++k) {
        params_equal = pa[k].name == pb[k].name && pa[k].tensor.values() == pb[k].tensor.values();
    }
    const bool search_equal = a.search.final_checkpoint == b.search.final_checkpoint;
    const bool metrics_equal = a.search.metrics == b.search.metrics && a.train.metrics == b.train.metrics;
    return {params_equal && search_equal && metrics_equal,
            std::string("final compact params ") + (params_equal ? "bit-identical" : "DIFFER") +
                ", supernet checkpoint " + (search_equal ? "identical" : "DIFFERS") + ", metrics.jsonl (" +
                std::to_string(a.search.metrics.size() + a.train.metrics.size()) + " lines) " +
                (metrics_equal ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria 1-9"};
    std::vector<int> only;
    app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 9));
    CLI11_PARSE(app, argc, argv);
    const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9}
                                                : std::set<int>(only.begin(), only.end());

    DeskCache cache;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient correctness", criterion_gradients},
        {"decoding oracle equivalence", criterion_decoding},
        {"cell-sharing contract", criterion_sharing},
        {"loss composition", criterion_loss},
        {"residual framing", criterion_residual},
        {"genotype validity", criterion_genotypes},
        {"end-to-end desk run", [&] { return criterion_desk(cache); }},
        {"ablation directions", [&] { return criterion_ablation(cache); }},
        {"determinism", [&] { return criterion_determinism(cache); }},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!selected.contains(id)) continue;
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[k].first
                  << "): " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
