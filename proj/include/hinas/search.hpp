#pragma once
// The alternating search loop: kernel-only warmup on Train W, then per
// iteration one SGD kernel step on a W batch and one Adam architecture step on
// an A batch. From eval_from_epoch the supernet is evaluated on V every epoch
// and the best checkpoint is kept; the architecture is derived from it.

#include <json.hpp>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "hinas/checkpoint.hpp"
#include "hinas/config.hpp"
#include "hinas/dataset.hpp"
#include "hinas/decode.hpp"
#include "hinas/evaluate.hpp"
#include "hinas/optim.hpp"
#include "hinas/supernet.hpp"

namespace hinas {

enum class Split : int { W = 0, A = 1, V = 2 };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::W: return "W";
        case Split::A: return "A";
        case Split::V: return "V";
    }
    return "?";
}

template <typename T>
struct Batch {
    Tensor<T> input;
    Tensor<T> target;
    Split split = Split::W;
};

template <typename T>
Batch<T> draw_batch(const std::vector<ImagePair<T>>& pool, Split split, int batch, int patch, bool augment,
                    std::mt19937_64& rng) {
    if (pool.empty()) throw ConfigError(std::string("split ") + split_name(split) + " is empty");
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<Tensor<T>> in, tgt;
    for (int b = 0; b < batch; ++b) {
        auto s = sample_patch(pool[pick(rng)], patch, augment, rng);
        in.push_back(s.pair.degraded);
        tgt.push_back(s.pair.clean);
    }
    return {stack_batch(in), stack_batch(tgt), split};
}

// One JSON object per line: {"step", "epoch", "split", "loss", "psnr", "ssim"}.
class MetricsLog {
public:
    MetricsLog() = default;
    explicit MetricsLog(const std::string& path) {
        if (path.empty()) return;
        const auto parent = std::filesystem::path(path).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        out_.open(path);
        if (!out_) throw ConfigError("cannot write '" + path + "'");
    }
    void write(const nlohmann::json& record) {
        lines_.push_back(record.dump());
        if (out_.is_open()) out_ << lines_.back() << "\n" << std::flush;
    }
    [[nodiscard]] const std::vector<std::string>& lines() const { return lines_; }

private:
    std::ofstream out_;
    std::vector<std::string> lines_;
};

inline SuperNetConfig supernet_config(const RunConfig& c) {
    SuperNetConfig s;
    s.W = c.search.W;
    s.N = c.search.N;
    s.L = c.search.L;
    s.task = make_task(c.data, c.search.residual);
    s.lwas = c.search.lwas;
    s.cell_sharing = c.search.cell_sharing;
    s.seed = c.search.seed;
    return s;
}

template <typename T>
nlohmann::json supernet_checkpoint(SuperNet<T>& net, const RunConfig& cfg, int epoch, long long step,
                                   const SgdState& sgd, const AdamState& adam, const std::mt19937_64& rng,
                                   const nlohmann::json& metrics) {
    const auto reg = net.kernel_registry();
    return {{"format", kCheckpointFormat},
            {"kind", "supernet"},
            {"config", to_json(cfg)},
            {"epoch", epoch},
            {"step", step},
            {"params", tensors_to_json(reg.params)},
            {"bn", bn_to_json(reg)},
            {"arch", tensors_to_json(net.arch_parameters())},
            {"optimizer", {{"sgd", to_json(sgd)}, {"adam", to_json(adam)}}},
            {"rng", rng_state(rng)},
            {"metrics", metrics}};
}

template <typename T>
void restore_supernet(SuperNet<T>& net, const nlohmann::json& ckpt) {
    if (ckpt.at("kind") != "supernet") throw ConfigError("checkpoint is not a supernet checkpoint");
    auto reg = net.kernel_registry();
    tensors_from_json(ckpt.at("params"), reg.params);
    bn_from_json(ckpt.at("bn"), reg);
    auto arch = net.arch_parameters();
    tensors_from_json(ckpt.at("arch"), arch);
}

template <typename T>
std::unique_ptr<SuperNet<T>> load_supernet(const nlohmann::json& ckpt) {
    const RunConfig cfg = config_from_json(ckpt.at("config"));
    auto net = std::make_unique<SuperNet<T>>(supernet_config(cfg));
    restore_supernet(*net, ckpt);
    return net;
}

struct SearchResult {
    int best_epoch = 0;
    double best_val_psnr = 0.0;
    double best_val_ssim = 0.0;
    double final_val_psnr = 0.0;  // at the last evaluated epoch
    Architecture architecture;
    std::string checkpoint_path;      // empty when no out_dir was given
    nlohmann::json best_checkpoint;   // in-memory copy of the best checkpoint
    nlohmann::json final_checkpoint;  // state after the last epoch
    long long kernel_steps = 0;
    long long arch_steps = 0;
    std::array<long long, 3> grad_batches{0, 0, 0};  // gradient steps per split W, A, V
    std::vector<std::string> metrics;                // metrics.jsonl lines
    std::vector<std::string> val_ids;
};

inline nlohmann::json to_json(const SearchResult& r) {
    return {{"best_epoch", r.best_epoch},
            {"best_val_psnr", r.best_val_psnr},
            {"best_val_ssim", r.best_val_ssim},
            {"final_val_psnr", r.final_val_psnr},
            {"architecture", to_json(r.architecture)},
            {"checkpoint", r.checkpoint_path},
            {"kernel_steps", r.kernel_steps},
            {"arch_steps", r.arch_steps}};
}

struct SearchSplits {
    std::vector<std::string> w, a, v;
};

template <typename T>
SearchSplits search_splits(const RunConfig& cfg, const Dataset<T>& ds) {
    const auto split = split_wav(pair_ids(ds.train), SplitSpec{cfg.data.frac_val, cfg.data.seed});
    return {split.train_w, split.train_a, split.val};
}

template <typename T>
SearchResult run_search(const RunConfig& cfg, const Dataset<T>& ds, const std::string& out_dir = "",
                        std::ostream* log = nullptr) {
    validate(cfg.search);
    namespace fs = std::filesystem;
    const SearchConfig& sc = cfg.search;
    const auto splits = search_splits(cfg, ds);
    const auto pool_w = select_pairs(ds.train, splits.w);
    const auto pool_a = select_pairs(ds.train, splits.a);
    const auto pool_v = select_pairs(ds.train, splits.v);
    if (pool_w.empty() || pool_a.empty() || pool_v.empty()) throw ConfigError("search needs non-empty W, A and V");

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_json_file((fs::path(out_dir) / "config_echo.json").string(), to_json(cfg), 2);
    }
    MetricsLog metrics(out_dir.empty() ? "" : (fs::path(out_dir) / "metrics.jsonl").string());

    SuperNet<T> net(supernet_config(cfg));
    auto kernel = net.kernel_registry().params;
    auto arch = net.arch_parameters();
    SgdState sgd;
    AdamState adam;
    std::mt19937_64 rng(sc.seed ^ 0x9e3779b97f4a7c15ULL);
    const RestorationTask task = net.config().task;
    const int iters = static_cast<int>(
        (pool_w.size() * static_cast<std::size_t>(sc.patches_per_image) + sc.batch_size - 1) / sc.batch_size);

    SearchResult res;
    res.val_ids = splits.v;
    bool evaluated = false;
    long long step = 0;

    auto check_loss = [&](const Tensor<T>& loss, int epoch) {
        if (std::isfinite(static_cast<double>(loss.item()))) return;
        if (!out_dir.empty()) {
            write_json_file((fs::path(out_dir) / "failure.ckpt.json").string(),
                            supernet_checkpoint(net, cfg, epoch, step, sgd, adam, rng, nlohmann::json::object()));
        }
        throw NumericError("non-finite search loss at epoch " + std::to_string(epoch));
    };
    auto gradient_step = [&](const Batch<T>& b, Split expected, int epoch) {
        if (b.split != expected || b.split == Split::V) throw std::logic_error("batch from the wrong split");
        zero_grads(kernel);
        zero_grads(arch);
        Tensor<T> pred = net.forward(b.input, true);
        Tensor<T> loss = restoration_loss(pred, b.target, sc.loss);
        check_loss(loss, epoch);
        const double l = loss.item();
        backward(loss);
        ++res.grad_batches[static_cast<int>(b.split)];
        NoGradGuard ng;
        return std::array<double, 3>{l, psnr(pred, b.target), static_cast<double>(ssim(pred, b.target).item())};
    };

    for (int epoch = 1; epoch <= sc.epochs_max; ++epoch) {
        const double lr = cosine_lr(epoch - 1, sc.epochs_max, sc.sgd.lr_max, sc.sgd.lr_min);
        const bool arch_phase = epoch > sc.warmup_epochs;
        std::array<double, 3> sum_w{0, 0, 0}, sum_a{0, 0, 0};
        for (int it = 0; it < iters; ++it) {
            const auto bw = draw_batch(pool_w, Split::W, sc.batch_size, sc.patch, false, rng);
            const auto mw = gradient_step(bw, Split::W, epoch);
            clip_grad_norm(kernel, sc.sgd.grad_clip);
            sgd_step(kernel, sgd, lr, sc.sgd.momentum, sc.sgd.weight_decay);
            ++res.kernel_steps;
            for (int k = 0; k < 3; ++k) sum_w[k] += mw[k];
            if (arch_phase) {
                const auto ba = draw_batch(pool_a, Split::A, sc.batch_size, sc.patch, false, rng);
                const auto ma = gradient_step(ba, Split::A, epoch);
                adam_step(arch, adam, sc.adam.lr, sc.adam.weight_decay);
                ++res.arch_steps;
                for (int k = 0; k < 3; ++k) sum_a[k] += ma[k];
            }
            ++step;
        }
        auto record = [&](const char* split, const std::array<double, 3>& sum) {
            metrics.write({{"step", step},
                           {"epoch", epoch},
                           {"split", split},
                           {"loss", sum[0] / iters},
                           {"psnr", sum[1] / iters},
                           {"ssim", sum[2] / iters}});
        };
        record("W", sum_w);
        if (arch_phase) record("A", sum_a);

        const bool last = epoch == sc.epochs_max;
        if (epoch >= sc.eval_from_epoch || (last && !evaluated)) {
            const auto report = evaluate<T>([&](const Tensor<T>& x) { return net.forward(x, false); }, pool_v, task,
                                            sc.tile, sc.loss);
            metrics.write({{"step", step},
                           {"epoch", epoch},
                           {"split", "V"},
                           {"loss", report.mean_loss},
                           {"psnr", report.mean_psnr},
                           {"ssim", report.mean_ssim}});
            res.final_val_psnr = report.mean_psnr;
            if (!evaluated || report.mean_psnr > res.best_val_psnr) {
                res.best_epoch = epoch;
                res.best_val_psnr = report.mean_psnr;
                res.best_val_ssim = report.mean_ssim;
                res.best_checkpoint = supernet_checkpoint(
                    net, cfg, epoch, step, sgd, adam, rng,
                    {{"val_psnr", report.mean_psnr}, {"val_ssim", report.mean_ssim}});
                if (!out_dir.empty()) {
                    res.checkpoint_path = (fs::path(out_dir) / "best.ckpt.json").string();
                    write_json_file(res.checkpoint_path, res.best_checkpoint);
                }
            }
            evaluated = true;
        }
        if (log != nullptr) {
            *log << "epoch " << epoch << "/" << sc.epochs_max << " lr " << lr << " W loss " << sum_w[0] / iters;
            if (arch_phase) *log << " A loss " << sum_a[0] / iters;
            if (res.best_epoch == epoch) *log << " val psnr " << res.best_val_psnr << " (best)";
            *log << "\n";
        }
    }

    res.final_checkpoint = supernet_checkpoint(net, cfg, sc.epochs_max, step, sgd, adam, rng,
                                               {{"val_psnr", res.final_val_psnr}});
    // Derive from the best checkpoint, not the final state.
    SuperNet<T> best(supernet_config(cfg));
    restore_supernet(best, res.best_checkpoint);
    res.architecture = derive_architecture(best);
    res.metrics = metrics.lines();
    if (!out_dir.empty()) {
        write_json_file((fs::path(out_dir) / "final.ckpt.json").string(), res.final_checkpoint);
        write_json_file((fs::path(out_dir) / "architecture.json").string(), to_json(res.architecture), 2);
        write_json_file((fs::path(out_dir) / "search_result.json").string(), to_json(res), 2);
    }
    return res;
}

}  // namespace hinas
