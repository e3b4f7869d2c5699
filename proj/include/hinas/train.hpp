#pragma once
// Training of the compact network from a derived architecture, and evaluation
// of a trained network on a dataset.

#include <json.hpp>

#include <cmath>
#include <deque>
#include <filesystem>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "hinas/checkpoint.hpp"
#include "hinas/compact_net.hpp"
#include "hinas/search.hpp"

namespace hinas {

inline CompactNetConfig compact_config(const RunConfig& c) {
    CompactNetConfig cc;
    cc.W = c.train.W;
    cc.task = make_task(c.data, c.train.residual);
    cc.seed = c.train.seed;
    return cc;
}

template <typename T>
std::unique_ptr<CompactNet<T>> make_compact_net(const RunConfig& c, const Architecture& a) {
    return std::make_unique<CompactNet<T>>(a.genotypes, WidthSpec::from_path(a.path, c.train.W), compact_config(c));
}

template <typename T>
nlohmann::json compact_checkpoint(const CompactNet<T>& net, const RunConfig& cfg, const Architecture& a,
                                  long long step, const SgdState& sgd, const std::mt19937_64& rng,
                                  const nlohmann::json& metrics) {
    const auto reg = net.registry();
    return {{"format", kCheckpointFormat},
            {"kind", "compact"},
            {"config", to_json(cfg)},
            {"architecture", to_json(a)},
            {"step", step},
            {"params", tensors_to_json(reg.params)},
            {"bn", bn_to_json(reg)},
            {"optimizer", {{"sgd", to_json(sgd)}}},
            {"rng", rng_state(rng)},
            {"metrics", metrics}};
}

template <typename T>
std::unique_ptr<CompactNet<T>> load_compact(const nlohmann::json& ckpt) {
    if (ckpt.at("kind") != "compact") throw ConfigError("checkpoint is not a compact-network checkpoint");
    const RunConfig cfg = config_from_json(ckpt.at("config"));
    auto net = make_compact_net<T>(cfg, architecture_from_json(ckpt.at("architecture")));
    auto reg = net->registry();
    tensors_from_json(ckpt.at("params"), reg.params);
    bn_from_json(ckpt.at("bn"), reg);
    return net;
}

template <typename T>
struct TrainResult {
    std::unique_ptr<CompactNet<T>> net;  // final state
    double final_val_psnr = 0.0;
    double final_val_ssim = 0.0;
    double best_val_psnr = 0.0;
    long long best_step = 0;
    std::vector<double> losses;  // per-iteration training loss
    nlohmann::json best_checkpoint;
    nlohmann::json final_checkpoint;
    std::vector<std::string> metrics;
};

// Trains on W∪A of the search split and validates on V.
template <typename T>
TrainResult<T> run_train(const RunConfig& cfg, const Architecture& arch, const Dataset<T>& ds,
                         const std::string& out_dir = "", std::ostream* log = nullptr) {
    validate(cfg.train);
    namespace fs = std::filesystem;
    const TrainConfig& tc = cfg.train;
    const auto splits = search_splits(cfg, ds);
    auto pool = select_pairs(ds.train, splits.w);
    const auto pool_a = select_pairs(ds.train, splits.a);
    pool.insert(pool.end(), pool_a.begin(), pool_a.end());
    const auto pool_v = select_pairs(ds.train, splits.v);

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_json_file((fs::path(out_dir) / "config_echo.json").string(), to_json(cfg), 2);
        write_json_file((fs::path(out_dir) / "architecture.json").string(), to_json(arch), 2);
    }
    MetricsLog metrics(out_dir.empty() ? "" : (fs::path(out_dir) / "metrics.jsonl").string());

    TrainResult<T> res;
    res.net = make_compact_net<T>(cfg, arch);
    CompactNet<T>& net = *res.net;
    auto params = net.registry().params;
    SgdState sgd;
    std::mt19937_64 rng(tc.seed ^ 0x51ed2701a3b4c5d6ULL);
    const RestorationTask task = net.config().task;
    bool evaluated = false;
    double win_loss = 0.0, win_psnr = 0.0, win_ssim = 0.0;
    int win = 0;

    for (int it = 1; it <= tc.iterations; ++it) {
        const double lr = cosine_lr(it - 1, tc.iterations, tc.lr0, tc.lr_min);
        const auto b = draw_batch(pool, Split::W, tc.batch_size, tc.patch, tc.augment, rng);
        zero_grads(params);
        Tensor<T> pred = net.forward(b.input, true);
        Tensor<T> loss = restoration_loss(pred, b.target, tc.loss);
        const double l = loss.item();
        if (!std::isfinite(l)) {
            if (!out_dir.empty()) {
                write_json_file((fs::path(out_dir) / "failure.ckpt.json").string(),
                                compact_checkpoint(net, cfg, arch, it, sgd, rng, nlohmann::json::object()));
            }
            throw NumericError("non-finite training loss at iteration " + std::to_string(it));
        }
        backward(loss);
        clip_grad_norm(params, tc.grad_clip);
        sgd_step(params, sgd, lr, tc.momentum, tc.weight_decay);
        res.losses.push_back(l);
        {
            NoGradGuard ng;
            win_loss += l;
            win_psnr += psnr(pred, b.target);
            win_ssim += static_cast<double>(ssim(pred, b.target).item());
            ++win;
        }
        if (it % tc.log_every == 0 || it == tc.iterations) {
            metrics.write({{"step", it},
                           {"split", "train"},
                           {"loss", win_loss / win},
                           {"psnr", win_psnr / win},
                           {"ssim", win_ssim / win}});
            if (log != nullptr) *log << "iter " << it << "/" << tc.iterations << " loss " << win_loss / win << "\n";
            win_loss = win_psnr = win_ssim = 0.0;
            win = 0;
        }
        if (it % tc.eval_every == 0 || it == tc.iterations) {
            const auto report = evaluate<T>([&](const Tensor<T>& x) { return net.forward(x, false); }, pool_v, task,
                                            tc.tile, tc.loss);
            metrics.write({{"step", it},
                           {"split", "V"},
                           {"loss", report.mean_loss},
                           {"psnr", report.mean_psnr},
                           {"ssim", report.mean_ssim}});
            if (log != nullptr) *log << "  val psnr " << report.mean_psnr << " ssim " << report.mean_ssim << "\n";
            res.final_val_psnr = report.mean_psnr;
            res.final_val_ssim = report.mean_ssim;
            if (!evaluated || report.mean_psnr > res.best_val_psnr) {
                res.best_val_psnr = report.mean_psnr;
                res.best_step = it;
                res.best_checkpoint = compact_checkpoint(
                    net, cfg, arch, it, sgd, rng, {{"val_psnr", report.mean_psnr}, {"val_ssim", report.mean_ssim}});
                if (!out_dir.empty()) {
                    write_json_file((fs::path(out_dir) / "best.ckpt.json").string(), res.best_checkpoint);
                }
            }
            evaluated = true;
        }
    }
    res.final_checkpoint = compact_checkpoint(net, cfg, arch, tc.iterations, sgd, rng,
                                              {{"val_psnr", res.final_val_psnr}, {"val_ssim", res.final_val_ssim}});
    res.metrics = metrics.lines();
    if (!out_dir.empty()) {
        write_json_file((fs::path(out_dir) / "final.ckpt.json").string(), res.final_checkpoint);
    }
    return res;
}

// Evaluates a compact network on the given pairs with tiled inference.
template <typename T>
EvalReport run_eval(CompactNet<T>& net, const std::vector<ImagePair<T>>& pairs, int tile = 64) {
    return evaluate<T>([&](const Tensor<T>& x) { return net.forward(x, false); }, pairs, net.config().task, tile);
}

}  // namespace hinas
