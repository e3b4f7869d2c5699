#pragma once
// Run configuration: data, search and training settings, loaded from one JSON
// document with optional "data", "search" and "train" sections.

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include "hinas/loss.hpp"
#include "hinas/task.hpp"

namespace hinas {

// Invalid or inconsistent configuration; maps to exit code 1.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct DataConfig {
    std::string task = "denoise";  // denoise | sr
    int scale = 2;                 // sr only
    double sigma = 25.0;           // denoise only, 0-255 scale
    std::string synth = "mixed";   // textures | gradients | mixed
    int count = 40;                // training images (split into W/A/V)
    int test_count = 10;           // held-out images, generated from a separate seed
    int size = 64;
    double frac_val = 0.02;
    std::string manifest;  // optional PNG dataset manifest; overrides synth
    std::uint64_t seed = 7;
};

struct SgdConfig {
    double lr_max = 0.025;
    double lr_min = 0.001;
    double momentum = 0.9;
    double weight_decay = 3e-4;
    double grad_clip = 5.0;  // global L2 norm over kernel weights; 0 disables
    std::string schedule = "cosine";
};

struct AdamConfig {
    double lr = 1e-3;
    double weight_decay = 1e-3;
};

struct SearchConfig {
    int W = 4;
    int N = 3;
    int L = 2;
    int batch_size = 8;
    int patch = 32;
    int patches_per_image = 1;  // kernel steps per epoch = ceil(|W| * this / batch)
    int epochs_max = 30;
    int warmup_epochs = 6;
    int eval_from_epoch = 11;
    int tile = 64;
    SgdConfig sgd;
    AdamConfig adam;
    bool lwas = true;
    bool cell_sharing = true;
    bool residual = true;
    LossConfig loss;
    std::uint64_t seed = 7;
};

struct TrainConfig {
    int iterations = 2000;
    int W = 8;  // basic width of the compact net
    int batch_size = 8;
    int patch = 32;
    double lr0 = 0.05;
    double lr_min = 1e-4;
    double momentum = 0.9;
    double weight_decay = 3e-4;
    double grad_clip = 1.0;  // global L2 norm; 0 disables
    bool augment = true;
    bool residual = true;
    LossConfig loss;
    int eval_every = 500;
    int log_every = 50;
    int tile = 64;
    std::uint64_t seed = 7;
};

struct RunConfig {
    DataConfig data;
    SearchConfig search;
    TrainConfig train;
};

inline RestorationTask make_task(const DataConfig& d, bool residual) {
    if (d.task == "denoise") return RestorationTask::denoise(residual);
    if (d.task == "sr") {
        if (d.scale < 2 || d.scale > 4) throw ConfigError("data.scale must be 2, 3 or 4");
        return RestorationTask::super_resolve(d.scale, residual);
    }
    throw ConfigError("data.task must be 'denoise' or 'sr', got '" + d.task + "'");
}

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (!known.contains(k)) throw ConfigError("unknown key '" + k + "' in " + where);
    }
}

template <typename V>
void read(const nlohmann::json& j, const char* key, V& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<V>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

inline void read_loss(const nlohmann::json& j, LossConfig& l, const std::string& where) {
    reject_unknown(j, {"lambda", "use_ssim_term"}, where);
    read(j, "lambda", l.lambda);
    read(j, "use_ssim_term", l.use_ssim_term);
}

inline nlohmann::json loss_json(const LossConfig& l) {
    return {{"lambda", l.lambda}, {"use_ssim_term", l.use_ssim_term}};
}

}  // namespace detail

inline void validate(const DataConfig& d) {
    make_task(d, true);
    if (d.sigma < 0.0) throw ConfigError("data.sigma must be >= 0");
    if (d.count < 3 && d.manifest.empty()) throw ConfigError("data.count must be >= 3");
    if (d.test_count < 0) throw ConfigError("data.test_count must be >= 0");
    if (d.size < 32) throw ConfigError("data.size must be >= 32");
    if (!(d.frac_val > 0.0 && d.frac_val < 1.0)) throw ConfigError("data.frac_val must lie in (0, 1)");
    if (d.synth != "textures" && d.synth != "gradients" && d.synth != "mixed") {
        throw ConfigError("data.synth must be textures, gradients or mixed");
    }
}

// The warmup/eval ordering is relaxed to allow schedules that end during
// warmup or before evaluation begins; the final epoch is then evaluated.
inline void validate(const SearchConfig& s) {
    if (s.W < 1 || s.N < 1 || s.L < 1) throw ConfigError("search W, N and L must be positive");
    if (s.batch_size < 1 || s.patch < 1 || s.patches_per_image < 1 || s.tile < 1) {
        throw ConfigError("search batch_size, patch, patches_per_image and tile must be positive");
    }
    if (s.epochs_max < 1) throw ConfigError("search.epochs_max must be positive");
    if (s.warmup_epochs < 0 || s.warmup_epochs > s.epochs_max) {
        throw ConfigError("search.warmup_epochs must lie in [0, epochs_max]");
    }
    if (s.eval_from_epoch < 1) throw ConfigError("search.eval_from_epoch must be >= 1");
    if (!(s.sgd.lr_max > 0 && s.sgd.lr_min > 0 && s.adam.lr > 0)) throw ConfigError("learning rates must be > 0");
    if (s.sgd.lr_min > s.sgd.lr_max) throw ConfigError("search.sgd.lr_min exceeds lr_max");
    if (s.sgd.momentum < 0 || s.sgd.weight_decay < 0 || s.sgd.grad_clip < 0 || s.adam.weight_decay < 0) {
        throw ConfigError("momentum and weight decay must be >= 0");
    }
    if (s.sgd.schedule != "cosine") throw ConfigError("search.sgd.schedule must be 'cosine'");
    if (s.loss.lambda < 0) throw ConfigError("search.loss.lambda must be >= 0");
}

inline void validate(const TrainConfig& t) {
    if (t.iterations < 1) throw ConfigError("train.iterations must be positive");
    if (t.W < 1 || t.batch_size < 1 || t.patch < 1 || t.tile < 1) {
        throw ConfigError("train W, batch_size, patch and tile must be positive");
    }
    if (!(t.lr0 > 0) || t.lr_min < 0 || t.lr_min > t.lr0) throw ConfigError("train learning rates invalid");
    if (t.momentum < 0 || t.weight_decay < 0 || t.grad_clip < 0) throw ConfigError("train momentum/decay/clip < 0");
    if (t.eval_every < 1 || t.log_every < 1) throw ConfigError("train eval_every and log_every must be positive");
    if (t.loss.lambda < 0) throw ConfigError("train.loss.lambda must be >= 0");
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    using detail::read;
    detail::reject_unknown(j, {"data", "search", "train"}, "config");
    RunConfig c;
    if (j.contains("data")) {
        const auto& d = j.at("data");
        detail::reject_unknown(d, {"task", "scale", "sigma", "synth", "count", "test_count", "size", "frac_val",
                                   "manifest", "seed"},
                               "data");
        read(d, "task", c.data.task);
        read(d, "scale", c.data.scale);
        read(d, "sigma", c.data.sigma);
        read(d, "synth", c.data.synth);
        read(d, "count", c.data.count);
        read(d, "test_count", c.data.test_count);
        read(d, "size", c.data.size);
        read(d, "frac_val", c.data.frac_val);
        read(d, "manifest", c.data.manifest);
        read(d, "seed", c.data.seed);
    }
    if (j.contains("search")) {
        const auto& s = j.at("search");
        detail::reject_unknown(s, {"W", "N", "L", "batch_size", "patch", "patches_per_image", "epochs_max",
                                   "warmup_epochs", "eval_from_epoch", "tile", "sgd", "adam", "lwas",
                                   "cell_sharing", "residual", "loss", "seed"},
                               "search");
        read(s, "W", c.search.W);
        read(s, "N", c.search.N);
        read(s, "L", c.search.L);
        read(s, "batch_size", c.search.batch_size);
        read(s, "patch", c.search.patch);
        read(s, "patches_per_image", c.search.patches_per_image);
        read(s, "epochs_max", c.search.epochs_max);
        read(s, "warmup_epochs", c.search.warmup_epochs);
        read(s, "eval_from_epoch", c.search.eval_from_epoch);
        read(s, "tile", c.search.tile);
        read(s, "lwas", c.search.lwas);
        read(s, "cell_sharing", c.search.cell_sharing);
        read(s, "residual", c.search.residual);
        read(s, "seed", c.search.seed);
        if (s.contains("sgd")) {
            const auto& g = s.at("sgd");
            detail::reject_unknown(g, {"lr_max", "lr_min", "momentum", "weight_decay", "grad_clip", "schedule"}, "search.sgd");
            read(g, "lr_max", c.search.sgd.lr_max);
            read(g, "lr_min", c.search.sgd.lr_min);
            read(g, "momentum", c.search.sgd.momentum);
            read(g, "weight_decay", c.search.sgd.weight_decay);
            read(g, "grad_clip", c.search.sgd.grad_clip);
            read(g, "schedule", c.search.sgd.schedule);
        }
        if (s.contains("adam")) {
            const auto& a = s.at("adam");
            detail::reject_unknown(a, {"lr", "weight_decay"}, "search.adam");
            read(a, "lr", c.search.adam.lr);
            read(a, "weight_decay", c.search.adam.weight_decay);
        }
        if (s.contains("loss")) detail::read_loss(s.at("loss"), c.search.loss, "search.loss");
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::reject_unknown(t, {"iterations", "W", "batch_size", "patch", "lr0", "lr_min", "momentum",
                                   "weight_decay", "grad_clip", "augment", "residual", "loss", "eval_every",
                                   "log_every", "tile", "seed"},
                               "train");
        read(t, "iterations", c.train.iterations);
        read(t, "W", c.train.W);
        read(t, "batch_size", c.train.batch_size);
        read(t, "patch", c.train.patch);
        read(t, "lr0", c.train.lr0);
        read(t, "lr_min", c.train.lr_min);
        read(t, "momentum", c.train.momentum);
        read(t, "weight_decay", c.train.weight_decay);
        read(t, "grad_clip", c.train.grad_clip);
        read(t, "augment", c.train.augment);
        read(t, "residual", c.train.residual);
        read(t, "eval_every", c.train.eval_every);
        read(t, "log_every", c.train.log_every);
        read(t, "tile", c.train.tile);
        read(t, "seed", c.train.seed);
        if (t.contains("loss")) detail::read_loss(t.at("loss"), c.train.loss, "train.loss");
    }
    validate(c.data);
    validate(c.search);
    validate(c.train);
    return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
    const auto& d = c.data;
    const auto& s = c.search;
    const auto& t = c.train;
    return {
        {"data",
         {{"task", d.task}, {"scale", d.scale}, {"sigma", d.sigma}, {"synth", d.synth}, {"count", d.count},
          {"test_count", d.test_count}, {"size", d.size}, {"frac_val", d.frac_val}, {"manifest", d.manifest},
          {"seed", d.seed}}},
        {"search",
         {{"W", s.W}, {"N", s.N}, {"L", s.L}, {"batch_size", s.batch_size}, {"patch", s.patch},
          {"patches_per_image", s.patches_per_image}, {"epochs_max", s.epochs_max},
          {"warmup_epochs", s.warmup_epochs}, {"eval_from_epoch", s.eval_from_epoch}, {"tile", s.tile},
          {"sgd",
           {{"lr_max", s.sgd.lr_max}, {"lr_min", s.sgd.lr_min}, {"momentum", s.sgd.momentum},
            {"weight_decay", s.sgd.weight_decay}, {"grad_clip", s.sgd.grad_clip},
            {"schedule", s.sgd.schedule}}},
          {"adam", {{"lr", s.adam.lr}, {"weight_decay", s.adam.weight_decay}}}, {"lwas", s.lwas},
          {"cell_sharing", s.cell_sharing}, {"residual", s.residual}, {"loss", detail::loss_json(s.loss)},
          {"seed", s.seed}}},
        {"train",
         {{"iterations", t.iterations}, {"W", t.W}, {"batch_size", t.batch_size}, {"patch", t.patch},
          {"lr0", t.lr0}, {"lr_min", t.lr_min}, {"momentum", t.momentum}, {"weight_decay", t.weight_decay},
          {"grad_clip", t.grad_clip}, {"augment", t.augment}, {"residual", t.residual},
          {"loss", detail::loss_json(t.loss)}, {"eval_every", t.eval_every}, {"log_every", t.log_every},
          {"tile", t.tile}, {"seed", t.seed}}},
    };
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

// --seed overrides every stream so one flag reproduces a whole run.
inline void apply_seed(RunConfig& c, std::uint64_t seed) {
    c.data.seed = seed;
    c.search.seed = seed;
    c.train.seed = seed;
}

}  // namespace hinas
