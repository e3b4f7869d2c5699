// Command-line front end: hinas synth|search|derive|train|eval|export-dot.
// Exit codes: 0 success, 1 configuration/input error, 2 numeric failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "hinas/hinas.hpp"

namespace {

using Real = float;
namespace fs = std::filesystem;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "hinas_out";
    std::string checkpoint;
};

hinas::RunConfig load_run_config(const Options& o) {
    hinas::RunConfig c = o.config.empty() ? hinas::RunConfig{} : hinas::load_config(o.config);
    if (o.seed) hinas::apply_seed(c, *o.seed);
    return c;
}

std::string require_checkpoint(const Options& o, const char* cmd) {
    if (o.checkpoint.empty()) throw hinas::ConfigError(std::string(cmd) + " requires --checkpoint");
    return o.checkpoint;
}

// Accepts an architecture file or a supernet/compact checkpoint.
hinas::Architecture architecture_from_file(const std::string& path) {
    const nlohmann::json j = hinas::read_json_file(path);
    if (j.contains("genotypes")) return hinas::architecture_from_json(j);
    const nlohmann::json ckpt = hinas::read_checkpoint(path);
    if (ckpt.at("kind") == "compact") return hinas::architecture_from_json(ckpt.at("architecture"));
    return hinas::derive_architecture(*hinas::load_supernet<Real>(ckpt));
}

int cmd_synth(const Options& o) {
    const auto cfg = load_run_config(o);
    const auto ds = hinas::build_dataset<Real>(cfg.data);
    hinas::write_dataset(o.out_dir, ds, cfg.data.sigma);
    hinas::write_json_file((fs::path(o.out_dir) / "config_echo.json").string(), hinas::to_json(cfg), 2);
    std::cout << "wrote " << ds.train.size() << " training and " << ds.test.size() << " test pairs to "
              << o.out_dir << "\n";
    return 0;
}

int cmd_search(const Options& o) {
    const auto cfg = load_run_config(o);
    const auto ds = hinas::build_dataset<Real>(cfg.data, cfg.search.residual);
    const auto res = hinas::run_search(cfg, ds, o.out_dir, &std::cerr);
    std::cout << hinas::to_json(res).dump(2) << "\n";
    return 0;
}

int cmd_derive(const Options& o) {
    const auto ckpt = hinas::read_checkpoint(require_checkpoint(o, "derive"));
    const auto net = hinas::load_supernet<Real>(ckpt);
    const auto arch = hinas::derive_architecture(*net);
    hinas::write_json_file((fs::path(o.out_dir) / "architecture.json").string(), hinas::to_json(arch), 2);
    std::cout << hinas::to_json(arch).dump(2) << "\n";
    return 0;
}

int cmd_train(const Options& o) {
    const std::string src = require_checkpoint(o, "train");
    hinas::RunConfig cfg;
    if (o.config.empty()) {
        // Without --config, reuse the configuration recorded in the checkpoint.
        const nlohmann::json j = hinas::read_json_file(src);
        cfg = j.contains("config") ? hinas::config_from_json(j.at("config")) : hinas::RunConfig{};
        if (o.seed) hinas::apply_seed(cfg, *o.seed);
    } else {
        cfg = load_run_config(o);
    }
    const auto arch = architecture_from_file(src);
    const auto ds = hinas::build_dataset<Real>(cfg.data, cfg.train.residual);
    auto res = hinas::run_train(cfg, arch, ds, o.out_dir, &std::cerr);
    nlohmann::json summary = {{"final_val_psnr", res.final_val_psnr},
                              {"final_val_ssim", res.final_val_ssim},
                              {"best_val_psnr", res.best_val_psnr},
                              {"best_step", res.best_step},
                              {"params", hinas::count_params(*res.net)}};
    if (!ds.test.empty()) {
        summary["test"] = hinas::to_json(hinas::run_eval(*res.net, ds.test, cfg.train.tile));
        summary["test_input"] = hinas::to_json(hinas::evaluate_identity(ds.test, ds.task));
    }
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_eval(const Options& o) {
    const auto ckpt = hinas::read_checkpoint(require_checkpoint(o, "eval"));
    auto net = hinas::load_compact<Real>(ckpt);
    hinas::RunConfig cfg = o.config.empty() ? hinas::config_from_json(ckpt.at("config")) : load_run_config(o);
    if (o.seed) hinas::apply_seed(cfg, *o.seed);
    const auto ds = hinas::build_dataset<Real>(cfg.data, cfg.train.residual);
    if (!(ds.task.kind == net->config().task.kind && ds.task.scale == net->config().task.scale)) {
        throw hinas::ConfigError("dataset task does not match the network task");
    }
    const auto& pairs = ds.test.empty() ? ds.train : ds.test;
    const auto report = hinas::run_eval(*net, pairs, cfg.train.tile);
    nlohmann::json j = hinas::to_json(report);
    j["input"] = hinas::to_json(hinas::evaluate_identity(pairs, ds.task));
    hinas::write_json_file((fs::path(o.out_dir) / "eval_report.json").string(), j, 2);
    std::cout << "mean PSNR " << report.mean_psnr << " dB, mean SSIM " << report.mean_ssim << " over "
              << report.images.size() << " images\n";
    return 0;
}

int cmd_export_dot(const Options& o) {
    const auto arch = architecture_from_file(require_checkpoint(o, "export-dot"));
    fs::create_directories(o.out_dir);
    for (std::size_t l = 0; l < arch.genotypes.size(); ++l) {
        const std::string name = arch.genotypes.size() == 1 ? "cell" : "cell_layer" + std::to_string(l);
        const auto path = fs::path(o.out_dir) / (name + ".dot");
        std::ofstream out(path);
        if (!out) throw hinas::ConfigError("cannot write '" + path.string() + "'");
        out << hinas::to_dot(arch.genotypes[l], name);
        std::cout << path.string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical neural architecture search for image restoration"};
    app.require_subcommand(1);
    Options opts;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config, "Run configuration (JSON)");
        sub->add_option("--seed", opts.seed, "Override every seed in the configuration");
        sub->add_option("--out-dir", opts.out_dir, "Output directory")->capture_default_str();
        sub->add_option("--checkpoint", opts.checkpoint, "Checkpoint or architecture file");
    };
    struct Command {
        const char* name;
        const char* help;
        int (*run)(const Options&);
    };
    const Command commands[] = {
        {"synth", "Generate a procedural dataset as PNG files with a manifest", cmd_synth},
        {"search", "Run the architecture search", cmd_search},
        {"derive", "Derive genotypes and width path from a search checkpoint", cmd_derive},
        {"train", "Train the compact network of an architecture", cmd_train},
        {"eval", "Evaluate a trained compact network", cmd_eval},
        {"export-dot", "Write Graphviz files for the cells of an architecture", cmd_export_dot},
    };
    for (const auto& c : commands) add_common(app.add_subcommand(c.name, c.help));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }
    try {
        for (const auto& c : commands) {
            if (app.got_subcommand(c.name)) return c.run(opts);
        }
    } catch (const hinas::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
