#pragma once
// Dataset assembly from config: procedural images or a PNG manifest, plus
// export of a dataset as PNG files with a manifest.

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "hinas/checkpoint.hpp"
#include "hinas/config.hpp"
#include "hinas/data.hpp"
#include "hinas/image_io.hpp"

namespace hinas {

template <typename T>
struct Dataset {
    RestorationTask task;
    std::vector<ImagePair<T>> train;  // split into W/A/V by search, W∪A/V by training
    std::vector<ImagePair<T>> test;   // held out from every optimisation step
};

// Seeds for the held-out set are offset so it never overlaps the training pool.
inline constexpr std::uint64_t kTestSeedOffset = 1000003;

template <typename T>
std::vector<ImagePair<T>> load_manifest_items(const nlohmann::json& items, const std::filesystem::path& base) {
    std::vector<ImagePair<T>> out;
    for (const auto& it : items) {
        ImagePair<T> p;
        p.id = it.at("id").get<std::string>();
        p.clean = load_png<T>((base / it.at("clean_path").get<std::string>()).string());
        p.degraded = load_png<T>((base / it.at("degraded_path").get<std::string>()).string());
        out.push_back(std::move(p));
    }
    return out;
}

template <typename T>
Dataset<T> load_manifest(const std::string& path, bool residual) {
    const nlohmann::json j = read_json_file(path);
    const auto base = std::filesystem::path(path).parent_path();
    DataConfig d;
    d.task = j.at("task").get<std::string>();
    if (j.contains("scale")) d.scale = j.at("scale").get<int>();
    Dataset<T> ds{make_task(d, residual), {}, {}};
    ds.train = load_manifest_items<T>(j.at("items"), base);
    if (j.contains("test_items")) ds.test = load_manifest_items<T>(j.at("test_items"), base);
    for (const auto* set : {&ds.train, &ds.test}) {
        for (const auto& p : *set) {
            const Shape c = p.clean.shape();
            const Shape g = p.degraded.shape();
            const int S = ds.task.out_scale();
            if (g.h * S != c.h || g.w * S != c.w) {
                throw ConfigError("manifest item '" + p.id + "': degraded size does not match the task");
            }
        }
    }
    return ds;
}

template <typename T>
Dataset<T> build_dataset(const DataConfig& d, bool residual = true) {
    validate(d);
    if (!d.manifest.empty()) return load_manifest<T>(d.manifest, residual);
    Dataset<T> ds{make_task(d, residual), {}, {}};
    const SynthKind kind = synth_kind_from_string(d.synth);
    ds.train = make_pairs(synth_dataset<T>(kind, d.count, d.size, d.seed), ds.task, d.sigma, d.seed);
    ds.test = make_pairs(synth_dataset<T>(kind, d.test_count, d.size, d.seed + kTestSeedOffset), ds.task, d.sigma,
                         d.seed + kTestSeedOffset);
    for (auto& p : ds.test) p.id = "test_" + p.id;
    return ds;
}

template <typename T>
void write_dataset(const std::string& dir, const Dataset<T>& ds, double sigma) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "images");
    auto dump = [&](const std::vector<ImagePair<T>>& pairs) {
        nlohmann::json items = nlohmann::json::array();
        for (const auto& p : pairs) {
            const std::string clean = "images/" + p.id + "_clean.png";
            const std::string degraded = "images/" + p.id + "_degraded.png";
            save_png((fs::path(dir) / clean).string(), p.clean);
            save_png((fs::path(dir) / degraded).string(), p.degraded);
            items.push_back({{"id", p.id}, {"clean_path", clean}, {"degraded_path", degraded}});
        }
        return items;
    };
    nlohmann::json m = {{"task", ds.task.name()}, {"items", dump(ds.train)}, {"test_items", dump(ds.test)}};
    if (ds.task.is_sr()) {
        m["scale"] = ds.task.scale;
    } else {
        m["sigma"] = sigma;
    }
    write_json_file((fs::path(dir) / "manifest.json").string(), m, 2);
}

// Selects the pairs whose ids appear in `ids`, preserving the order of `ids`.
template <typename T>
std::vector<ImagePair<T>> select_pairs(const std::vector<ImagePair<T>>& pairs, const std::vector<std::string>& ids) {
    std::vector<ImagePair<T>> out;
    for (const auto& id : ids) {
        auto it = std::find_if(pairs.begin(), pairs.end(), [&](const ImagePair<T>& p) { return p.id == id; });
        if (it == pairs.end()) throw std::invalid_argument("unknown image id '" + id + "'");
        out.push_back(*it);
    }
    return out;
}

template <typename T>
std::vector<std::string> pair_ids(const std::vector<ImagePair<T>>& pairs) {
    std::vector<std::string> ids;
    for (const auto& p : pairs) ids.push_back(p.id);
    return ids;
}

}  // namespace hinas
