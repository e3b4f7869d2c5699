#pragma once
// "hinas-ckpt-v1" checkpoints: a JSON document with the config echo, named
// parameters, BN buffers, architecture weights, optimizer state, progress
// counters and the RNG state. Values are written with round-trip precision.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hinas/config.hpp"
#include "hinas/optim.hpp"
#include "hinas/search_space.hpp"

namespace hinas {

inline constexpr const char* kCheckpointFormat = "hinas-ckpt-v1";

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename T>
nlohmann::json tensors_to_json(const std::vector<Parameter<T>>& params) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& p : params) {
        std::vector<double> v(p.tensor.data().begin(), p.tensor.data().end());
        j[p.name] = v;
    }
    return j;
}

// Every parameter must be present with a matching element count.
template <typename T>
void tensors_from_json(const nlohmann::json& j, std::vector<Parameter<T>>& params) {
    for (auto& p : params) {
        if (!j.contains(p.name)) throw CheckpointError("checkpoint lacks parameter '" + p.name + "'");
        const auto v = j.at(p.name).template get<std::vector<double>>();
        auto data = p.tensor.data();
        if (v.size() != data.size()) throw CheckpointError("size mismatch for parameter '" + p.name + "'");
        for (std::size_t i = 0; i < v.size(); ++i) data[i] = static_cast<T>(v[i]);
    }
    if (j.size() != params.size()) throw CheckpointError("checkpoint has parameters the network lacks");
}

template <typename T>
nlohmann::json bn_to_json(const ParamRegistry<T>& reg) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, st] : reg.bn_states) {
        j[name] = {{"mean", std::vector<double>(st->running_mean.begin(), st->running_mean.end())},
                   {"var", std::vector<double>(st->running_var.begin(), st->running_var.end())}};
    }
    return j;
}

template <typename T>
void bn_from_json(const nlohmann::json& j, const ParamRegistry<T>& reg) {
    for (const auto& [name, st] : reg.bn_states) {
        if (!j.contains(name)) throw CheckpointError("checkpoint lacks BN buffers '" + name + "'");
        const auto mean = j.at(name).at("mean").template get<std::vector<double>>();
        const auto var = j.at(name).at("var").template get<std::vector<double>>();
        if (mean.size() != st->running_mean.size() || var.size() != st->running_var.size()) {
            throw CheckpointError("size mismatch for BN buffers '" + name + "'");
        }
        for (std::size_t i = 0; i < mean.size(); ++i) {
            st->running_mean[i] = static_cast<T>(mean[i]);
            st->running_var[i] = static_cast<T>(var[i]);
        }
    }
}

inline nlohmann::json to_json(const SgdState& s) { return {{"velocity", s.velocity}}; }
inline SgdState sgd_state_from_json(const nlohmann::json& j) {
    return SgdState{j.at("velocity").get<std::vector<std::vector<double>>>()};
}
inline nlohmann::json to_json(const AdamState& s) { return {{"m", s.m}, {"v", s.v}, {"t", s.t}}; }
inline AdamState adam_state_from_json(const nlohmann::json& j) {
    return AdamState{j.at("m").get<std::vector<std::vector<double>>>(),
                     j.at("v").get<std::vector<std::vector<double>>>(), j.at("t").get<long long>()};
}

inline std::string rng_state(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

inline void set_rng_state(std::mt19937_64& rng, const std::string& state) {
    std::istringstream is(state);
    is >> rng;
    if (!is) throw CheckpointError("corrupt RNG state");
}

inline void write_json_file(const std::string& path, const nlohmann::json& j, int indent = -1) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path);
    if (!out) throw CheckpointError("cannot write '" + path + "'");
    out << j.dump(indent) << "\n";
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read '" + path + "'");
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline nlohmann::json read_checkpoint(const std::string& path) {
    nlohmann::json j = read_json_file(path);
    if (!j.is_object() || j.value("format", std::string()) != kCheckpointFormat) {
        throw ConfigError("'" + path + "' is not a " + std::string(kCheckpointFormat) + " checkpoint");
    }
    return j;
}

}  // namespace hinas
