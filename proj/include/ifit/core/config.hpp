#pragma once

#include "ifit/core/errors.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ifit {

/// Where the linear prediction is centered when checking the local model.
enum class ModelCheckCenter { candidate, current };

/// Engine constants. Defaults are the standard tuning values; the iteration
/// caps are safety limits, not algorithm parameters.
struct Config {
    int n_init = 1000;
    int n_elite = 100;
    double a_elite = 0.5;
    double tol_global = 0.1;
    double tol_local = 1.0;
    double tol_model = 1.5;
    int nfit_local = 4000;
    int nadd_global = 100;
    int nadd_local = 10;
    double rho_max = 0.1;
    double lambda = 0.1;
    int max_global_iters = 500;
    int max_local_iters = 2000;
    ModelCheckCenter model_check_center = ModelCheckCenter::candidate;
    std::uint64_t seed = 0;

    bool operator==(const Config&) const = default;
};

/// Checks every invariant and throws ConfigError listing all violations.
inline Config validate_config(const Config& cfg) {
    std::vector<std::string> problems;
    auto require = [&](bool ok, const char* msg) {
        if (!ok) problems.emplace_back(msg);
    };
    require(cfg.n_init >= 1, "n_init must be positive");
    require(cfg.n_elite >= 1, "n_elite must be positive");
    require(cfg.n_elite <= cfg.n_init, "n_elite exceeds n_init");
    require(cfg.a_elite > 0.0 && cfg.a_elite < 1.0, "a_elite must lie in (0,1)");
    require(cfg.tol_global > 0.0, "tol_global must be positive");
    require(cfg.tol_local > 0.0, "tol_local must be positive");
    require(cfg.tol_model > 0.0, "tol_model must be positive");
    require(cfg.nfit_local >= cfg.n_elite, "nfit_local must be at least n_elite");
    require(cfg.nadd_global >= 1, "nadd_global must be positive");
    require(cfg.nadd_local >= 1, "nadd_local must be positive");
    require(cfg.rho_max > 0.0, "rho_max must be positive");
    require(cfg.lambda > 0.0 && cfg.lambda <= 1.0, "lambda must lie in (0,1]");
    require(cfg.max_global_iters >= 1, "max_global_iters must be positive");
    require(cfg.max_local_iters >= 1, "max_local_iters must be positive");
    if (!problems.empty()) {
        std::ostringstream os;
        os << "invalid config:";
        for (const auto& p : problems) os << ' ' << p << ';';
        throw ConfigError(os.str());
    }
    return cfg;
}

inline void to_json(nlohmann::json& j, ModelCheckCenter c) {
    j = c == ModelCheckCenter::candidate ? "candidate" : "current";
}

inline void from_json(const nlohmann::json& j, ModelCheckCenter& c) {
    const auto s = j.get<std::string>();
    if (s == "candidate")
        c = ModelCheckCenter::candidate;
    else if (s == "current")
        c = ModelCheckCenter::current;
    else
        throw ConfigError("model_check_center must be \"candidate\" or \"current\", got \"" + s + "\"");
}

inline void to_json(nlohmann::json& j, const Config& c) {
    j = nlohmann::json{{"n_init", c.n_init},
                       {"n_elite", c.n_elite},
                       {"a_elite", c.a_elite},
                       {"tol_global", c.tol_global},
                       {"tol_local", c.tol_local},
                       {"tol_model", c.tol_model},
                       {"nfit_local", c.nfit_local},
                       {"nadd_global", c.nadd_global},
                       {"nadd_local", c.nadd_local},
                       {"rho_max", c.rho_max},
                       {"lambda", c.lambda},
                       {"max_global_iters", c.max_global_iters},
                       {"max_local_iters", c.max_local_iters},
                       {"model_check_center", c.model_check_center},
                       {"seed", c.seed}};
}

/// Missing keys keep their defaults; unknown keys are rejected so typos surface.
inline void from_json(const nlohmann::json& j, Config& c) {
    if (!j.is_object()) throw ConfigError("config JSON must be an object");
    const nlohmann::json defaults = Config{};
    for (const auto& [key, value] : j.items()) {
        if (!defaults.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    }
    auto read = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(field);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config key '") + key + "': " + e.what());
        }
    };
    read("n_init", c.n_init);
    read("n_elite", c.n_elite);
    read("a_elite", c.a_elite);
    read("tol_global", c.tol_global);
    read("tol_local", c.tol_local);
    read("tol_model", c.tol_model);
    read("nfit_local", c.nfit_local);
    read("nadd_global", c.nadd_global);
    read("nadd_local", c.nadd_local);
    read("rho_max", c.rho_max);
    read("lambda", c.lambda);
    read("max_global_iters", c.max_global_iters);
    read("max_local_iters", c.max_local_iters);
    read("model_check_center", c.model_check_center);
    read("seed", c.seed);
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return validate_config(j.get<Config>());
}

}  // namespace ifit
