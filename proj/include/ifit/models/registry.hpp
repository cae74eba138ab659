#pragma once

#include "ifit/core/errors.hpp"
#include "ifit/core/simulator.hpp"
#include "ifit/models/enzyme.hpp"
#include "ifit/models/logit.hpp"
#include "ifit/models/toad.hpp"
#include "ifit/models/trait.hpp"

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace ifit::models {

/// Logit data kept alongside a synthetic dataset so the likelihood oracle can
/// be evaluated on it.
struct LogitData {
    Matrix design;
    Vector y;
};

/// A simulator together with one observed summary.
struct Dataset {
    std::shared_ptr<const Simulator> sim;
    Vector t_obs;
    std::optional<LogitData> logit;
};

inline constexpr std::array<std::string_view, 4> kModelNames{"logit", "enzyme", "trait", "toad"};

inline bool is_builtin_model(std::string_view name) {
    for (auto n : kModelNames)
        if (n == name) return true;
    return false;
}

inline Vector theta_true(std::string_view name) {
    if (name == "logit") return LogitSimulator::theta_true();
    if (name == "enzyme") return EnzymeSimulator::theta_true();
    if (name == "trait") return TraitSimulator::theta_true();
    if (name == "toad") return ToadSimulator::theta_true();
    throw ConfigError("unknown model '" + std::string(name) + "'");
}

/// Synthetic dataset at the true parameter. Child 0 of `rng` draws the logit
/// design, child 1 the observed data.
inline Dataset make_dataset(std::string_view name, const RngStream& rng) {
    const Vector theta = theta_true(name);
    Dataset d;
    if (name == "logit") {
        RngStream design_rng = rng.child(0);
        RngStream data_rng = rng.child(1);
        auto sim = std::make_shared<LogitSimulator>(LogitSimulator::make_design(design_rng));
        LogitData data{sim->design(), sim->draw_response(theta, data_rng)};
        d.t_obs = sim->summarize(data.y);
        d.logit = std::move(data);
        d.sim = std::move(sim);
        return d;
    }
    if (name == "enzyme")
        d.sim = std::make_shared<EnzymeSimulator>();
    else if (name == "trait")
        d.sim = std::make_shared<TraitSimulator>();
    else
        d.sim = std::make_shared<ToadSimulator>();
    d.t_obs = d.sim->simulate(theta, rng.child(1));
    return d;
}

/// Dataset for replication `rep` of a study seeded by `master_seed`.
inline Dataset make_dataset(std::string_view name, std::uint64_t master_seed, std::uint64_t rep) {
    return make_dataset(name, RngStream::derive(master_seed, {stream_tag::dataset, rep}));
}

}  // namespace ifit::models
