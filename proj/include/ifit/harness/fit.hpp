#pragma once

#include "ifit/core/config.hpp"
#include "ifit/core/result.hpp"
#include "ifit/core/simulator.hpp"
#include "ifit/global/global_search.hpp"
#include "ifit/local/local_search.hpp"

#include <sstream>

namespace ifit::harness {

/// Global phase followed by the local phase. Both non-convergence cases
/// surface as NonConvergence carrying the partial result.
inline FitResult fit(const Simulator& sim, const Vector& t_obs, const Config& cfg, std::size_t threads = 1) {
    validate_config(cfg);
    if (static_cast<std::size_t>(t_obs.size()) != sim.dim_stat()) {
        std::ostringstream os;
        os << "observed summary has length " << t_obs.size() << ", simulator produces " << sim.dim_stat();
        throw DataError(os.str());
    }
    if (!t_obs.allFinite()) throw DataError("observed summary has non-finite entries");

    global::GlobalState gs;
    try {
        gs = global::run_global(sim, t_obs, cfg, threads);
    } catch (const global::GlobalNotConverged& e) {
        const auto& st = e.state();
        FitResult partial;
        if (!st.elite_idx.empty()) partial.estimate = st.archive.theta(st.elite_idx.front());
        partial.n_simulations = st.archive.size();
        partial.trace = st.trace;
        throw NonConvergence(e.what(), std::move(partial));
    }
    return local::run_local(std::move(gs), sim, cfg, threads);
}

}  // namespace ifit::harness
