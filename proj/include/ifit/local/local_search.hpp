#pragma once

#include "ifit/core/archive.hpp"
#include "ifit/core/config.hpp"
#include "ifit/core/result.hpp"
#include "ifit/core/simulator.hpp"
#include "ifit/diagnostics/diagnostics.hpp"
#include "ifit/global/global_search.hpp"
#include "ifit/mathkit/linalg.hpp"
#include "ifit/mathkit/lp.hpp"
#include "ifit/mathkit/regression.hpp"
#include "ifit/sampling/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

namespace ifit::local {

/// Trust-region quasi-Fisher-scoring state.
struct LocalState {
    Vector theta_hat;    // current estimate
    Vector theta_tilde;  // latest candidate
    Vector tau;          // intercept of the latest local fit
    Matrix jac_smooth;   // EWMA Jacobian, q x p
    Matrix sigma_smooth; // EWMA residual covariance, q x q
    Matrix tau_cov;      // covariance of tau (latest fit)
    Vector g_hat;        // estimating function J^T Sigma^{-1} (t_obs - tau)
    Matrix omega_hat;    // J^T Sigma^{-1} J
    Matrix u_mat;        // J^T Sigma^{-1} H Sigma^{-1} J, dispersion of g_hat
    double rho = 0.0;
    std::size_t fit_size = 0;
    std::size_t iter = 0;
    bool smoothed = false;  // false until the first fit seeds the EWMA
    std::size_t n_clamped = 0;
};

/// Starts from the archive point whose bridge estimate is closest to
/// t_obs (lowest index on ties), with L = n_elite and rho = rho_max / 10.
inline LocalState init_local(const global::GlobalState& gs, const Config& cfg) {
    if (!gs.ranked()) throw Error("init_local: global state has not been ranked");
    std::size_t best = 0;
    for (std::size_t i = 1; i < gs.archive.size(); ++i)
        if (gs.distance[static_cast<Eigen::Index>(i)] < gs.distance[static_cast<Eigen::Index>(best)]) best = i;
    LocalState st;
    st.theta_hat = gs.archive.theta(best);
    st.theta_tilde = st.theta_hat;
    st.fit_size = static_cast<std::size_t>(cfg.n_elite);
    st.rho = cfg.rho_max / 10.0;
    return st;
}

/// Indices of the `count` archive points nearest to `center` under the
/// diag(max(1, center^2)) scaling; ties broken by lowest index.
inline std::vector<std::size_t> nearest_points(const SimArchive& archive, const Vector& center, std::size_t count) {
    const std::size_t n = archive.size();
    count = std::min(count, n);
    const Vector inv_scale = center.array().square().max(1.0).inverse();
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i)
        d2[i] = ((archive.theta(i) - center).array().square() * inv_scale.array()).sum();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto closer = [&](std::size_t a, std::size_t b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); };
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count - 1), idx.end(), closer);
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

/// Folds a new regression fit into the EWMA and recomputes g, Omega and U.
inline void absorb_fit(LocalState& st, const mathkit::LocalLinearFit& fit, const Vector& t_obs, const Config& cfg) {
    if (!st.smoothed) {
        st.jac_smooth = fit.jac;
        st.sigma_smooth = fit.err_cov;
        st.smoothed = true;
    } else {
        st.jac_smooth = (1.0 - cfg.lambda) * st.jac_smooth + cfg.lambda * fit.jac;
        st.sigma_smooth = (1.0 - cfg.lambda) * st.sigma_smooth + cfg.lambda * fit.err_cov;
    }
    st.tau = fit.tau;
    st.tau_cov = fit.tau_cov;
    const mathkit::SpdFactor sigma(st.sigma_smooth);
    const Matrix sinv_j = sigma.solve(st.jac_smooth);  // Sigma^{-1} J
    st.g_hat = sinv_j.transpose() * (t_obs - st.tau);
    st.omega_hat = mathkit::symmetrize(st.jac_smooth.transpose() * sinv_j);
    st.u_mat = mathkit::symmetrize(sinv_j.transpose() * st.tau_cov * sinv_j);
}

/// Local linear fit on the L nearest pairs, EWMA smoothing, and the
/// estimating-function quantities.
inline void local_fit_update(LocalState& st, const SimArchive& archive, const Config& cfg) {
    if (archive.size() < st.fit_size) throw DataError("local fit: archive smaller than the neighbourhood size");
    const auto rows = nearest_points(archive, st.theta_hat, st.fit_size);
    const auto fit = mathkit::mv_least_squares(archive.thetas(rows), archive.stats(rows), st.theta_hat);
    absorb_fit(st, fit, archive.observed(), cfg);
}

/// theta_tilde = theta_hat + argmin ||Omega delta - g||_1 within the
/// box and trust region.
inline Vector propose_candidate(const LocalState& st, const Bounds& bounds) {
    const Vector delta = mathkit::l1_trust_step(st.omega_hat, st.g_hat, st.theta_hat, bounds, st.rho);
    return bounds.clamp(st.theta_hat + delta);
}

/// g^T U^{-1} g, or nothing if U cannot be factored even with a ridge.
inline std::optional<double> score_norm_sq(const LocalState& st) {
    try {
        return mathkit::mahalanobis_sq(st.g_hat, st.u_mat);
    } catch (const NumericalError&) {
        return std::nullopt;
    }
}

/// Stop once L has reached nfit_local and g^T U^{-1} g < p tol_local.
inline bool local_converged(const LocalState& st, const Config& cfg) {
    if (st.fit_size < static_cast<std::size_t>(cfg.nfit_local)) return false;
    const auto norm = score_norm_sq(st);
    return norm && *norm < static_cast<double>(st.g_hat.size()) * cfg.tol_local;
}

/// Sum over new pairs of ||t_i - tau - J (theta_i - c)||^2_Sigma.
inline double model_misfit(const LocalState& st, const Eigen::Ref<const Matrix>& new_thetas,
                           const Eigen::Ref<const Matrix>& new_stats, const Vector& center) {
    const mathkit::SpdFactor sigma(st.sigma_smooth);
    double total = 0.0;
    for (Eigen::Index i = 0; i < new_thetas.rows(); ++i) {
        const Vector pred = st.tau + st.jac_smooth * (new_thetas.row(i).transpose() - center);
        total += sigma.mahalanobis_sq(new_stats.row(i).transpose() - pred);
    }
    return total;
}

/// Accepts theta_tilde and double rho (capped) when the new points
/// agree with the local linear model, otherwise keep theta_hat and quarter rho.
inline bool check_and_adapt(LocalState& st, const Eigen::Ref<const Matrix>& new_thetas,
                            const Eigen::Ref<const Matrix>& new_stats, const Config& cfg) {
    const Vector& center = cfg.model_check_center == ModelCheckCenter::candidate ? st.theta_tilde : st.theta_hat;
    const double misfit = model_misfit(st, new_thetas, new_stats, center);
    const double threshold = static_cast<double>(new_stats.cols() * new_stats.rows()) * cfg.tol_model;
    const bool accept = misfit < threshold;
    if (accept) {
        st.theta_hat = st.theta_tilde;
        st.rho = std::min(2.0 * st.rho, cfg.rho_max);
    } else {
        st.rho /= 4.0;
    }
    return accept;
}

/// Assembles the output from the current state: theta_tilde with covariance
/// Omega^{-1}, standard errors and the adequacy diagnostics.
inline FitResult make_result(const LocalState& st, const SimArchive& archive, std::vector<TraceRecord> trace,
                             bool converged) {
    FitResult r;
    r.estimate = st.theta_tilde;
    r.covariance = mathkit::SpdFactor(st.omega_hat).inverse();
    r.std_errors = r.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    r.n_simulations = archive.size();
    const auto sh = diagnostics::sargan_hansen(archive.observed(), st.tau, st.sigma_smooth, archive.p());
    r.sh_stat = sh.stat;
    r.sh_df = sh.df;
    r.sh_pvalue = sh.pvalue;
    r.std_scores = diagnostics::standardized_scores(archive.observed(), st.tau, st.sigma_smooth);
    r.trace = std::move(trace);
    r.converged = converged;
    return r;
}

/// Thrown when the local phase hits max_local_iters.
class LocalNotConverged : public NonConvergence {
public:
    using NonConvergence::NonConvergence;
};

/// The whole local phase. Consumes the global state's archive.
inline FitResult run_local(global::GlobalState gs, const Simulator& sim, const Config& cfg, std::size_t threads = 1) {
    LocalState st = init_local(gs, cfg);
    SimArchive& archive = gs.archive;
    std::vector<TraceRecord> trace = std::move(gs.trace);
    const auto nfit = static_cast<std::size_t>(cfg.nfit_local);
    const auto nadd = static_cast<std::size_t>(cfg.nadd_local);
    for (;;) {
        local_fit_update(st, archive, cfg);
        st.theta_tilde = propose_candidate(st, archive.bounds());
        const auto gnorm = score_norm_sq(st);
        TraceRecord rec{Phase::local, st.iter, st.rho, st.fit_size, false, gnorm};
        if (local_converged(st, cfg)) {
            trace.push_back(rec);
            return make_result(st, archive, std::move(trace), true);
        }
        if (st.iter >= static_cast<std::size_t>(cfg.max_local_iters)) {
            trace.push_back(rec);
            FitResult partial;
            try {
                partial = make_result(st, archive, trace, false);
            } catch (const Error&) {
                partial.estimate = st.theta_hat;
                partial.n_simulations = archive.size();
                partial.trace = trace;
            }
            throw LocalNotConverged("local search did not converge within max_local_iters", std::move(partial));
        }

        auto rng = RngStream::derive(cfg.seed, {stream_tag::local_sample, st.iter});
        const Matrix draws =
            sampling::ellipsoid_box_uniform(st.theta_tilde, st.omega_hat, archive.bounds(), nadd, rng, &st.n_clamped);
        std::vector<Vector> thetas;
        thetas.reserve(nadd);
        for (Eigen::Index i = 0; i < draws.rows(); ++i) thetas.emplace_back(draws.row(i).transpose());
        const auto stats = simulate_and_append(archive, sim, thetas, cfg.seed, threads);
        Matrix new_stats(draws.rows(), static_cast<Eigen::Index>(archive.q()));
        for (Eigen::Index i = 0; i < draws.rows(); ++i) new_stats.row(i) = stats[static_cast<std::size_t>(i)].transpose();

        rec.accepted = check_and_adapt(st, draws, new_stats, cfg);
        trace.push_back(rec);
        st.fit_size = std::min(nfit, st.fit_size + nadd);
        ++st.iter;
    }
}

}  // namespace ifit::local
