#pragma once

#include "ifit/core/archive.hpp"
#include "ifit/core/config.hpp"
#include "ifit/core/result.hpp"
#include "ifit/core/simulator.hpp"
#include "ifit/mathkit/kdtree.hpp"
#include "ifit/mathkit/linalg.hpp"
#include "ifit/mathkit/robust.hpp"
#include "ifit/sampling/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

namespace ifit::global {

/// E_k = ceil(n_elite + (n_init - n_elite) * a_elite^((N_k / n_init)^2)).
inline std::size_t elite_size(const Config& cfg, std::size_t n_k) {
    const double ratio = static_cast<double>(n_k) / static_cast<double>(cfg.n_init);
    const double e = cfg.n_elite + (cfg.n_init - cfg.n_elite) * std::pow(cfg.a_elite, ratio * ratio);
    const auto k = static_cast<std::size_t>(std::ceil(e));
    return std::clamp(k, static_cast<std::size_t>(cfg.n_elite), static_cast<std::size_t>(cfg.n_init));
}

inline Vector squared_widths(const Bounds& b) { return b.width().array().square(); }

namespace detail {

/// Archive parameters divided by sqrt(d0), so the D0-scaled distance becomes
/// a plain Euclidean one. Row-major, one point per row.
inline std::vector<double> scaled_points(const SimArchive& archive, const Vector& d0) {
    const std::size_t n = archive.size();
    const std::size_t p = archive.p();
    const Vector inv = d0.array().rsqrt();
    std::vector<double> out(n * p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            out[i * p + j] = archive.theta(i)[static_cast<Eigen::Index>(j)] * inv[static_cast<Eigen::Index>(j)];
    return out;
}

using Neighbour = mathkit::KdTree::Neighbour;

/// Brute-force k nearest neighbours of point i, ordered by (d^2, index).
inline std::vector<Neighbour> brute_knn(const std::vector<double>& pts, std::size_t n, std::size_t p, std::size_t i,
                                        std::size_t k) {
    std::priority_queue<Neighbour> heap;
    const double* xi = pts.data() + i * p;
    for (std::size_t r = 0; r < n; ++r) {
        const double* xr = pts.data() + r * p;
        double d2 = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double diff = xr[j] - xi[j];
            d2 += diff * diff;
        }
        if (heap.size() < k) {
            heap.emplace(d2, r);
        } else if (Neighbour{d2, r} < heap.top()) {
            heap.pop();
            heap.emplace(d2, r);
        }
    }
    std::vector<Neighbour> nb(heap.size());
    for (std::size_t m = nb.size(); m > 0; --m) {
        nb[m - 1] = heap.top();
        heap.pop();
    }
    return nb;
}

/// Tricube-weighted mean of the statistics of the given neighbours (nearest
/// first); the farthest one sets the bandwidth.
inline Vector tricube_mean(const SimArchive& archive, const std::vector<Neighbour>& nb) {
    const double dmax = std::sqrt(nb.back().first);
    Vector acc = Vector::Zero(static_cast<Eigen::Index>(archive.q()));
    double wsum = 0.0;
    for (const auto& [d2, r] : nb) {
        double w = 1.0;
        if (dmax > 0.0) {
            const double u = std::sqrt(d2) / dmax;
            const double c = 1.0 - u * u * u;
            w = c * c * c;
        }
        acc += w * archive.stat(r);
        wsum += w;
    }
    return acc / wsum;
}

inline std::size_t neighbourhood_size(std::size_t n) {
    return std::min(n, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n)))));
}

/// Exact nearest-neighbour lists of every archive point, kept `depth` deep and
/// updated incrementally as the archive grows. Lists are ordered by
/// (d^2, index); the first k entries equal a fresh k-nearest query.
class NeighbourCache {
public:
    static constexpr std::size_t kHeadroom = 16;

    void update(const SimArchive& archive, const Vector& d0, std::size_t k, std::size_t threads) {
        const std::size_t n = archive.size();
        const std::size_t p = archive.p();
        const std::size_t old_n = indexed_;
        pts_.resize(n * p);
        const Vector inv = d0.array().rsqrt();
        for (std::size_t i = old_n; i < n; ++i)
            for (std::size_t j = 0; j < p; ++j)
                pts_[i * p + j] = archive.theta(i)[static_cast<Eigen::Index>(j)] * inv[static_cast<Eigen::Index>(j)];

        const bool rebuild = old_n == 0 || k > depth_ || p != dim_;
        if (rebuild) depth_ = k + kHeadroom;
        dim_ = p;
        const std::size_t depth = std::min(depth_, n);
        const mathkit::KdTree tree(pts_.data(), n, p);
        lists_.resize(n);
        const std::size_t first_query = rebuild ? 0 : old_n;
        parallel_for(n, threads, [&](std::size_t i) {
            if (i >= first_query) {
                lists_[i] = tree.knn(pts_.data() + i * p, depth);
                return;
            }
            auto& nb = lists_[i];
            const double* xi = pts_.data() + i * p;
            for (std::size_t r = old_n; r < n; ++r) {
                const double* xr = pts_.data() + r * p;
                double d2 = 0.0;
                for (std::size_t j = 0; j < p; ++j) {
                    const double diff = xr[j] - xi[j];
                    d2 += diff * diff;
                }
                const Neighbour cand{d2, r};
                if (nb.size() >= depth && !(cand < nb.back())) continue;
                nb.insert(std::upper_bound(nb.begin(), nb.end(), cand), cand);
                if (nb.size() > depth) nb.pop_back();
            }
        });
        indexed_ = n;
    }

    /// The k nearest neighbours of point i (k must not exceed the depth).
    std::vector<Neighbour> nearest(std::size_t i, std::size_t k) const {
        const auto& nb = lists_[i];
        return {nb.begin(), nb.begin() + static_cast<std::ptrdiff_t>(std::min(k, nb.size()))};
    }

private:
    std::vector<double> pts_;
    std::vector<std::vector<Neighbour>> lists_;
    std::size_t indexed_ = 0;
    std::size_t depth_ = 0;
    std::size_t dim_ = 0;
};

}  // namespace detail

/// Population state of the elite-sample search.
struct GlobalState {
    SimArchive archive;
    Vector d0;                        // squared box widths, the distance scaling
    Matrix bridge;                    // N_k x q nearest-neighbour bridge estimates
    mathkit::RobustScatter sigma;     // weighting matrix of the current ranking
    Vector distance;                  // ||t_obs - bridge_i||_Sigma for every archive point
    std::vector<std::size_t> elite_idx;  // ascending distance, ties by index
    std::size_t elite_size = 0;
    std::size_t iter = 0;
    std::size_t n_clamped = 0;        // reproduction draws that fell back to clamping
    std::vector<TraceRecord> trace;
    detail::NeighbourCache neighbours;

    /// True when bridge/sigma/elite describe the archive as it is now.
    bool ranked() const { return static_cast<std::size_t>(bridge.rows()) == archive.size() && archive.size() > 0; }
};

/// Thrown when the iteration cap is reached; carries the last state.
class GlobalNotConverged : public Error {
public:
    GlobalNotConverged(const std::string& what, GlobalState state) : Error(what), state_(std::move(state)) {}
    const GlobalState& state() const noexcept { return state_; }

private:
    GlobalState state_;
};

/// Nearest-neighbour bridge estimate at archive point i: the ceil(sqrt(N))
/// points closest under the d0 scaling (i itself included), weighted by
/// tricube (1 - (d/dmax)^3)^3 and normalized to sum one.
inline Vector bridge_knn(const SimArchive& archive, const Vector& d0, std::size_t i) {
    if (archive.size() < 2) throw DataError("bridge_knn: need at least two archive points");
    const auto pts = detail::scaled_points(archive, d0);
    const auto nb = detail::brute_knn(pts, archive.size(), archive.p(), i, detail::neighbourhood_size(archive.size()));
    return detail::tricube_mean(archive, nb);
}

/// Bridge estimates for every archive point (N x q).
inline Matrix bridge_all(const SimArchive& archive, const Vector& d0, std::size_t threads = 1) {
    if (archive.size() < 2) throw DataError("bridge_knn: need at least two archive points");
    const auto pts = detail::scaled_points(archive, d0);
    const std::size_t k = detail::neighbourhood_size(archive.size());
    const mathkit::KdTree tree(pts.data(), archive.size(), archive.p());
    Matrix out(static_cast<Eigen::Index>(archive.size()), static_cast<Eigen::Index>(archive.q()));
    parallel_for(archive.size(), threads, [&](std::size_t i) {
        const auto nb = tree.knn(pts.data() + i * archive.p(), k);
        out.row(static_cast<Eigen::Index>(i)) = detail::tricube_mean(archive, nb).transpose();
    });
    return out;
}

/// Latin hypercube of n_init points, simulated.
inline GlobalState init_global(const Simulator& sim, const Vector& t_obs, const Config& cfg,
                               std::size_t threads = 1) {
    GlobalState st;
    st.archive = SimArchive(sim.bounds(), t_obs);
    st.archive.reserve(static_cast<std::size_t>(cfg.n_init) * 4);
    st.d0 = squared_widths(sim.bounds());
    auto rng = RngStream::derive(cfg.seed, {stream_tag::latin_hypercube});
    const Matrix design = sampling::latin_hypercube(static_cast<std::size_t>(cfg.n_init), sim.bounds(), rng);
    std::vector<Vector> thetas;
    thetas.reserve(static_cast<std::size_t>(design.rows()));
    for (Eigen::Index i = 0; i < design.rows(); ++i) thetas.emplace_back(design.row(i).transpose());
    simulate_and_append(st.archive, sim, thetas, cfg.seed, threads);
    return st;
}

/// Bridge estimation, robust weighting matrix and elite selection.
inline void rank_population(GlobalState& st, const Config& cfg, std::size_t threads = 1) {
    const SimArchive& a = st.archive;
    if (a.size() < 2) throw DataError("bridge_knn: need at least two archive points");
    const std::size_t k = detail::neighbourhood_size(a.size());
    st.neighbours.update(a, st.d0, k, threads);
    st.bridge.resize(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(a.q()));
    parallel_for(a.size(), threads, [&](std::size_t i) {
        st.bridge.row(static_cast<Eigen::Index>(i)) = detail::tricube_mean(a, st.neighbours.nearest(i, k)).transpose();
    });
    Matrix resid(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(a.q()));
    for (std::size_t i = 0; i < a.size(); ++i)
        resid.row(static_cast<Eigen::Index>(i)) = a.stat(i).transpose() - st.bridge.row(static_cast<Eigen::Index>(i));
    st.sigma = mathkit::robust_scatter(resid);

    const mathkit::SpdFactor weight(st.sigma.sigma);
    st.distance.resize(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Vector r = a.observed() - st.bridge.row(static_cast<Eigen::Index>(i)).transpose();
        st.distance[static_cast<Eigen::Index>(i)] = std::sqrt(weight.mahalanobis_sq(r));
    }

    st.elite_size = std::min(elite_size(cfg, a.size()), a.size());
    std::vector<std::size_t> order(a.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto closer = [&](std::size_t x, std::size_t y) {
        const double dx = st.distance[static_cast<Eigen::Index>(x)];
        const double dy = st.distance[static_cast<Eigen::Index>(y)];
        return dx < dy || (dx == dy && x < y);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(st.elite_size), order.end(), closer);
    order.resize(st.elite_size);
    st.elite_idx = std::move(order);
}

inline Matrix elite_thetas(const GlobalState& st) { return st.archive.thetas(st.elite_idx); }

/// Convergence test on an explicit elite sample: every coordinate has
/// sd < max(1, |mean|) * tol (sd with divisor E - 1).
inline bool elite_concentrated(const Eigen::Ref<const Matrix>& elite, double tol) {
    const Eigen::Index e = elite.rows();
    if (e < 2) return true;
    const Vector mean = elite.colwise().mean().transpose();
    for (Eigen::Index j = 0; j < elite.cols(); ++j) {
        const double ss = (elite.col(j).array() - mean[j]).square().sum();
        const double sd = std::sqrt(ss / static_cast<double>(e - 1));
        if (!(sd < std::max(1.0, std::abs(mean[j])) * tol)) return false;
    }
    return true;
}

inline bool global_converged(const GlobalState& st, const Config& cfg) {
    return elite_concentrated(elite_thetas(st), cfg.tol_global);
}

/// Sample covariance (divisor E - 1) of the elite parameters.
inline Matrix elite_covariance(const Eigen::Ref<const Matrix>& elite) {
    const Eigen::Index e = elite.rows();
    if (e < 2) return Matrix::Zero(elite.cols(), elite.cols());
    const Matrix centered = elite.rowwise() - elite.colwise().mean();
    return (centered.transpose() * centered) / static_cast<double>(e - 1);
}

/// Reproduction: nadd_global offspring from the truncated normal mixture centred on
/// the elite with the elite covariance, simulated and appended.
inline void reproduce(GlobalState& st, const Simulator& sim, const Config& cfg, std::size_t threads = 1) {
    const Matrix elite = elite_thetas(st);
    const Matrix cov = elite_covariance(elite);
    auto rng = RngStream::derive(cfg.seed, {stream_tag::global_reproduce, st.iter});
    const Matrix draws = sampling::truncated_mvn_mixture(elite, cov, st.archive.bounds(),
                                                         static_cast<std::size_t>(cfg.nadd_global), rng, &st.n_clamped);
    std::vector<Vector> thetas;
    thetas.reserve(static_cast<std::size_t>(draws.rows()));
    for (Eigen::Index i = 0; i < draws.rows(); ++i) thetas.emplace_back(draws.row(i).transpose());
    simulate_and_append(st.archive, sim, thetas, cfg.seed, threads);
    ++st.iter;
}

/// One ranking + reproduction cycle.
inline void global_iterate(GlobalState& st, const Simulator& sim, const Config& cfg, std::size_t threads = 1) {
    rank_population(st, cfg, threads);
    reproduce(st, sim, cfg, threads);
}

/// The whole global phase. Returns a ranked, converged state.
inline GlobalState run_global(const Simulator& sim, const Vector& t_obs, const Config& cfg, std::size_t threads = 1) {
    if (static_cast<std::size_t>(t_obs.size()) != sim.dim_stat())
        throw DataError("observed summary length does not match the simulator");
    GlobalState st = init_global(sim, t_obs, cfg, threads);
    for (;;) {
        rank_population(st, cfg, threads);
        const bool done = global_converged(st, cfg);
        st.trace.push_back({Phase::global, st.iter, std::nullopt, st.elite_size, done, std::nullopt});
        if (done) return st;
        if (st.iter >= static_cast<std::size_t>(cfg.max_global_iters))
            throw GlobalNotConverged("global search did not converge within max_global_iters", std::move(st));
        reproduce(st, sim, cfg, threads);
    }
}

}  // namespace ifit::global
