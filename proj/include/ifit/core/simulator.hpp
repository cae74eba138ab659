#pragma once

#include "ifit/core/archive.hpp"
#include "ifit/core/types.hpp"
#include "ifit/sampling/rng.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace ifit {

using sampling::RngStream;

/// Generative model composed with its summary-statistic map:
/// (theta, stream) -> t. Implementations must be pure in (theta, stream)
/// and safe to call concurrently.
class Simulator {
public:
    virtual ~Simulator() = default;

    virtual const Bounds& bounds() const = 0;
    virtual std::size_t dim_stat() const = 0;
    virtual Vector simulate(const Vector& theta, RngStream rng) const = 0;

    std::size_t dim_theta() const { return bounds().dim(); }
};

/// Stream-derivation tags. Every random draw in the engine comes from a
/// stream keyed by (seed, tag, ...), never from shared mutable state.
namespace stream_tag {
inline constexpr std::uint64_t latin_hypercube = 1;
inline constexpr std::uint64_t global_reproduce = 2;
inline constexpr std::uint64_t local_sample = 3;
inline constexpr std::uint64_t simulation = 4;
inline constexpr std::uint64_t dataset = 5;
inline constexpr std::uint64_t engine = 6;
}  // namespace stream_tag

/// Worker count from IFIT_THREADS; unset or 0 means hardware concurrency.
inline std::size_t default_threads() {
    std::size_t n = 0;
    if (const char* env = std::getenv("IFIT_THREADS")) {
        char* end = nullptr;
        const auto v = std::strtoul(env, &end, 10);
        if (end != env) n = v;
    }
    if (n == 0) n = std::max(1U, std::thread::hardware_concurrency());
    return n;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Exceptions are
/// collected per index and the lowest-index one is rethrown after all
/// workers join, so failure reporting does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < n; i += workers) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Simulates a batch, one stream per draw, validating length and finiteness.
inline std::vector<Vector> simulate_batch(const Simulator& sim, const std::vector<Vector>& thetas,
                                          const std::vector<std::uint64_t>& keys, std::size_t threads) {
    std::vector<Vector> out(thetas.size());
    const auto q = static_cast<Eigen::Index>(sim.dim_stat());
    parallel_for(thetas.size(), threads, [&](std::size_t i) {
        Vector t = sim.simulate(thetas[i], RngStream(keys[i]));
        if (t.size() != q) {
            std::ostringstream os;
            os << "simulator returned " << t.size() << " statistics, expected " << q;
            throw ModelError(os.str(), thetas[i]);
        }
        if (!t.allFinite()) throw ModelError("simulator returned non-finite statistics", thetas[i]);
        out[i] = std::move(t);
    });
    return out;
}

/// Simulates `thetas` and appends the pairs to the archive. A failing batch is
/// retried once on fresh substreams; a second failure propagates and the
/// archive is left untouched. Returns the new statistics.
inline std::vector<Vector> simulate_and_append(SimArchive& archive, const Simulator& sim,
                                               const std::vector<Vector>& thetas, std::uint64_t seed,
                                               std::size_t threads) {
    const std::size_t base = archive.size();
    std::vector<Vector> stats;
    for (std::uint64_t attempt = 0;; ++attempt) {
        std::vector<std::uint64_t> keys(thetas.size());
        for (std::size_t i = 0; i < thetas.size(); ++i)
            keys[i] = RngStream::derive_key(seed, {stream_tag::simulation, base + i, attempt});
        try {
            stats = simulate_batch(sim, thetas, keys, threads);
            break;
        } catch (const ModelError&) {
            if (attempt >= 1) throw;
        }
    }
    for (std::size_t i = 0; i < thetas.size(); ++i) archive.append(thetas[i], stats[i]);
    return stats;
}

}  // namespace ifit
