#pragma once

#include "ifit/core/config.hpp"
#include "ifit/core/result.hpp"
#include "ifit/core/simulator.hpp"
#include "ifit/harness/fit.hpp"
#include "ifit/models/registry.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace ifit::harness {

/// Outcome of one benchmark replication.
struct ReplicationRecord {
    std::size_t rep = 0;
    bool ok = false;
    Vector estimate;
    Vector std_errors;
    std::size_t n_simulations = 0;
    std::string failure;  // empty when ok
};

/// Spread of estimates and reported standard errors for one parameter.
struct SeSummary {
    double se = 0.0;      // empirical sd of the estimates
    double ave_se = 0.0;  // mean reported standard error
    double sd_se = 0.0;   // sd of reported standard errors
};

struct BenchmarkReport {
    std::string model;
    std::size_t reps = 0;
    std::uint64_t master_seed = 0;
    Vector theta_true;
    double ams = 0.0;
    double aare = 0.0;
    std::vector<SeSummary> se_table;
    std::size_t failures = 0;
    std::vector<std::string> failure_reasons;
    bool failure_flag = false;  // more than 5% of replications failed
    std::vector<ReplicationRecord> replications;
};

using DatasetFactory = std::function<models::Dataset(std::uint64_t rep)>;

/// Engine seed of replication `rep`.
inline std::uint64_t replication_seed(std::uint64_t master_seed, std::uint64_t rep) {
    return RngStream::derive_key(master_seed, {stream_tag::engine, rep});
}

namespace detail {

inline double sample_sd(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

}  // namespace detail

/// AMS, AARE and the standard-error table over the successful replications.
inline void summarize_replications(BenchmarkReport& report) {
    const auto p = static_cast<std::size_t>(report.theta_true.size());
    std::vector<std::vector<double>> est(p);
    std::vector<std::vector<double>> ses(p);
    double sims = 0.0;
    double are = 0.0;
    std::size_t ok = 0;
    report.failures = 0;
    report.failure_reasons.clear();
    for (const auto& r : report.replications) {
        if (!r.ok) {
            ++report.failures;
            report.failure_reasons.push_back("replication " + std::to_string(r.rep) + ": " + r.failure);
            continue;
        }
        ++ok;
        sims += static_cast<double>(r.n_simulations);
        for (std::size_t j = 0; j < p; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            est[j].push_back(r.estimate[jj]);
            ses[j].push_back(r.std_errors[jj]);
            are += std::abs((r.estimate[jj] - report.theta_true[jj]) / report.theta_true[jj]);
        }
    }
    report.ams = ok ? sims / static_cast<double>(ok) : 0.0;
    report.aare = ok ? are / static_cast<double>(ok * p) : 0.0;
    report.se_table.assign(p, {});
    for (std::size_t j = 0; j < p; ++j) {
        if (ses[j].empty()) continue;
        double mean = 0.0;
        for (double v : ses[j]) mean += v;
        report.se_table[j] = {detail::sample_sd(est[j]), mean / static_cast<double>(ses[j].size()),
                              detail::sample_sd(ses[j])};
    }
    report.failure_flag = static_cast<double>(report.failures) > 0.05 * static_cast<double>(report.reps);
}

/// Fits `reps` synthetic datasets. Replication j uses dataset stream j and
/// engine seed replication_seed(master_seed, j), so the report does not
/// depend on `threads`. Replications run in parallel, each fit single-threaded.
inline BenchmarkReport benchmark(const std::string& model, const DatasetFactory& make, const Vector& theta_true,
                                 std::size_t reps, const Config& cfg, std::uint64_t master_seed,
                                 std::size_t threads = 1) {
    validate_config(cfg);
    BenchmarkReport report;
    report.model = model;
    report.reps = reps;
    report.master_seed = master_seed;
    report.theta_true = theta_true;
    report.replications.resize(reps);
    parallel_for(reps, threads, [&](std::size_t j) {
        ReplicationRecord& rec = report.replications[j];
        rec.rep = j;
        Config c = cfg;
        c.seed = replication_seed(master_seed, j);
        try {
            const models::Dataset d = make(j);
            const FitResult r = fit(*d.sim, d.t_obs, c, 1);
            rec.ok = true;
            rec.estimate = r.estimate;
            rec.std_errors = r.std_errors;
            rec.n_simulations = r.n_simulations;
        } catch (const NonConvergence& e) {
            rec.failure = e.what();
            rec.n_simulations = e.partial().n_simulations;
        } catch (const Error& e) {
            rec.failure = e.what();
        }
    });
    summarize_replications(report);
    return report;
}

/// Benchmark of a built-in model at its true parameter.
inline BenchmarkReport benchmark(const std::string& model, std::size_t reps, const Config& cfg,
                                 std::uint64_t master_seed, std::size_t threads = 1) {
    const Vector theta = models::theta_true(model);
    return benchmark(
        model, [&](std::uint64_t rep) { return models::make_dataset(model, master_seed, rep); }, theta, reps, cfg,
        master_seed, threads);
}

struct McErrorReport {
    std::string model;
    std::size_t datasets = 0;
    std::size_t repeats = 0;
    Vector ratio;                               // SS_within / SS_total per parameter
    std::vector<std::vector<Vector>> estimates;  // [dataset][repeat], empty when that fit failed
    std::size_t failures = 0;
    std::vector<std::string> failure_reasons;
};

/// One-way ANOVA ratio SS_within / SS_total per parameter over groups of
/// estimates. A zero total gives ratio 0.
inline Vector within_total_ratio(const std::vector<std::vector<Vector>>& groups, Eigen::Index p) {
    Vector grand = Vector::Zero(p);
    std::size_t n = 0;
    for (const auto& g : groups)
        for (const auto& x : g) {
            grand += x;
            ++n;
        }
    Vector ratio = Vector::Zero(p);
    if (n == 0) return ratio;
    grand /= static_cast<double>(n);
    Vector within = Vector::Zero(p);
    Vector total = Vector::Zero(p);
    for (const auto& g : groups) {
        if (g.empty()) continue;
        Vector mean = Vector::Zero(p);
        for (const auto& x : g) mean += x;
        mean /= static_cast<double>(g.size());
        for (const auto& x : g) {
            within += (x - mean).cwiseAbs2();
            total += (x - grand).cwiseAbs2();
        }
    }
    for (Eigen::Index j = 0; j < p; ++j) ratio[j] = total[j] > 0.0 ? within[j] / total[j] : 0.0;
    return ratio;
}

/// G datasets, R fits of each with distinct engine streams (or one shared
/// stream when `identical_engine_seeds`), and the within/total ratio.
inline McErrorReport mc_error_study(const std::string& model, const DatasetFactory& make, Eigen::Index p,
                                    std::size_t datasets, std::size_t repeats, const Config& cfg, std::uint64_t seed,
                                    std::size_t threads = 1, bool identical_engine_seeds = false) {
    if (datasets < 2 || repeats < 2) throw ConfigError("mc error study needs at least 2 datasets and 2 repeats");
    validate_config(cfg);
    McErrorReport report;
    report.model = model;
    report.datasets = datasets;
    report.repeats = repeats;
    report.estimates.assign(datasets, std::vector<Vector>(repeats));
    std::vector<std::string> errors(datasets * repeats);
    std::vector<models::Dataset> data(datasets);
    parallel_for(datasets, threads, [&](std::size_t g) { data[g] = make(g); });
    parallel_for(datasets * repeats, threads, [&](std::size_t job) {
        const std::size_t g = job / repeats;
        const std::size_t r = job % repeats;
        Config c = cfg;
        c.seed = identical_engine_seeds ? RngStream::derive_key(seed, {stream_tag::engine, g})
                                        : RngStream::derive_key(seed, {stream_tag::engine, g, r});
        try {
            report.estimates[g][r] = fit(*data[g].sim, data[g].t_obs, c, 1).estimate;
        } catch (const Error& e) {
            errors[job] = e.what();
        }
    });
    std::vector<std::vector<Vector>> groups(datasets);
    for (std::size_t g = 0; g < datasets; ++g)
        for (std::size_t r = 0; r < repeats; ++r) {
            const std::string& err = errors[g * repeats + r];
            if (err.empty()) {
                groups[g].push_back(report.estimates[g][r]);
            } else {
                ++report.failures;
                report.failure_reasons.push_back("dataset " + std::to_string(g) + " repeat " + std::to_string(r) +
                                                 ": " + err);
            }
        }
    report.ratio = within_total_ratio(groups, p);
    return report;
}

inline McErrorReport mc_error_study(const std::string& model, std::size_t datasets, std::size_t repeats,
                                    const Config& cfg, std::uint64_t seed, std::size_t threads = 1,
                                    bool identical_engine_seeds = false) {
    const auto p = models::theta_true(model).size();
    return mc_error_study(
        model, [&](std::uint64_t g) { return models::make_dataset(model, seed, g); }, p, datasets, repeats, cfg, seed,
        threads, identical_engine_seeds);
}

}  // namespace ifit::harness
