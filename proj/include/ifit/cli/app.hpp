#pragma once

#include "ifit/cli/subprocess.hpp"
#include "ifit/core/config.hpp"
#include "ifit/core/errors.hpp"
#include "ifit/core/simulator.hpp"
#include "ifit/harness/benchmark.hpp"
#include "ifit/harness/fit.hpp"
#include "ifit/harness/io.hpp"
#include "ifit/models/registry.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace ifit::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kNonConvergence = 2, kModelFailure = 3 };

inline constexpr std::string_view kExecPrefix = "exec:";

/// Observed summary from a `{"t":[...]}` file.
inline Vector load_observed(const std::string& path) {
    const auto j = harness::read_json_file(path);
    if (!j.is_object() || !j.contains("t")) throw DataError("'" + path + "' must hold {\"t\":[...]}");
    try {
        return ifit::detail::vector_from(j.at("t"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("'" + path + "': " + e.what());
    }
}

/// Bounds from a `{"lower":[...],"upper":[...]}` file.
inline Bounds load_bounds(const std::string& path) {
    const auto j = harness::read_json_file(path);
    try {
        return Bounds(ifit::detail::vector_from(j.at("lower")), ifit::detail::vector_from(j.at("upper")));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("'" + path + "' must hold {\"lower\":[...],\"upper\":[...]}: " + e.what());
    }
}

inline void print_fit_summary(std::ostream& out, const FitResult& r) {
    out << std::setprecision(6);
    out << "converged: " << (r.converged ? "yes" : "no") << "\n";
    out << "simulations: " << r.n_simulations << "\n";
    out << "parameter  estimate  std_error\n";
    for (Eigen::Index i = 0; i < r.estimate.size(); ++i) {
        out << std::setw(9) << i << "  " << std::setw(8) << r.estimate[i];
        if (i < r.std_errors.size()) out << "  " << r.std_errors[i];
        out << "\n";
    }
}

inline void print_diagnostics(std::ostream& out, const FitResult& r) {
    out << std::setprecision(6);
    out << "Sargan-Hansen statistic: " << r.sh_stat << " on " << r.sh_df << " df, p-value: ";
    if (r.sh_pvalue)
        out << *r.sh_pvalue << "\n";
    else
        out << "not applicable (exactly identified)\n";
    out << "stat_index  score\n";
    for (Eigen::Index i = 0; i < r.std_scores.size(); ++i) {
        out << std::setw(10) << i << "  " << std::setw(9) << r.std_scores[i];
        if (std::abs(r.std_scores[i]) > 2.0) out << "  *";
        out << "\n";
    }
}

struct FitOptions {
    std::string model;
    std::string obs;
    std::string toad_csv;
    std::string config;
    std::string bounds;
    std::uint64_t seed = 0;
    std::string out;
    std::string trace_csv;
    std::string scores_csv;
    double timeout_s = 60.0;
};

struct StudyOptions {
    std::string model;
    std::size_t reps = 100;
    std::size_t datasets = 20;
    std::size_t repeats = 5;
    bool paper_scale = false;
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
};

inline Config read_config_or_default(const std::string& path) {
    return path.empty() ? Config{} : load_config(path);
}

inline int run_fit(const FitOptions& o, std::ostream& out) {
    Config cfg = load_config(o.config);
    cfg.seed = o.seed;
    std::shared_ptr<const Simulator> sim;
    Vector t_obs;
    if (o.model.rfind(kExecPrefix, 0) == 0) {
        if (o.obs.empty() || o.bounds.empty()) throw ConfigError("exec models need --obs and --bounds");
        t_obs = load_observed(o.obs);
        sim = std::make_shared<SubprocessSimulator>(o.model.substr(kExecPrefix.size()), load_bounds(o.bounds),
                                                    static_cast<std::size_t>(t_obs.size()), default_threads(),
                                                    std::chrono::milliseconds(static_cast<long>(o.timeout_s * 1000)));
    } else if (!models::is_builtin_model(o.model)) {
        throw ConfigError("unknown model '" + o.model + "'");
    } else if (!o.toad_csv.empty()) {
        if (o.model != "toad") throw ConfigError("--toad-csv requires --model toad");
        const models::ToadData data = models::load_toad_csv(o.toad_csv);
        t_obs = models::toad_summary(data.positions, &data.observed);
        sim = std::make_shared<models::ToadSimulator>(data.observed);
    } else {
        models::Dataset d = models::make_dataset(o.model, o.seed, 0);
        sim = d.sim;
        t_obs = o.obs.empty() ? d.t_obs : load_observed(o.obs);
    }

    FitResult result;
    int code = kSuccess;
    try {
        result = harness::fit(*sim, t_obs, cfg, default_threads());
    } catch (const NonConvergence& e) {
        result = e.partial();
        out << "warning: " << e.what() << "\n";
        code = kNonConvergence;
    }
    harness::write_result(result, o.out);
    if (!o.trace_csv.empty()) harness::write_trace_csv(result, o.trace_csv);
    if (!o.scores_csv.empty() && result.std_scores.size() > 0) harness::write_scores_csv(result, o.scores_csv);
    print_fit_summary(out, result);
    if (code == kSuccess) print_diagnostics(out, result);
    return code;
}

inline int run_bench(const StudyOptions& o, std::ostream& out) {
    const Config cfg = read_config_or_default(o.config);
    const std::size_t reps = o.paper_scale ? 1000 : o.reps;
    const auto report = harness::benchmark(o.model, reps, cfg, o.seed, default_threads());
    if (!o.out.empty()) harness::write_json(report, o.out);
    out << std::setprecision(6) << "model " << report.model << ", B = " << report.reps << "\n"
        << "AMS  " << report.ams << "\nAARE " << report.aare << "\n"
        << "parameter  se  ave_se  sd_se\n";
    for (std::size_t j = 0; j < report.se_table.size(); ++j)
        out << j << "  " << report.se_table[j].se << "  " << report.se_table[j].ave_se << "  "
            << report.se_table[j].sd_se << "\n";
    out << "failures " << report.failures << (report.failure_flag ? " (more than 5% of replications)" : "") << "\n";
    return report.failure_flag ? kNonConvergence : kSuccess;
}

inline int run_mcerr(const StudyOptions& o, std::ostream& out) {
    const Config cfg = read_config_or_default(o.config);
    const auto report = harness::mc_error_study(o.model, o.datasets, o.repeats, cfg, o.seed, default_threads());
    if (!o.out.empty()) harness::write_json(report, o.out);
    out << std::setprecision(6) << "model " << report.model << ", G = " << report.datasets
        << ", R = " << report.repeats << "\nparameter  within/total\n";
    for (Eigen::Index j = 0; j < report.ratio.size(); ++j) out << j << "  " << report.ratio[j] << "\n";
    out << "failures " << report.failures << "\n";
    return kSuccess;
}

/// Entry point shared by the ifit executable and the tests.
inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"ifit: simulation-based estimation by iterative indirect fitting"};
    app.require_subcommand(1);

    FitOptions fo;
    auto* fit = app.add_subcommand("fit", "Fit a built-in or external model");
    fit->add_option("--model", fo.model, "logit | enzyme | trait | toad | exec:PATH")->required();
    fit->add_option("--obs", fo.obs, "Observed summary as JSON {\"t\":[...]}");
    fit->add_option("--toad-csv", fo.toad_csv, "Toad positions CSV (toad_id,day,position)");
    fit->add_option("--config", fo.config, "Engine configuration JSON")->required();
    fit->add_option("--bounds", fo.bounds, "Parameter box for exec models as JSON {\"lower\":[...],\"upper\":[...]}");
    fit->add_option("--seed", fo.seed, "Master seed")->required();
    fit->add_option("--out", fo.out, "Result JSON")->required();
    fit->add_option("--trace-csv", fo.trace_csv, "Per-iteration trace CSV");
    fit->add_option("--scores-csv", fo.scores_csv, "Standardized scores CSV");
    fit->add_option("--timeout", fo.timeout_s, "Per-call timeout in seconds for exec models");

    StudyOptions bo;
    auto* bench = app.add_subcommand("bench", "Monte Carlo benchmark at the true parameter");
    bench->add_option("--model", bo.model, "logit | enzyme | trait | toad")->required();
    bench->add_option("--reps", bo.reps, "Number of replications B");
    bench->add_flag("--paper-scale", bo.paper_scale, "Use B = 1000");
    bench->add_option("--config", bo.config, "Engine configuration JSON");
    bench->add_option("--seed", bo.seed, "Master seed");
    bench->add_option("--out", bo.out, "Report JSON");

    StudyOptions mo;
    auto* mcerr = app.add_subcommand("mcerr", "Monte Carlo error study (within/total sum of squares)");
    mcerr->add_option("--model", mo.model, "logit | enzyme | trait | toad")->required();
    mcerr->add_option("--datasets", mo.datasets, "Number of datasets G");
    mcerr->add_option("--repeats", mo.repeats, "Fits per dataset R");
    mcerr->add_option("--config", mo.config, "Engine configuration JSON");
    mcerr->add_option("--seed", mo.seed, "Master seed");
    mcerr->add_option("--out", mo.out, "Report JSON");

    std::string result_path;
    auto* diagnose = app.add_subcommand("diagnose", "Print the Sargan-Hansen test and standardized scores");
    diagnose->add_option("--result", result_path, "Result JSON written by fit")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        err << app.help();
        return kUsage;
    }

    try {
        if (*fit) return run_fit(fo, out);
        if (*bench) {
            if (!models::is_builtin_model(bo.model)) throw ConfigError("unknown model '" + bo.model + "'");
            return run_bench(bo, out);
        }
        if (*mcerr) {
            if (!models::is_builtin_model(mo.model)) throw ConfigError("unknown model '" + mo.model + "'");
            return run_mcerr(mo, out);
        }
        const FitResult r = harness::read_result(result_path);
        print_diagnostics(out, r);
        return kSuccess;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const NonConvergence& e) {
        err << "error: " << e.what() << "\n";
        return kNonConvergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kModelFailure;
    }
}

}  // namespace ifit::cli
