#include "ifit/cli/app.hpp"
#include "ifit/cli/subprocess.hpp"
#include "ifit/harness/fit.hpp"
#include "ifit/harness/io.hpp"
#include "ifit/models/registry.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace ifit;
using ifit::cli::SubprocessSimulator;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("ifit_cli_" + name)).string();
}

class ScopedEnv {
public:
    ScopedEnv(const char* name, const std::string& value) : name_(name) { ::setenv(name, value.c_str(), 1); }
    ~ScopedEnv() { ::unsetenv(name_); }
    ScopedEnv(const ScopedEnv&) = delete;
    ScopedEnv& operator=(const ScopedEnv&) = delete;

private:
    const char* name_;
};

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "ifit");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& path) {
    std::ifstream in(path);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

std::string write_small_config() {
    Config cfg;
    cfg.n_init = 400;
    cfg.n_elite = 50;
    cfg.nadd_global = 50;
    cfg.nfit_local = 600;
    const std::string p = temp_path("small_config.json");
    harness::write_json(cfg, p);
    return p;
}

Bounds unit_box(Eigen::Index p) { return Bounds(Vector::Zero(p), Vector::Ones(p)); }

}  // namespace

TEST(Subprocess, EchoReturnsTheParameter) {
    const SubprocessSimulator sim(IFIT_ECHO_STUB, unit_box(3), 3, 2);
    const Vector theta = (Vector(3) << 0.1, 0.25, 0.125).finished();
    EXPECT_EQ(sim.simulate(theta, RngStream(1)), theta);
    EXPECT_EQ(sim.simulate(theta * 2, RngStream(2)), theta * 2);
    EXPECT_EQ(sim.spawn_count(), 1u);
}

TEST(Subprocess, PoolServesParallelBatches) {
    const SubprocessSimulator sim(IFIT_ECHO_STUB, unit_box(2), 2, 3);
    std::vector<Vector> thetas;
    for (int i = 0; i < 40; ++i) thetas.push_back((Vector(2) << i / 40.0, 1.0 - i / 40.0).finished());
    std::vector<std::uint64_t> keys(thetas.size());
    for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = i;
    const auto out = simulate_batch(sim, thetas, keys, 4);
    for (std::size_t i = 0; i < thetas.size(); ++i) EXPECT_EQ(out[i], thetas[i]);
    EXPECT_LE(sim.spawn_count(), 3u);
}

TEST(Subprocess, WrongLengthIsAProtocolError) {
    const SubprocessSimulator sim(IFIT_WRONG_LENGTH_STUB, unit_box(3), 3);
    try {
        sim.simulate(Vector::Constant(3, 0.5), RngStream(1));
        FAIL();
    } catch (const ProtocolError& e) {
        EXPECT_NE(std::string(e.what()).find("returned 4 statistics, expected 3"), std::string::npos);
    }
}

TEST(Subprocess, TimeoutRestartsTheChildOnce) {
    const std::string marker = temp_path("sleepy_marker");
    std::filesystem::remove(marker);
    const ScopedEnv env("SLEEPY_STUB_MARKER", marker);
    const SubprocessSimulator sim(IFIT_SLEEPY_STUB, unit_box(2), 2, 1, std::chrono::milliseconds(500));
    const Vector theta = (Vector(2) << 0.3, 0.7).finished();
    EXPECT_EQ(sim.simulate(theta, RngStream(1)), theta);
    EXPECT_EQ(sim.spawn_count(), 2u);
    std::filesystem::remove(marker);
}

TEST(Subprocess, MissingExecutableIsAConfigError) {
    EXPECT_THROW(SubprocessSimulator(temp_path("no_such_program"), unit_box(1), 1), ConfigError);
}

TEST(Subprocess, ExternalLogitFitMatchesInProcess) {
    const std::uint64_t seed = 31;
    const auto d = models::make_dataset("logit", seed, 0);
    const ScopedEnv env("LOGIT_STUB_DATA_KEY", std::to_string(RngStream::derive_key(seed, {stream_tag::dataset, 0})));
    const SubprocessSimulator ext(IFIT_LOGIT_STUB, d.sim->bounds(), 4, 4);
    Config cfg;
    cfg.seed = 5;
    const FitResult a = harness::fit(*d.sim, d.t_obs, cfg, 4);
    const FitResult b = harness::fit(ext, d.t_obs, cfg, 4);
    EXPECT_EQ(a.estimate, b.estimate);
    EXPECT_EQ(a.covariance, b.covariance);
    EXPECT_EQ(a.n_simulations, b.n_simulations);
}

TEST(Cli, MissingConfigIsAUsageError) {
    const auto r = run_cli({"fit", "--model", "logit", "--seed", "1", "--out", temp_path("x.json")});
    EXPECT_EQ(r.code, cli::kUsage);
    EXPECT_NE(r.err.find("--config"), std::string::npos);
}

TEST(Cli, UnknownModelIsAUsageError) {
    const auto cfg = write_small_config();
    const auto r = run_cli({"fit", "--model", "nope", "--config", cfg, "--seed", "1", "--out", temp_path("x.json")});
    EXPECT_EQ(r.code, cli::kUsage);
    EXPECT_NE(r.err.find("unknown model 'nope'"), std::string::npos);
    EXPECT_EQ(run_cli({"bench", "--model", "nope"}).code, cli::kUsage);
}

TEST(Cli, InvalidConfigIsAUsageError) {
    const std::string p = temp_path("bad_config.json");
    std::ofstream(p) << "{\"lambda\": 0}";
    const auto r = run_cli({"fit", "--model", "logit", "--config", p, "--seed", "1", "--out", temp_path("x.json")});
    EXPECT_EQ(r.code, cli::kUsage);
    EXPECT_NE(r.err.find("lambda"), std::string::npos);
}

TEST(Cli, ExecFitWithObservedAndBounds) {
    const std::uint64_t seed = 12;
    const auto d = models::make_dataset("logit", seed, 0);
    const ScopedEnv env("LOGIT_STUB_DATA_KEY", std::to_string(RngStream::derive_key(seed, {stream_tag::dataset, 0})));
    const std::string obs = temp_path("obs.json");
    const std::string bounds = temp_path("bounds.json");
    std::ofstream(obs) << nlohmann::json{{"t", ifit::detail::vector_json(d.t_obs)}}.dump();
    std::ofstream(bounds) << R"({"lower":[-5,-5,-5,-5],"upper":[5,5,5,5]})";
    const std::string out = temp_path("exec_result.json");
    const auto r = run_cli({"fit", "--model", std::string("exec:") + IFIT_LOGIT_STUB, "--obs", obs, "--bounds", bounds,
                            "--config", "/dev/null", "--seed", "3", "--out", out});
    // /dev/null is not a JSON config.
    EXPECT_EQ(r.code, cli::kUsage);
    const auto cfg = write_small_config();
    const auto ok = run_cli({"fit", "--model", std::string("exec:") + IFIT_LOGIT_STUB, "--obs", obs, "--bounds", bounds,
                             "--config", cfg, "--seed", "3", "--out", out});
    ASSERT_EQ(ok.code, cli::kSuccess) << ok.err;
    EXPECT_EQ(harness::read_result(out).estimate.size(), 4);
    EXPECT_NE(ok.out.find("not applicable"), std::string::npos);
    const auto no_bounds = run_cli({"fit", "--model", std::string("exec:") + IFIT_LOGIT_STUB, "--obs", obs, "--config",
                                    cfg, "--seed", "3", "--out", out});
    EXPECT_EQ(no_bounds.code, cli::kUsage);
}

TEST(Cli, ToadCsvFitAndDiagnose) {
    const models::ToadSimulator toad;
    RngStream rng(17);
    const models::ToadData data{toad.simulate_positions(models::ToadSimulator::theta_true(), rng),
                                models::Mask::Constant(66, 63, true)};
    const std::string csv = temp_path("toads.csv");
    models::write_toad_csv(data, csv);
    const auto cfg = write_small_config();
    const std::string out = temp_path("toad_result.json");
    const std::string scores = temp_path("toad_scores.csv");
    const std::string trace = temp_path("toad_trace.csv");
    const auto r = run_cli({"fit", "--model", "toad", "--toad-csv", csv, "--config", cfg, "--seed", "2", "--out", out,
                            "--scores-csv", scores, "--trace-csv", trace});
    ASSERT_EQ(r.code, cli::kSuccess) << r.err;
    const FitResult res = harness::read_result(out);
    EXPECT_EQ(res.estimate.size(), 3);
    EXPECT_EQ(res.std_scores.size(), 88);
    EXPECT_EQ(res.sh_df, 85);
    EXPECT_EQ(count_lines(scores), 89u);
    EXPECT_EQ(count_lines(trace), res.trace.size() + 1);

    const auto diag = run_cli({"diagnose", "--result", out});
    EXPECT_EQ(diag.code, cli::kSuccess);
    EXPECT_NE(diag.out.find("Sargan-Hansen statistic"), std::string::npos);
    EXPECT_NE(diag.out.find("on 85 df"), std::string::npos);

    EXPECT_EQ(run_cli({"fit", "--model", "logit", "--toad-csv", csv, "--config", cfg, "--seed", "2", "--out", out}).code,
              cli::kUsage);
}

TEST(Cli, DiagnoseMissingFile) {
    EXPECT_EQ(run_cli({"diagnose", "--result", temp_path("absent.json")}).code, cli::kUsage);
}

TEST(Cli, BenchAndMcerrWriteReports) {
    const auto cfg = write_small_config();
    const std::string bench = temp_path("bench.json");
    const auto b = run_cli({"bench", "--model", "logit", "--reps", "2", "--config", cfg, "--seed", "4", "--out", bench});
    EXPECT_EQ(b.code, cli::kSuccess) << b.err;
    EXPECT_EQ(harness::read_json_file(bench).at("reps").get<int>(), 2);
    EXPECT_NE(b.out.find("AARE"), std::string::npos);
    const std::string mc = temp_path("mcerr.json");
    const auto m = run_cli({"mcerr", "--model", "logit", "--datasets", "2", "--repeats", "2", "--config", cfg, "--seed",
                            "4", "--out", mc});
    EXPECT_EQ(m.code, cli::kSuccess) << m.err;
    EXPECT_EQ(harness::read_json_file(mc).at("ratio").size(), 4u);
}

TEST(Cli, ExecutableReportsUsage) {
    const std::string cmd = std::string(IFIT_CLI) + " fit --model logit > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    ASSERT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), 1);
}
