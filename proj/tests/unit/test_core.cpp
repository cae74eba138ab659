#include "oracles.hpp"

#include "ifit/core/archive.hpp"
#include "ifit/core/config.hpp"
#include "ifit/core/simulator.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

using namespace ifit;

TEST(Config, DefaultValues) {
    const Config c = validate_config(Config{});
    EXPECT_EQ(c.n_init, 1000);
    EXPECT_EQ(c.n_elite, 100);
    EXPECT_EQ(c.a_elite, 0.5);
    EXPECT_EQ(c.tol_global, 0.1);
    EXPECT_EQ(c.tol_local, 1.0);
    EXPECT_EQ(c.tol_model, 1.5);
    EXPECT_EQ(c.nfit_local, 4000);
    EXPECT_EQ(c.nadd_global, 100);
    EXPECT_EQ(c.nadd_local, 10);
    EXPECT_EQ(c.rho_max, 0.1);
    EXPECT_EQ(c.lambda, 0.1);
}

TEST(Config, EliteLargerThanInitialSampleIsRejected) {
    Config c;
    c.n_elite = 2000;
    try {
        validate_config(c);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("n_elite exceeds n_init"), std::string::npos);
    }
}

TEST(Config, LambdaBoundaries) {
    Config c;
    c.lambda = 0.0;
    EXPECT_THROW(validate_config(c), ConfigError);
    c.lambda = 1.0;
    EXPECT_NO_THROW(validate_config(c));
    c.lambda = 1.5;
    EXPECT_THROW(validate_config(c), ConfigError);
}

TEST(Config, EliteDecayOutsideUnitIntervalIsRejected) {
    Config c;
    c.a_elite = 1.0;
    EXPECT_THROW(validate_config(c), ConfigError);
    c.a_elite = 0.0;
    EXPECT_THROW(validate_config(c), ConfigError);
}

TEST(Config, ErrorListsEveryViolation) {
    Config c;
    c.n_elite = 2000;
    c.lambda = 0.0;
    try {
        validate_config(c);
        FAIL();
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("n_elite"), std::string::npos);
        EXPECT_NE(msg.find("lambda"), std::string::npos);
    }
}

TEST(Config, JsonRoundTrip) {
    Config c;
    c.n_init = 500;
    c.lambda = 0.25;
    c.model_check_center = ModelCheckCenter::current;
    c.seed = 42;
    const Config back = nlohmann::json(c).get<Config>();
    EXPECT_EQ(back, c);
}

TEST(Config, UnknownKeyIsRejected) {
    const auto j = nlohmann::json::parse(R"({"n_init": 500, "lamda": 0.2})");
    EXPECT_THROW(j.get<Config>(), ConfigError);
}

TEST(Config, MissingKeysKeepDefaults) {
    const auto c = nlohmann::json::parse(R"({"n_init": 600})").get<Config>();
    EXPECT_EQ(c.n_init, 600);
    EXPECT_EQ(c.n_elite, 100);
}

TEST(Config, LoadFromFileAndReportBadJson) {
    const std::string path = ::testing::TempDir() + "ifit_cfg.json";
    std::ofstream(path) << R"({"n_init": 800, "tol_model": 2.0})";
    const Config c = load_config(path);
    EXPECT_EQ(c.n_init, 800);
    EXPECT_EQ(c.tol_model, 2.0);
    std::ofstream(path) << "{not json";
    EXPECT_THROW(load_config(path), ConfigError);
    EXPECT_THROW(load_config(path + ".missing"), ConfigError);
    std::remove(path.c_str());
}

TEST(Bounds, RejectsInvertedOrEmptyBox) {
    EXPECT_THROW(Bounds(Vector::Zero(2), Vector::Zero(2)), ConfigError);
    EXPECT_THROW(Bounds(Vector::Zero(2), Vector::Ones(3)), ConfigError);
    const Bounds b(Vector::Zero(2), Vector::Ones(2));
    EXPECT_TRUE(b.contains((Vector(2) << 0.0, 1.0).finished()));
    EXPECT_FALSE(b.contains((Vector(2) << -0.1, 0.5).finished()));
    EXPECT_EQ(b.clamp((Vector(2) << -3.0, 3.0).finished()), (Vector(2) << 0.0, 1.0).finished());
}

TEST(Archive, AppendOnlyWithValidation) {
    SimArchive a(Bounds(Vector::Zero(2), Vector::Ones(2)), Vector::Zero(3));
    a.append((Vector(2) << 0.5, 0.5).finished(), (Vector(3) << 1, 2, 3).finished());
    EXPECT_EQ(a.size(), 1u);
    EXPECT_THROW(a.append((Vector(2) << 1.5, 0.5).finished(), Vector::Zero(3)), DataError);
    EXPECT_THROW(a.append((Vector(2) << 0.5, 0.5).finished(), Vector::Zero(2)), DataError);
    Vector bad = Vector::Zero(3);
    bad[1] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(a.append((Vector(2) << 0.5, 0.5).finished(), bad), DataError);
    EXPECT_EQ(a.size(), 1u);
    EXPECT_EQ(a.stat(0)[2], 3.0);
}

TEST(Archive, RequiresAtLeastAsManyStatisticsAsParameters) {
    EXPECT_THROW(SimArchive(Bounds(Vector::Zero(3), Vector::Ones(3)), Vector::Zero(2)), DataError);
}

namespace {

class FlakySim final : public Simulator {
public:
    explicit FlakySim(int failures) : failures_(failures), bounds_(Vector::Zero(1), Vector::Ones(1)) {}
    const Bounds& bounds() const override { return bounds_; }
    std::size_t dim_stat() const override { return 1; }
    Vector simulate(const Vector& theta, RngStream) const override {
        if (calls_++ < failures_) throw ModelError("flaky", theta);
        return theta;
    }

private:
    int failures_;
    Bounds bounds_;
    mutable int calls_ = 0;
};

}  // namespace

TEST(Simulator, FailedBatchIsRetriedOnceThenPropagates) {
    std::vector<Vector> thetas{Vector::Constant(1, 0.3), Vector::Constant(1, 0.6)};
    {
        SimArchive a(Bounds(Vector::Zero(1), Vector::Ones(1)), Vector::Zero(1));
        FlakySim sim(1);
        simulate_and_append(a, sim, thetas, 9, 1);
        EXPECT_EQ(a.size(), 2u);
    }
    {
        SimArchive a(Bounds(Vector::Zero(1), Vector::Ones(1)), Vector::Zero(1));
        FlakySim sim(3);
        try {
            simulate_and_append(a, sim, thetas, 9, 1);
            FAIL();
        } catch (const ModelError& e) {
            EXPECT_EQ(e.theta().size(), 1);
        }
        EXPECT_EQ(a.size(), 0u);
    }
}

TEST(Simulator, ParallelForRethrowsLowestIndexFailure) {
    try {
        parallel_for(10, 3, [](std::size_t i) {
            if (i == 7 || i == 4) throw std::runtime_error(std::to_string(i));
        });
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "4");
    }
}

TEST(Simulator, BatchResultsDoNotDependOnThreadCount) {
    const ifit_test::LinearGaussianSim sim(Vector::Zero(2), Matrix::Identity(2, 2), 1.0,
                                           Bounds(Vector::Zero(2), Vector::Ones(2)));
    std::vector<Vector> thetas(37, Vector::Constant(2, 0.5));
    std::vector<std::uint64_t> keys(37);
    for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = RngStream::derive_key(5, {i});
    const auto a = simulate_batch(sim, thetas, keys, 1);
    const auto b = simulate_batch(sim, thetas, keys, 4);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}
