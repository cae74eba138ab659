#include "oracles.hpp"

#include "ifit/local/local_search.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ifit;
using namespace ifit::local;
using ifit_test::LinearGaussianSim;

namespace {

/// A ranked global state over hand-placed points with hand-set distances.
global::GlobalState hand_state(const std::vector<double>& xs, const std::vector<double>& dist) {
    global::GlobalState gs;
    gs.archive = SimArchive(Bounds(Vector::Constant(1, -10.0), Vector::Constant(1, 10.0)), Vector::Zero(1));
    for (double x : xs) gs.archive.append(Vector::Constant(1, x), Vector::Constant(1, x));
    gs.bridge = Matrix::Zero(static_cast<Eigen::Index>(xs.size()), 1);
    gs.distance = Eigen::Map<const Vector>(dist.data(), static_cast<Eigen::Index>(dist.size()));
    return gs;
}

/// Local state with identity weighting and a given linear model.
LocalState linear_state(const Vector& tau, const Matrix& jac) {
    LocalState st;
    const Eigen::Index p = jac.cols();
    st.theta_hat = Vector::Zero(p);
    st.theta_tilde = Vector::Zero(p);
    st.tau = tau;
    st.jac_smooth = jac;
    st.sigma_smooth = Matrix::Identity(jac.rows(), jac.rows());
    st.rho = 0.01;
    st.smoothed = true;
    return st;
}

mathkit::LocalLinearFit fit_with_jac(const Matrix& jac) {
    mathkit::LocalLinearFit f;
    f.tau = Vector::Zero(jac.rows());
    f.jac = jac;
    f.err_cov = Matrix::Identity(jac.rows(), jac.rows());
    f.tau_cov = 0.01 * f.err_cov;
    return f;
}

}  // namespace

TEST(LocalInit, StartsAtMinimalDistanceWithTenthOfRhoMax) {
    const auto gs = hand_state({-3, 1.5, 4, 7}, {0.9, 0.2, 0.5, 0.3});
    const Config cfg;
    const LocalState st = init_local(gs, cfg);
    EXPECT_EQ(st.theta_hat[0], 1.5);
    EXPECT_DOUBLE_EQ(st.rho, 0.01);
    EXPECT_EQ(st.fit_size, 100u);
    EXPECT_FALSE(st.smoothed);
}

TEST(LocalInit, TiesGoToTheLowestIndex) {
    const auto gs = hand_state({-3, 1.5, 4, 7}, {0.9, 0.2, 0.5, 0.2});
    EXPECT_EQ(init_local(gs, Config{}).theta_hat[0], 1.5);
}

TEST(LocalInit, RejectsUnrankedState) {
    global::GlobalState gs;
    gs.archive = SimArchive(Bounds(Vector::Zero(1), Vector::Ones(1)), Vector::Zero(1));
    EXPECT_THROW(init_local(gs, Config{}), Error);
}

TEST(NearestPoints, UsesUnitScaleBelowOneAndRelativeScaleAbove) {
    SimArchive a(Bounds(Vector::Constant(2, -100.0), Vector::Constant(2, 100.0)), Vector::Zero(2));
    a.append((Vector(2) << 10.0, 0.0).finished(), Vector::Zero(2));   // 0: at the center
    a.append((Vector(2) << 14.0, 0.0).finished(), Vector::Zero(2));   // 1: 4^2 / 100 = 0.16
    a.append((Vector(2) << 10.0, 0.5).finished(), Vector::Zero(2));   // 2: 0.5^2 = 0.25
    a.append((Vector(2) << 10.0, -0.3).finished(), Vector::Zero(2));  // 3: 0.09
    const Vector c = (Vector(2) << 10.0, 0.0).finished();
    EXPECT_EQ(nearest_points(a, c, 1), (std::vector<std::size_t>{0}));
    EXPECT_EQ(nearest_points(a, c, 2), (std::vector<std::size_t>{0, 3}));
    EXPECT_EQ(nearest_points(a, c, 3), (std::vector<std::size_t>{0, 1, 3}));
    EXPECT_EQ(nearest_points(a, c, 10).size(), 4u);
}

TEST(Ewma, FirstFitIsTakenAsIs) {
    LocalState st;
    st.theta_hat = Vector::Zero(1);
    Config cfg;
    Matrix j(2, 1);
    j << 3.0, -1.0;
    absorb_fit(st, fit_with_jac(j), Vector::Zero(2), cfg);
    EXPECT_EQ(st.jac_smooth, j);
    EXPECT_TRUE(st.smoothed);
}

TEST(Ewma, LambdaOneKeepsOnlyTheLatestFit) {
    LocalState st;
    Config cfg;
    cfg.lambda = 1.0;
    Matrix j1(1, 1), j2(1, 1);
    j1 << 2.0;
    j2 << 5.0;
    absorb_fit(st, fit_with_jac(j1), Vector::Zero(1), cfg);
    absorb_fit(st, fit_with_jac(j2), Vector::Zero(1), cfg);
    EXPECT_EQ(st.jac_smooth(0, 0), 5.0);
}

TEST(Ewma, AlternatingFitsReachTheGeometricFixedPoint) {
    LocalState st;
    Config cfg;
    cfg.lambda = 0.3;
    Matrix b1(1, 1), b2(1, 1);
    b1 << 1.0;
    b2 << 4.0;
    for (int k = 0; k < 200; ++k) {
        absorb_fit(st, fit_with_jac(b1), Vector::Zero(1), cfg);
        absorb_fit(st, fit_with_jac(b2), Vector::Zero(1), cfg);
    }
    const double l = cfg.lambda;
    EXPECT_NEAR(st.jac_smooth(0, 0), ((1 - l) * 1.0 + 4.0) / (2 - l), 1e-12);
    absorb_fit(st, fit_with_jac(b1), Vector::Zero(1), cfg);
    EXPECT_NEAR(st.jac_smooth(0, 0), (1.0 + (1 - l) * 4.0) / (2 - l), 1e-12);
}

TEST(Ewma, EstimatingFunctionQuantities) {
    LocalState st;
    Config cfg;
    Matrix j(2, 1);
    j << 1.0, 2.0;
    mathkit::LocalLinearFit f = fit_with_jac(j);
    f.tau = (Vector(2) << 0.5, -1.0).finished();
    f.err_cov = (Matrix(2, 2) << 4.0, 0.0, 0.0, 1.0).finished();
    f.tau_cov = 0.5 * f.err_cov;
    absorb_fit(st, f, Vector::Zero(2), cfg);
    // g = J' S^-1 (t - tau) = 1 * (-0.5) / 4 + 2 * 1 / 1
    EXPECT_NEAR(st.g_hat[0], -0.125 + 2.0, 1e-14);
    // Omega = 1 / 4 + 4 / 1, U = 0.5 Omega
    EXPECT_NEAR(st.omega_hat(0, 0), 4.25, 1e-14);
    EXPECT_NEAR(st.u_mat(0, 0), 2.125, 1e-14);
}

TEST(Propose, ZeroScoreStaysPut) {
    LocalState st = linear_state(Vector::Zero(2), Matrix::Identity(2, 2));
    st.theta_hat = (Vector(2) << 0.3, -0.2).finished();
    st.omega_hat = Matrix::Identity(2, 2);
    st.g_hat = Vector::Zero(2);
    const Bounds b(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
    EXPECT_LT((propose_candidate(st, b) - st.theta_hat).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Propose, SmallScoreTakesTheNewtonStep) {
    LocalState st = linear_state(Vector::Zero(2), Matrix::Identity(2, 2));
    st.omega_hat = (Matrix(2, 2) << 2.0, 0.5, 0.5, 1.0).finished();
    st.g_hat = (Vector(2) << 0.01, -0.004).finished();
    st.rho = 0.1;
    const Bounds b(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
    const Vector newton = st.omega_hat.ldlt().solve(st.g_hat);
    EXPECT_LT((propose_candidate(st, b) - newton).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Propose, LargeScoreIsCappedByRelativeTrustRegion) {
    LocalState st = linear_state(Vector::Zero(2), Matrix::Identity(2, 2));
    st.theta_hat = (Vector(2) << 20.0, 0.5).finished();
    st.omega_hat = Matrix::Identity(2, 2);
    st.g_hat = (Vector(2) << 100.0, -100.0).finished();
    st.rho = 0.05;
    const Bounds b(Vector::Constant(2, -50.0), Vector::Constant(2, 50.0));
    const Vector c = propose_candidate(st, b);
    EXPECT_NEAR(c[0], 21.0, 1e-12);  // 0.05 * 20
    EXPECT_NEAR(c[1], 0.45, 1e-12);  // 0.05 * max(1, 0.5)
}

TEST(Propose, StaysInsideTheBox) {
    LocalState st = linear_state(Vector::Zero(1), Matrix::Identity(1, 1));
    st.theta_hat = Vector::Constant(1, 0.99);
    st.omega_hat = Matrix::Identity(1, 1);
    st.g_hat = Vector::Constant(1, 5.0);
    st.rho = 0.1;
    EXPECT_EQ(propose_candidate(st, Bounds(Vector::Zero(1), Vector::Ones(1)))[0], 1.0);
}

TEST(ModelCheck, ExactModelIsAcceptedAndRhoDoublesUpToTheCap) {
    Config cfg;
    Matrix j(1, 1);
    j << 2.0;
    LocalState st = linear_state(Vector::Constant(1, 1.0), j);
    st.theta_tilde = Vector::Constant(1, 0.3);
    st.rho = 0.04;
    Matrix th(2, 1), t(2, 1);
    th << 0.2, 0.5;
    t << 1.0 + 2.0 * (0.2 - 0.3), 1.0 + 2.0 * (0.5 - 0.3);
    EXPECT_TRUE(check_and_adapt(st, th, t, cfg));
    EXPECT_DOUBLE_EQ(st.rho, 0.08);
    EXPECT_EQ(st.theta_hat[0], 0.3);
    EXPECT_TRUE(check_and_adapt(st, th, t, cfg));
    EXPECT_DOUBLE_EQ(st.rho, 0.1);
}

TEST(ModelCheck, ThresholdIsQTimesNaddTimesTol) {
    Config cfg;  // tol_model = 1.5, q = 1, two points: threshold 3
    LocalState st = linear_state(Vector::Zero(1), Matrix::Zero(1, 1));
    const Matrix th = Matrix::Zero(2, 1);
    Matrix inside(2, 1), outside(2, 1);
    inside << std::sqrt(1.4), -std::sqrt(1.4);
    outside << std::sqrt(1.6), -std::sqrt(1.6);
    EXPECT_NEAR(model_misfit(st, th, inside, st.theta_tilde), 2.8, 1e-12);
    st.theta_tilde = Vector::Constant(1, 0.7);
    st.rho = 0.02;
    EXPECT_FALSE(check_and_adapt(st, th, outside, cfg));
    EXPECT_DOUBLE_EQ(st.rho, 0.005);
    EXPECT_EQ(st.theta_hat[0], 0.0);
    EXPECT_TRUE(check_and_adapt(st, th, inside, cfg));
    EXPECT_EQ(st.theta_hat[0], 0.7);
}

TEST(ModelCheck, CurrentCenterOption) {
    Config cfg;
    cfg.model_check_center = ModelCheckCenter::current;
    Matrix j(1, 1);
    j << 1.0;
    LocalState st = linear_state(Vector::Zero(1), j);
    st.theta_tilde = Vector::Constant(1, 5.0);
    Matrix th(1, 1), t(1, 1);
    th << 0.4;
    t << 0.4;  // exact around theta_hat = 0, off by 5 around theta_tilde
    EXPECT_TRUE(check_and_adapt(st, th, t, cfg));
    cfg.model_check_center = ModelCheckCenter::candidate;
    st.theta_hat = Vector::Zero(1);
    EXPECT_FALSE(check_and_adapt(st, th, t, cfg));
}

TEST(LocalConvergence, Cases) {
    Config cfg;
    LocalState st = linear_state(Vector::Zero(1), Matrix::Identity(1, 1));
    st.g_hat = Vector::Constant(1, 2.0);
    st.u_mat = Matrix::Identity(1, 1);
    st.fit_size = 4000;
    EXPECT_FALSE(local_converged(st, cfg));  // 4 >= 1 * 1
    cfg.tol_local = 5.0;
    EXPECT_TRUE(local_converged(st, cfg));
    st.fit_size = 3990;
    EXPECT_FALSE(local_converged(st, cfg));
    st.fit_size = 4000;
    st.g_hat = Vector::Zero(1);
    cfg.tol_local = 1.0;
    EXPECT_TRUE(local_converged(st, cfg));
    EXPECT_DOUBLE_EQ(*score_norm_sq(st), 0.0);
}

namespace {

LinearGaussianSim linear_model() {
    Matrix b(3, 2);
    b << 1.0, 0.0, 0.0, 1.0, 1.0, 1.0;
    return LinearGaussianSim(Vector::Zero(3), b, 0.05, Bounds(Vector::Constant(2, -2.0), Vector::Constant(2, 2.0)));
}

}  // namespace

TEST(LocalSearch, LinearGaussianModelEndToEnd) {
    const auto sim = linear_model();
    const Vector theta0 = (Vector(2) << 0.6, -0.4).finished();
    const Vector t_obs = sim.slope() * theta0;
    Config cfg;
    cfg.n_init = 300;
    cfg.n_elite = 40;
    cfg.nadd_global = 50;
    cfg.nfit_local = 400;
    cfg.seed = 11;
    const FitResult r = run_local(global::run_global(sim, t_obs, cfg), sim, cfg);
    EXPECT_TRUE(r.converged);
    // With noiseless t_obs at theta0 the estimate sits within a few standard errors.
    const double se = 0.05 * std::sqrt(2.0 / 3.0);
    EXPECT_NEAR(r.estimate[0], 0.6, 4 * se);
    EXPECT_NEAR(r.estimate[1], -0.4, 4 * se);
    EXPECT_NEAR(r.std_errors[0], se, 0.2 * se);
    EXPECT_NEAR(r.std_errors[1], se, 0.2 * se);
    EXPECT_EQ(r.sh_df, 1);
    ASSERT_TRUE(r.sh_pvalue.has_value());
    EXPECT_EQ(r.std_scores.size(), 3);
    EXPECT_EQ(r.n_simulations, sim.calls());
    ASSERT_FALSE(r.trace.empty());
    EXPECT_EQ(r.trace.back().phase, Phase::local);
    EXPECT_EQ(r.trace.back().fit_size, 400u);
    for (const auto& t : r.trace)
        if (t.phase == Phase::local) {
            EXPECT_LE(*t.rho, cfg.rho_max + 1e-15);
        }
}

TEST(LocalSearch, IterationCapCarriesPartialResult) {
    const auto sim = linear_model();
    Config cfg;
    cfg.n_init = 300;
    cfg.n_elite = 40;
    cfg.nadd_global = 50;
    cfg.nfit_local = 400;
    cfg.max_local_iters = 3;
    try {
        run_local(global::run_global(sim, Vector::Zero(3), cfg), sim, cfg);
        FAIL();
    } catch (const LocalNotConverged& e) {
        EXPECT_FALSE(e.partial().converged);
        EXPECT_EQ(e.partial().estimate.size(), 2);
    }
}
