#pragma once

#include "ifit/core/simulator.hpp"
#include "ifit/core/types.hpp"
#include "ifit/sampling/rng.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstddef>

namespace ifit::models {

/// Logistic regression with intercept, trend x_i = (2i - n)/(n - 1) and a
/// bivariate normal pair (z_i, w_i), var 1 and 2, cov 1. The design is drawn
/// once and then frozen; the summary is X^T y.
class LogitSimulator final : public Simulator {
public:
    static constexpr std::size_t kDefaultN = 100;

    explicit LogitSimulator(Matrix design)
        : design_(std::move(design)), bounds_(Vector::Constant(4, -5.0), Vector::Constant(4, 5.0)) {
        if (design_.cols() != 4 || design_.rows() < 1) throw ConfigError("logit: design must be n x 4");
    }

    /// [1, x, z, w] with the covariates drawn from `rng`.
    static Matrix make_design(RngStream& rng, std::size_t n = kDefaultN) {
        Matrix x(static_cast<Eigen::Index>(n), 4);
        for (std::size_t i = 1; i <= n; ++i) {
            const auto r = static_cast<Eigen::Index>(i - 1);
            const double e1 = rng.normal();
            const double e2 = rng.normal();
            x(r, 0) = 1.0;
            x(r, 1) = (2.0 * static_cast<double>(i) - static_cast<double>(n)) / (static_cast<double>(n) - 1.0);
            x(r, 2) = e1;
            x(r, 3) = e1 + e2;
        }
        return x;
    }

    static Vector theta_true() { return (Vector(4) << -1.0, 1.0, 0.5, -0.5).finished(); }

    const Bounds& bounds() const override { return bounds_; }
    std::size_t dim_stat() const override { return 4; }
    const Matrix& design() const noexcept { return design_; }

    Vector draw_response(const Vector& theta, RngStream& rng) const {
        const Vector eta = design_ * theta;
        Vector y(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            const double prob = 1.0 / (1.0 + std::exp(-eta[i]));
            y[i] = rng.uniform() < prob ? 1.0 : 0.0;
        }
        return y;
    }

    Vector summarize(const Vector& y) const { return design_.transpose() * y; }

    Vector simulate(const Vector& theta, RngStream rng) const override { return summarize(draw_response(theta, rng)); }

private:
    Matrix design_;
    Bounds bounds_;
};

/// Newton-Raphson maximum likelihood for logistic regression. Throws when the
/// iteration fails to settle (e.g. separable data).
inline Vector logit_mle(const Matrix& x, const Vector& y, int max_iter = 100, double tol = 1e-10) {
    Vector beta = Vector::Zero(x.cols());
    for (int it = 0; it < max_iter; ++it) {
        const Vector eta = x * beta;
        const Vector mu = (1.0 + (-eta.array()).exp()).inverse().matrix();
        const Vector w = (mu.array() * (1.0 - mu.array())).matrix();
        const Vector score = x.transpose() * (y - mu);
        const Matrix info = x.transpose() * w.asDiagonal() * x;
        const Vector step = info.ldlt().solve(score);
        if (!step.allFinite()) break;
        beta += step;
        if (step.cwiseAbs().maxCoeff() < tol) return beta;
    }
    throw NumericalError("logit_mle: Newton-Raphson did not converge");
}

}  // namespace ifit::models
