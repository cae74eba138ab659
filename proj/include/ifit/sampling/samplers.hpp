#pragma once

#include "ifit/core/types.hpp"
#include "ifit/mathkit/linalg.hpp"
#include "ifit/sampling/rng.hpp"

#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <vector>

namespace ifit::sampling {

inline constexpr int kMixtureRejectionCap = 1000;
inline constexpr int kEllipsoidRejectionCap = 10000;

/// Latin hypercube sample of n points in the box: in every coordinate each of
/// the n equal-width strata receives exactly one point, jittered uniformly.
inline Matrix latin_hypercube(std::size_t n, const Bounds& bounds, RngStream& rng) {
    const auto p = static_cast<Eigen::Index>(bounds.dim());
    Matrix out(static_cast<Eigen::Index>(n), p);
    std::vector<std::size_t> perm(n);
    for (Eigen::Index j = 0; j < p; ++j) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        shuffle(perm.begin(), perm.end(), rng);
        const double lo = bounds.lower()[j];
        const double width = bounds.upper()[j] - lo;
        for (std::size_t i = 0; i < n; ++i) {
            const double u = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
            out(static_cast<Eigen::Index>(i), j) = std::min(lo + u * width, bounds.upper()[j]);
        }
    }
    return out;
}

/// Lower factor of a PSD covariance; the zero matrix maps to a zero factor.
inline Matrix covariance_factor(const Eigen::Ref<const Matrix>& cov) {
    if (cov.cwiseAbs().maxCoeff() == 0.0) return Matrix::Zero(cov.rows(), cov.cols());
    return mathkit::SpdFactor(cov).lower();
}

/// n draws from an equal-weight mixture of normals N(elite_k, cov) truncated to
/// the box. Each draw is rejection-sampled up to kMixtureRejectionCap times and
/// then clamped coordinate-wise; `n_clamped` counts the fallbacks.
inline Matrix truncated_mvn_mixture(const Eigen::Ref<const Matrix>& elite, const Eigen::Ref<const Matrix>& cov,
                                    const Bounds& bounds, std::size_t n, RngStream& rng,
                                    std::size_t* n_clamped = nullptr) {
    if (elite.rows() < 1) throw NumericalError("truncated_mvn_mixture: empty elite sample");
    const Eigen::Index p = elite.cols();
    const Matrix factor = covariance_factor(cov);
    Matrix out(static_cast<Eigen::Index>(n), p);
    Vector z(p);
    Vector draw(p);
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(elite.rows())));
        bool inside = false;
        for (int attempt = 0; attempt < kMixtureRejectionCap && !inside; ++attempt) {
            for (Eigen::Index j = 0; j < p; ++j) z[j] = rng.normal();
            draw = elite.row(k).transpose() + factor * z;
            inside = bounds.contains(draw);
        }
        if (!inside) {
            draw = bounds.clamp(draw);
            if (n_clamped) ++*n_clamped;
        }
        out.row(static_cast<Eigen::Index>(i)) = draw.transpose();
    }
    return out;
}

/// n draws uniform on {x : (x - center)^T omega (x - center) <= 1} intersected
/// with the box: a uniform point z of the unit ball is mapped through L^{-T},
/// omega = L L^T. Rejection up to kEllipsoidRejectionCap, then clamping.
inline Matrix ellipsoid_box_uniform(const Eigen::Ref<const Vector>& center, const Eigen::Ref<const Matrix>& omega,
                                    const Bounds& bounds, std::size_t n, RngStream& rng,
                                    std::size_t* n_clamped = nullptr) {
    const Eigen::Index p = center.size();
    const mathkit::SpdFactor factor(omega);
    const Matrix lt = factor.lower().transpose();
    Matrix out(static_cast<Eigen::Index>(n), p);
    Vector z(p);
    Vector draw(p);
    for (std::size_t i = 0; i < n; ++i) {
        bool inside = false;
        for (int attempt = 0; attempt < kEllipsoidRejectionCap && !inside; ++attempt) {
            for (Eigen::Index j = 0; j < p; ++j) z[j] = rng.normal();
            const double radius = std::pow(rng.uniform(), 1.0 / static_cast<double>(p));
            const double norm = z.norm();
            if (norm > 0.0) z *= radius / norm;
            draw = center + lt.triangularView<Eigen::Upper>().solve(z);
            inside = bounds.contains(draw);
        }
        if (!inside) {
            draw = bounds.clamp(draw);
            if (n_clamped) ++*n_clamped;
        }
        out.row(static_cast<Eigen::Index>(i)) = draw.transpose();
    }
    return out;
}

/// Symmetric alpha-stable variate with scale gamma (Chambers-Mallows-Stuck).
/// Evaluated in log space so that overflow yields +-inf rather than NaN.
inline double alpha_stable(double alpha, double gamma_scale, RngStream& rng) {
    const double u = std::numbers::pi * (rng.uniform_open() - 0.5);
    const double e = rng.exponential();
    if (gamma_scale == 0.0) return 0.0;
    if (alpha == 1.0) return gamma_scale * std::tan(u);
    const double s = std::sin(alpha * u);
    if (s == 0.0) return 0.0;
    const double log_mag = std::log(std::abs(s)) - std::log(std::cos(u)) / alpha +
                           (1.0 - alpha) / alpha * (std::log(std::cos(u - alpha * u)) - std::log(e));
    return std::copysign(gamma_scale * std::exp(log_mag), s);
}

}  // namespace ifit::sampling
