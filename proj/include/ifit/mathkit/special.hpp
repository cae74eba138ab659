#pragma once

#include "ifit/core/errors.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>

namespace ifit::mathkit {

/// Upper tail P(X > x) of a chi-square variable with `df` degrees of freedom.
inline double chisq_sf(double x, int df) {
    if (df <= 0) throw NumericalError("chisq_sf: degrees of freedom must be positive");
    if (!(x > 0.0)) return 1.0;
    if (std::isinf(x)) return 0.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

inline double normal_cdf(double x) { return 0.5 * boost::math::erfc(-x / std::numbers::sqrt2); }

/// Phi^{-1}(p) for p in (0,1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw NumericalError("normal_quantile: probability must lie in (0,1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

inline double normal_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace ifit::mathkit
