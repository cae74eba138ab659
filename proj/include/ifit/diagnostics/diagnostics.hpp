#pragma once

#include "ifit/core/types.hpp"
#include "ifit/mathkit/linalg.hpp"
#include "ifit/mathkit/special.hpp"

#include <cmath>
#include <optional>
#include <sstream>

namespace ifit::diagnostics {

struct SarganHansen {
    double stat = 0.0;
    int df = 0;
    std::optional<double> pvalue;  // absent when df == 0
};

/// ||t_obs - tau||^2 in the sigma metric, referred to chi-square(q - p).
inline SarganHansen sargan_hansen(const Eigen::Ref<const Vector>& t_obs, const Eigen::Ref<const Vector>& tau,
                                  const Eigen::Ref<const Matrix>& sigma, std::size_t p) {
    const auto q = static_cast<std::size_t>(t_obs.size());
    if (tau.size() != t_obs.size() || sigma.rows() != t_obs.size() || sigma.cols() != t_obs.size())
        throw NumericalError("sargan_hansen: dimension mismatch");
    if (q < p) throw NumericalError("sargan_hansen: fewer statistics than parameters");
    SarganHansen out;
    out.stat = mathkit::mahalanobis_sq(t_obs - tau, sigma);
    out.df = static_cast<int>(q - p);
    if (out.df > 0) out.pvalue = mathkit::chisq_sf(out.stat, out.df);
    return out;
}

/// (t_obs_j - tau_j) / sqrt(sigma_jj).
inline Vector standardized_scores(const Eigen::Ref<const Vector>& t_obs, const Eigen::Ref<const Vector>& tau,
                                  const Eigen::Ref<const Matrix>& sigma) {
    if (tau.size() != t_obs.size() || sigma.rows() != t_obs.size() || sigma.cols() != t_obs.size())
        throw NumericalError("standardized_scores: dimension mismatch");
    Vector out(t_obs.size());
    for (Eigen::Index j = 0; j < t_obs.size(); ++j) {
        const double v = sigma(j, j);
        if (!(v > 0.0)) {
            std::ostringstream os;
            os << "standardized_scores: variance of statistic " << j << " is not positive";
            throw NumericalError(os.str());
        }
        out[j] = (t_obs[j] - tau[j]) / std::sqrt(v);
    }
    return out;
}

}  // namespace ifit::diagnostics
