#pragma once

#include "ifit/core/types.hpp"
#include "ifit/mathkit/linalg.hpp"

#include <sstream>

namespace ifit::mathkit {

/// Least-squares fit of t_i = tau + B (theta_i - center) + e_i.
struct LocalLinearFit {
    Vector tau;     // intercept, q
    Matrix jac;     // slopes B, q x p
    Matrix err_cov; // W, residual covariance, q x q
    Matrix tau_cov; // H = c W, covariance of the intercept
    double ridge = 0.0;
};

inline LocalLinearFit mv_least_squares(const Eigen::Ref<const Matrix>& thetas, const Eigen::Ref<const Matrix>& stats,
                                       const Eigen::Ref<const Vector>& center) {
    const Eigen::Index n = thetas.rows();
    const Eigen::Index p = thetas.cols();
    const Eigen::Index q = stats.cols();
    if (stats.rows() != n || center.size() != p) throw NumericalError("mv_least_squares: dimension mismatch");
    if (n <= p + 1) {
        std::ostringstream os;
        os << "mv_least_squares: need more than p+1 = " << p + 1 << " points, got " << n;
        throw NumericalError(os.str());
    }

    Matrix design(n, p + 1);
    design.col(0).setOnes();
    design.rightCols(p) = thetas.rowwise() - center.transpose();

    Matrix gram = Matrix::Zero(p + 1, p + 1);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
    gram = gram.selfadjointView<Eigen::Lower>();
    const SpdFactor factor(gram);
    const Matrix coef = factor.solve(design.transpose() * stats);  // (p+1) x q

    const Matrix resid = stats - design * coef;
    Matrix w = Matrix::Zero(q, q);
    w.selfadjointView<Eigen::Lower>().rankUpdate(resid.transpose());
    w = w.selfadjointView<Eigen::Lower>();
    w /= static_cast<double>(n - p - 1);

    Vector e0 = Vector::Zero(p + 1);
    e0[0] = 1.0;
    const double c = factor.solve(e0)(0, 0);

    LocalLinearFit fit;
    fit.tau = coef.row(0).transpose();
    fit.jac = coef.bottomRows(p).transpose();
    fit.err_cov = std::move(w);
    fit.tau_cov = c * fit.err_cov;
    fit.ridge = factor.ridge();
    return fit;
}

}  // namespace ifit::mathkit
