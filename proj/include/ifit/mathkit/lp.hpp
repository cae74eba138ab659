#pragma once

#include "ifit/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace ifit::mathkit {

namespace detail {

/// Dense primal simplex for
///   min c^T x  s.t.  A x = b,  0 <= x_j <= ub_j  (ub_j may be +inf),
/// started from a caller-supplied feasible basis whose columns in A are unit
/// vectors. Nonbasic variables sit at one of their bounds. Bland's rule picks
/// both entering and leaving variables, so degenerate pivots cannot cycle.
class BoundedSimplex {
public:
    BoundedSimplex(Matrix tableau, Vector rhs, Vector cost, Vector upper, std::vector<Eigen::Index> basis)
        : t_(std::move(tableau)), beta_(std::move(rhs)), cost_(std::move(cost)), ub_(std::move(upper)),
          basis_(std::move(basis)), at_upper_(static_cast<std::size_t>(t_.cols()), false),
          is_basic_(static_cast<std::size_t>(t_.cols()), -1) {
        for (std::size_t r = 0; r < basis_.size(); ++r) is_basic_[static_cast<std::size_t>(basis_[r])] = static_cast<int>(r);
        scale_ = std::max(1.0, t_.cwiseAbs().maxCoeff());
    }

    void solve() {
        const Eigen::Index m = t_.rows();
        const Eigen::Index n = t_.cols();
        const double piv_tol = 1e-12 * scale_;
        const double cost_tol = 1e-12;
        const std::size_t max_iter = 200 * static_cast<std::size_t>(m + n);
        for (std::size_t iter = 0; iter < max_iter; ++iter) {
            Vector cb(m);
            for (Eigen::Index r = 0; r < m; ++r) cb[r] = cost_[basis_[static_cast<std::size_t>(r)]];
            const Vector reduced = cost_ - t_.transpose() * cb;

            Eigen::Index enter = -1;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (is_basic_[static_cast<std::size_t>(j)] >= 0) continue;
                const bool up = at_upper_[static_cast<std::size_t>(j)];
                if ((!up && reduced[j] < -cost_tol && ub_[j] > 0.0) || (up && reduced[j] > cost_tol)) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return;

            // Moving the entering variable by step t changes basic row r by -dir * t * T(r, enter).
            const double dir = at_upper_[static_cast<std::size_t>(enter)] ? -1.0 : 1.0;
            double best = ub_[enter];
            Eigen::Index leave_row = -1;
            bool leave_to_upper = false;
            Eigen::Index leave_var = std::numeric_limits<Eigen::Index>::max();
            for (Eigen::Index r = 0; r < m; ++r) {
                const double rate = dir * t_(r, enter);
                const Eigen::Index var = basis_[static_cast<std::size_t>(r)];
                double limit = std::numeric_limits<double>::infinity();
                bool to_upper = false;
                if (rate > piv_tol) {
                    limit = std::max(0.0, beta_[r]) / rate;
                } else if (rate < -piv_tol && std::isfinite(ub_[var])) {
                    limit = std::max(0.0, ub_[var] - beta_[r]) / -rate;
                    to_upper = true;
                } else {
                    continue;
                }
                if (limit < best || (limit == best && leave_row >= 0 && var < leave_var)) {
                    best = limit;
                    leave_row = r;
                    leave_var = var;
                    leave_to_upper = to_upper;
                }
            }
            if (!std::isfinite(best)) throw NumericalError("l1 trust step: unbounded linear program");

            beta_ -= (dir * best) * t_.col(enter);
            if (leave_row < 0) {
                at_upper_[static_cast<std::size_t>(enter)] = !at_upper_[static_cast<std::size_t>(enter)];
                continue;
            }
            const double entering_value = at_upper_[static_cast<std::size_t>(enter)] ? ub_[enter] - best : best;
            const Eigen::Index old = basis_[static_cast<std::size_t>(leave_row)];
            is_basic_[static_cast<std::size_t>(old)] = -1;
            at_upper_[static_cast<std::size_t>(old)] = leave_to_upper;

            const double pivot = t_(leave_row, enter);
            t_.row(leave_row) /= pivot;
            for (Eigen::Index r = 0; r < m; ++r) {
                if (r == leave_row) continue;
                const double f = t_(r, enter);
                if (f != 0.0) t_.row(r) -= f * t_.row(leave_row);
            }
            basis_[static_cast<std::size_t>(leave_row)] = enter;
            is_basic_[static_cast<std::size_t>(enter)] = static_cast<int>(leave_row);
            at_upper_[static_cast<std::size_t>(enter)] = false;
            beta_[leave_row] = entering_value;
        }
        throw NumericalError("l1 trust step: simplex iteration limit reached");
    }

    Vector values() const {
        Vector x(t_.cols());
        for (Eigen::Index j = 0; j < t_.cols(); ++j) {
            const int r = is_basic_[static_cast<std::size_t>(j)];
            x[j] = r >= 0 ? beta_[r] : (at_upper_[static_cast<std::size_t>(j)] ? ub_[j] : 0.0);
        }
        return x;
    }

private:
    Matrix t_;
    Vector beta_;
    Vector cost_;
    Vector ub_;
    std::vector<Eigen::Index> basis_;
    std::vector<bool> at_upper_;
    std::vector<int> is_basic_;
    double scale_ = 1.0;
};

}  // namespace detail

/// Per-coordinate step limits [lo_i, hi_i] implied by the box and the trust
/// region |delta_i| <= max(1, |theta_i|) * rho.
inline std::pair<Vector, Vector> trust_step_limits(const Eigen::Ref<const Vector>& theta, const Bounds& bounds, double rho) {
    const Vector cap = theta.cwiseAbs().cwiseMax(1.0) * rho;
    Vector lo = (bounds.lower() - theta).cwiseMax(-cap).cwiseMin(0.0);
    Vector hi = (bounds.upper() - theta).cwiseMin(cap).cwiseMax(0.0);
    return {std::move(lo), std::move(hi)};
}

/// Solves min_delta ||omega delta - g||_1 subject to the box and per-coordinate
/// trust-region caps, as a bounded-variable LP in (x = delta - lo, r+, r-).
inline Vector l1_trust_step(const Eigen::Ref<const Matrix>& omega, const Eigen::Ref<const Vector>& g,
                            const Eigen::Ref<const Vector>& theta, const Bounds& bounds, double rho) {
    const Eigen::Index p = theta.size();
    if (omega.rows() != p || omega.cols() != p || g.size() != p || bounds.dim() != static_cast<std::size_t>(p))
        throw NumericalError("l1 trust step: dimension mismatch");
    if (!(rho > 0.0)) throw NumericalError("l1 trust step: rho must be positive");

    const auto [lo, hi] = trust_step_limits(theta, bounds, rho);
    const Vector b = g - omega * lo;

    // Columns: x_0..x_{p-1}, r+_0..r+_{p-1}, r-_0..r-_{p-1}. Row i reads
    // (omega x)_i - r+_i + r-_i = b_i, sign-flipped when b_i < 0 so that the
    // residual variable carrying +1 starts basic at |b_i|.
    const Eigen::Index n = 3 * p;
    Matrix tab = Matrix::Zero(p, n);
    Vector rhs(p);
    std::vector<Eigen::Index> basis(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < p; ++i) {
        const double s = b[i] < 0.0 ? -1.0 : 1.0;
        tab.block(i, 0, 1, p) = s * omega.row(i);
        tab(i, p + i) = -s;
        tab(i, 2 * p + i) = s;
        rhs[i] = s * b[i];
        basis[static_cast<std::size_t>(i)] = s < 0.0 ? p + i : 2 * p + i;
    }
    Vector cost = Vector::Zero(n);
    cost.tail(2 * p).setOnes();
    Vector upper = Vector::Constant(n, std::numeric_limits<double>::infinity());
    upper.head(p) = hi - lo;

    detail::BoundedSimplex lp(std::move(tab), std::move(rhs), std::move(cost), std::move(upper), std::move(basis));
    lp.solve();
    const Vector x = lp.values().head(p);
    return (lo + x).cwiseMax(lo).cwiseMin(hi);
}

}  // namespace ifit::mathkit
