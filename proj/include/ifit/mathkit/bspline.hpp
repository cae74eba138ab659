#pragma once

#include "ifit/core/types.hpp"
#include "ifit/mathkit/linalg.hpp"

#include <span>
#include <vector>

namespace ifit::mathkit {

/// Clamped B-spline basis on [lo, hi] with the given interior knots.
class BSplineBasis {
public:
    BSplineBasis(int degree, std::vector<double> interior_knots, double lo = 0.0, double hi = 1.0)
        : degree_(degree), lo_(lo), hi_(hi) {
        if (degree < 0 || !(lo < hi)) throw NumericalError("bspline: invalid degree or domain");
        knots_.assign(static_cast<std::size_t>(degree + 1), lo);
        for (double k : interior_knots) {
            if (!(k > lo && k < hi)) throw NumericalError("bspline: interior knot outside domain");
            knots_.push_back(k);
        }
        knots_.insert(knots_.end(), static_cast<std::size_t>(degree + 1), hi);
    }

    std::size_t size() const noexcept { return knots_.size() - static_cast<std::size_t>(degree_) - 1; }
    const std::vector<double>& knots() const noexcept { return knots_; }

    /// All basis functions at x (Cox-de Boor). The right end of the domain
    /// belongs to the last non-empty span.
    Vector evaluate(double x) const {
        const std::size_t nb = size();
        const std::size_t nk = knots_.size();
        Vector b = Vector::Zero(static_cast<Eigen::Index>(nk - 1));
        if (x >= hi_) {
            b[static_cast<Eigen::Index>(nb - 1)] = 1.0;
            return b.head(static_cast<Eigen::Index>(nb));
        }
        for (std::size_t i = 0; i + 1 < nk; ++i)
            if (knots_[i] <= x && x < knots_[i + 1]) b[static_cast<Eigen::Index>(i)] = 1.0;
        for (int k = 1; k <= degree_; ++k) {
            for (std::size_t i = 0; i + static_cast<std::size_t>(k) + 1 < nk; ++i) {
                double v = 0.0;
                const double d1 = knots_[i + static_cast<std::size_t>(k)] - knots_[i];
                const double d2 = knots_[i + static_cast<std::size_t>(k) + 1] - knots_[i + 1];
                if (d1 > 0.0) v += (x - knots_[i]) / d1 * b[static_cast<Eigen::Index>(i)];
                if (d2 > 0.0) v += (knots_[i + static_cast<std::size_t>(k) + 1] - x) / d2 * b[static_cast<Eigen::Index>(i + 1)];
                b[static_cast<Eigen::Index>(i)] = v;
            }
        }
        return b.head(static_cast<Eigen::Index>(nb));
    }

    Matrix design(std::span<const double> xs) const {
        Matrix out(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(size()));
        for (std::size_t r = 0; r < xs.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = evaluate(xs[r]).transpose();
        return out;
    }

private:
    int degree_;
    double lo_;
    double hi_;
    std::vector<double> knots_;
};

/// Least-squares spline fitter for a fixed set of observation times; the
/// normal-equation factor is computed once and reused across fits.
class BSplineFitter {
public:
    BSplineFitter(std::span<const double> times, int degree = 2, std::vector<double> interior_knots = {0.2},
                  double lo = 0.0, double hi = 1.0)
        : basis_(degree, std::move(interior_knots), lo, hi), design_(basis_.design(times)) {
        if (times.size() < basis_.size())
            throw NumericalError("bspline: fewer observation times than basis functions");
        factor_ = SpdFactor(design_.transpose() * design_);
    }

    Vector fit(const Eigen::Ref<const Vector>& values) const {
        if (values.size() != design_.rows()) throw NumericalError("bspline: values/times length mismatch");
        return factor_.solve(design_.transpose() * values);
    }

    const Matrix& design() const noexcept { return design_; }
    const BSplineBasis& basis() const noexcept { return basis_; }

private:
    BSplineBasis basis_;
    Matrix design_;
    SpdFactor factor_;
};

/// Coefficients of the least-squares quadratic B-spline (one knot at 0.2 by
/// default) through (times, values).
inline Vector bspline_ls(std::span<const double> times, const Eigen::Ref<const Vector>& values, int degree = 2,
                         std::vector<double> interior_knots = {0.2}, double lo = 0.0, double hi = 1.0) {
    return BSplineFitter(times, degree, std::move(interior_knots), lo, hi).fit(values);
}

}  // namespace ifit::mathkit
