#pragma once

#include "ifit/core/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <array>
#include <cmath>
#include <sstream>

namespace ifit::mathkit {

/// Ridge multipliers tried in order when a symmetric matrix will not factor.
inline constexpr std::array<double, 7> kRidgeLadder{1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2};

/// Reciprocal condition number (of the unit-diagonal rescaling) below which a
/// factorization is treated as failed.
inline constexpr double kMinRcond = 1e-12;

inline Matrix symmetrize(const Eigen::Ref<const Matrix>& m) { return 0.5 * (m + m.transpose()); }

/// Cholesky factor V = L L^T of a symmetric matrix, with ridge escalation.
///
/// The factorization is attempted on the Jacobi-rescaled matrix so that the
/// conditioning test is insensitive to the units of each coordinate. On failure
/// a ridge eps * (trace(V)/q) * I is added, eps walking kRidgeLadder.
class SpdFactor {
public:
    SpdFactor() = default;

    explicit SpdFactor(const Eigen::Ref<const Matrix>& v) {
        if (v.rows() != v.cols() || v.rows() == 0) throw NumericalError("spd factor: matrix must be square and non-empty");
        if (!v.allFinite()) throw NumericalError("spd factor: matrix has non-finite entries");
        const Matrix sym = symmetrize(v);
        if (try_factor(sym)) return;
        const double scale = sym.trace() / static_cast<double>(sym.rows());
        if (!(scale > 0.0) || !std::isfinite(scale))
            throw NumericalError("spd factor: matrix is not positive definite and has non-positive trace");
        for (double eps : kRidgeLadder) {
            Matrix ridged = sym;
            ridged.diagonal().array() += eps * scale;
            if (try_factor(ridged)) {
                ridge_ = eps * scale;
                return;
            }
        }
        std::ostringstream os;
        os << "spd factor: " << sym.rows() << "x" << sym.rows()
           << " matrix is not positive definite even with ridge " << kRidgeLadder.back() << " * trace/q";
        throw NumericalError(os.str());
    }

    Eigen::Index dim() const noexcept { return lower_.rows(); }

    /// Absolute ridge that was added to the diagonal (0 when none was needed).
    double ridge() const noexcept { return ridge_; }

    const Matrix& lower() const noexcept { return lower_; }

    template <typename Rhs>
    Matrix solve(const Eigen::MatrixBase<Rhs>& rhs) const {
        Matrix y = lower_.triangularView<Eigen::Lower>().solve(rhs);
        return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
    }

    /// x^T V^{-1} x.
    double mahalanobis_sq(const Eigen::Ref<const Vector>& x) const {
        return lower_.triangularView<Eigen::Lower>().solve(x).squaredNorm();
    }

    /// L^{-1} x, the whitened vector.
    Vector whiten(const Eigen::Ref<const Vector>& x) const {
        return lower_.triangularView<Eigen::Lower>().solve(x);
    }

    Matrix inverse() const { return symmetrize(solve(Matrix::Identity(dim(), dim()))); }

private:
    bool try_factor(const Matrix& m) {
        const Vector diag = m.diagonal();
        if (!(diag.array() > 0.0).all()) return false;
        const Vector inv_sd = diag.array().rsqrt();
        const Matrix scaled = inv_sd.asDiagonal() * m * inv_sd.asDiagonal();
        Eigen::LLT<Matrix> llt(scaled);
        if (llt.info() != Eigen::Success || !(llt.rcond() > kMinRcond)) return false;
        lower_ = diag.array().sqrt().matrix().asDiagonal() * Matrix(llt.matrixL());
        return lower_.allFinite();
    }

    Matrix lower_;
    double ridge_ = 0.0;
};

struct SpdSolution {
    Matrix x;
    double ridge = 0.0;
};

/// Solves V X = rhs for symmetric V through its triangular factor.
inline SpdSolution spd_solve(const Eigen::Ref<const Matrix>& v, const Eigen::Ref<const Matrix>& rhs) {
    SpdFactor f(v);
    return {f.solve(rhs), f.ridge()};
}

/// x^T V^{-1} x without forming V^{-1}.
inline double mahalanobis_sq(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Matrix>& v) {
    if (x.size() != v.rows()) throw NumericalError("mahalanobis: dimension mismatch");
    return SpdFactor(v).mahalanobis_sq(x);
}

}  // namespace ifit::mathkit
