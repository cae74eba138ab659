#pragma once

#include "ifit/core/types.hpp"
#include "ifit/mathkit/linalg.hpp"
#include "ifit/mathkit/special.hpp"
#include "ifit/mathkit/stats.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace ifit::mathkit {

/// MAD consistency constant for the normal distribution.
inline constexpr double kMadScale = 1.4826;

/// Smallest eigenvalue allowed in the rank correlation matrix.
inline constexpr double kMinCorrEigen = 1e-8;

struct RobustScatter {
    Matrix sigma;     // S R S
    Vector mads;      // diagonal of S
    Matrix rank_corr; // R
};

/// Scaled median absolute deviation of each column.
inline Vector column_mads(const Eigen::Ref<const Matrix>& x) {
    Vector out(x.cols());
    std::vector<double> col(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) col[static_cast<std::size_t>(i)] = x(i, j);
        const double med = median(col);
        for (auto& v : col) v = std::abs(v - med);
        out[j] = kMadScale * median(col);
    }
    return out;
}

/// Pearson correlation of the Gaussian scores Phi^{-1}(rank / (N+1)) of each
/// column, with eigenvalues clipped at kMinCorrEigen and the result rescaled
/// back to a unit diagonal.
inline Matrix gaussian_rank_correlation(const Eigen::Ref<const Matrix>& x) {
    const Eigen::Index n = x.rows();
    const Eigen::Index q = x.cols();
    Matrix scores(n, q);
    std::vector<double> col(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < q; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = x(i, j);
        const auto ranks = mid_ranks(col);
        for (Eigen::Index i = 0; i < n; ++i)
            scores(i, j) = normal_quantile(ranks[static_cast<std::size_t>(i)] / static_cast<double>(n + 1));
    }
    scores.rowwise() -= scores.colwise().mean();
    Matrix cross = Matrix::Zero(q, q);
    cross.selfadjointView<Eigen::Lower>().rankUpdate(scores.transpose());
    cross = cross.selfadjointView<Eigen::Lower>();
    const Vector inv_sd = cross.diagonal().array().rsqrt();
    Matrix corr = inv_sd.asDiagonal() * cross * inv_sd.asDiagonal();

    Eigen::SelfAdjointEigenSolver<Matrix> eig(corr);
    if (eig.info() != Eigen::Success) throw NumericalError("rank correlation: eigen decomposition failed");
    if (eig.eigenvalues().minCoeff() < kMinCorrEigen) {
        const Vector clipped = eig.eigenvalues().cwiseMax(kMinCorrEigen);
        corr = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
        const Vector d = corr.diagonal().array().rsqrt();
        corr = d.asDiagonal() * corr * d.asDiagonal();
    }
    corr = symmetrize(corr).cwiseMax(-1.0).cwiseMin(1.0);
    corr.diagonal().setOnes();
    return corr;
}

/// Robust scatter Sigma = S R S of residual rows (N x q), S the scaled MADs and
/// R the Gaussian-rank correlation.
inline RobustScatter robust_scatter(const Eigen::Ref<const Matrix>& residuals) {
    if (residuals.rows() < 3) throw DataError("robust_scatter: need at least 3 residual vectors");
    RobustScatter out;
    out.mads = column_mads(residuals);
    for (Eigen::Index j = 0; j < out.mads.size(); ++j) {
        if (!(out.mads[j] > 0.0)) {
            std::ostringstream os;
            os << "robust_scatter: summary statistic " << j
               << " has zero median absolute deviation (constant or near-constant statistic)";
            throw DataError(os.str());
        }
    }
    out.rank_corr = gaussian_rank_correlation(residuals);
    out.sigma = out.mads.asDiagonal() * out.rank_corr * out.mads.asDiagonal();
    return out;
}

}  // namespace ifit::mathkit
