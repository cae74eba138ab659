#pragma once

#include "ifit/core/types.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <sstream>
#include <vector>

namespace ifit {

/// Append-only store of simulated pairs (theta_i, t_i) plus the observed
/// summary t_obs. Storage is row-major and contiguous per pair.
class SimArchive {
public:
    using ConstRow = Eigen::Map<const Vector>;

    SimArchive() = default;

    SimArchive(Bounds bounds, Vector observed) : bounds_(std::move(bounds)), observed_(std::move(observed)) {
        if (observed_.size() == 0 || !observed_.allFinite())
            throw DataError("archive: observed summary must be non-empty and finite");
        if (static_cast<std::size_t>(observed_.size()) < bounds_.dim())
            throw DataError("archive: need at least as many summary statistics as parameters (q >= p)");
    }

    std::size_t size() const noexcept { return p() == 0 ? 0 : thetas_.size() / p(); }
    std::size_t p() const noexcept { return bounds_.dim(); }
    std::size_t q() const noexcept { return static_cast<std::size_t>(observed_.size()); }
    const Bounds& bounds() const noexcept { return bounds_; }
    const Vector& observed() const noexcept { return observed_; }

    ConstRow theta(std::size_t i) const {
        return ConstRow(thetas_.data() + i * p(), static_cast<Eigen::Index>(p()));
    }
    ConstRow stat(std::size_t i) const {
        return ConstRow(stats_.data() + i * q(), static_cast<Eigen::Index>(q()));
    }

    void append(const Eigen::Ref<const Vector>& theta, const Eigen::Ref<const Vector>& t) {
        if (static_cast<std::size_t>(theta.size()) != p() || static_cast<std::size_t>(t.size()) != q())
            throw DataError("archive: dimension mismatch on append");
        if (!theta.allFinite() || !t.allFinite()) throw DataError("archive: non-finite pair");
        if (!bounds_.contains(theta)) throw DataError("archive: parameter outside bounds");
        thetas_.insert(thetas_.end(), theta.data(), theta.data() + theta.size());
        stats_.insert(stats_.end(), t.data(), t.data() + t.size());
    }

    void reserve(std::size_t n) {
        thetas_.reserve(n * p());
        stats_.reserve(n * q());
    }

    /// Gather selected rows into (rows x p) and (rows x q) matrices.
    Matrix thetas(const std::vector<std::size_t>& rows) const {
        Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p()));
        for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = theta(rows[r]).transpose();
        return out;
    }
    Matrix stats(const std::vector<std::size_t>& rows) const {
        Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(q()));
        for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = stat(rows[r]).transpose();
        return out;
    }

private:
    Bounds bounds_;
    Vector observed_;
    std::vector<double> thetas_;
    std::vector<double> stats_;
};

}  // namespace ifit
