#pragma once

#include "ifit/core/errors.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <sstream>

namespace ifit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) { return m.allFinite(); }

/// Box-shaped parameter space, lower[i] <= theta[i] <= upper[i].
class Bounds {
public:
    Bounds() = default;

    Bounds(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
        if (lower_.size() != upper_.size() || lower_.size() == 0)
            throw ConfigError("bounds: lower and upper must be non-empty and of equal length");
        for (Eigen::Index i = 0; i < lower_.size(); ++i) {
            if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) || !(lower_[i] < upper_[i])) {
                std::ostringstream os;
                os << "bounds: coordinate " << i << " needs finite lower < upper, got [" << lower_[i]
                   << ", " << upper_[i] << "]";
                throw ConfigError(os.str());
            }
        }
    }

    std::size_t dim() const noexcept { return static_cast<std::size_t>(lower_.size()); }
    const Vector& lower() const noexcept { return lower_; }
    const Vector& upper() const noexcept { return upper_; }
    double lower(std::size_t i) const { return lower_[static_cast<Eigen::Index>(i)]; }
    double upper(std::size_t i) const { return upper_[static_cast<Eigen::Index>(i)]; }
    Vector width() const { return upper_ - lower_; }

    bool contains(const Eigen::Ref<const Vector>& x) const {
        return x.size() == lower_.size() && (x.array() >= lower_.array()).all() &&
               (x.array() <= upper_.array()).all();
    }

    Vector clamp(const Eigen::Ref<const Vector>& x) const {
        return x.cwiseMax(lower_).cwiseMin(upper_);
    }

private:
    Vector lower_;
    Vector upper_;
};

}  // namespace ifit
