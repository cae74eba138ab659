#pragma once

#include "ifit/core/simulator.hpp"
#include "ifit/core/types.hpp"
#include "ifit/mathkit/bspline.hpp"
#include "ifit/sampling/rng.hpp"

#include <array>
#include <cstddef>
#include <limits>
#include <vector>

namespace ifit::models {

using EnzymeState = std::array<long, 4>;  // E, S, C, P

/// Exact stochastic simulation of E + S -> C, C -> E + S, C -> P + E with
/// propensities r1 E S, r2 C, r3 C. Returns the 4 x grid.size() state
/// recorded at each (increasing) grid time.
inline Eigen::Matrix<long, 4, Eigen::Dynamic> gillespie_ssa(const Eigen::Ref<const Vector>& rates, EnzymeState state,
                                                           const std::vector<double>& grid, RngStream& rng) {
    if (rates.size() != 3 || (rates.array() < 0.0).any()) throw ModelError("gillespie: rates must be 3 nonnegative values", rates);
    Eigen::Matrix<long, 4, Eigen::Dynamic> out(4, static_cast<Eigen::Index>(grid.size()));
    double t = 0.0;
    std::size_t next = 0;
    auto record_until = [&](double horizon) {
        while (next < grid.size() && grid[next] < horizon) {
            for (int s = 0; s < 4; ++s) out(s, static_cast<Eigen::Index>(next)) = state[static_cast<std::size_t>(s)];
            ++next;
        }
    };
    while (next < grid.size()) {
        auto& [e, s, c, p] = state;
        const double a1 = rates[0] * static_cast<double>(e) * static_cast<double>(s);
        const double a2 = rates[1] * static_cast<double>(c);
        const double a3 = rates[2] * static_cast<double>(c);
        const double a0 = a1 + a2 + a3;
        if (!(a0 > 0.0)) {
            record_until(std::numeric_limits<double>::infinity());
            break;
        }
        t += rng.exponential() / a0;
        record_until(t);
        const double u = rng.uniform() * a0;
        if (u < a1) {
            --e, --s, ++c;
        } else if (u < a1 + a2) {
            ++e, ++s, --c;
        } else {
            ++e, --c, ++p;
        }
    }
    return out;
}

/// Stochastic Michaelis-Menten kinetics observed at t_j = j/50; the summary is
/// the quadratic B-spline (knot 0.2) coefficients of the C and P paths.
class EnzymeSimulator final : public Simulator {
public:
    static constexpr EnzymeState kInitial{100, 100, 0, 0};
    static constexpr std::size_t kGridSize = 50;

    EnzymeSimulator()
        : bounds_(Vector::Zero(3), Vector::Constant(3, 50.0)), grid_(make_grid()), fitter_(grid_) {}

    static std::vector<double> make_grid() {
        std::vector<double> g(kGridSize);
        for (std::size_t j = 0; j < kGridSize; ++j) g[j] = static_cast<double>(j + 1) / static_cast<double>(kGridSize);
        return g;
    }

    static Vector theta_true() { return (Vector(3) << 0.5, 2.5, 1.0).finished(); }

    const Bounds& bounds() const override { return bounds_; }
    std::size_t dim_stat() const override { return 2 * fitter_.basis().size(); }
    const std::vector<double>& grid() const noexcept { return grid_; }

    Vector summarize(const Eigen::Matrix<long, 4, Eigen::Dynamic>& path) const {
        const std::size_t nb = fitter_.basis().size();
        Vector out(static_cast<Eigen::Index>(2 * nb));
        out.head(static_cast<Eigen::Index>(nb)) = fitter_.fit(path.row(2).cast<double>().transpose());
        out.tail(static_cast<Eigen::Index>(nb)) = fitter_.fit(path.row(3).cast<double>().transpose());
        return out;
    }

    Vector simulate(const Vector& theta, RngStream rng) const override {
        return summarize(gillespie_ssa(theta, kInitial, grid_, rng));
    }

private:
    Bounds bounds_;
    std::vector<double> grid_;
    mathkit::BSplineFitter fitter_;
};

}  // namespace ifit::models
