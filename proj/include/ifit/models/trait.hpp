#pragma once

#include "ifit/core/simulator.hpp"
#include "ifit/core/types.hpp"
#include "ifit/mathkit/special.hpp"
#include "ifit/mathkit/stats.hpp"
#include "ifit/models/quantile_levels.hpp"
#include "ifit/sampling/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace ifit::models {

namespace detail {

/// Fenwick tree over nonnegative weights supporting point updates and
/// sampling proportional to weight.
class WeightTree {
public:
    explicit WeightTree(std::size_t n) : tree_(n + 1, 0.0), step_(1) {
        while (step_ * 2 <= n) step_ *= 2;
    }

    void add(std::size_t i, double w) {
        for (std::size_t k = i + 1; k < tree_.size(); k += k & (~k + 1)) tree_[k] += w;
    }

    double total() const {
        double s = 0.0;
        for (std::size_t k = tree_.size() - 1; k > 0; k -= k & (~k + 1)) s += tree_[k];
        return s;
    }

    /// Smallest index whose prefix sum exceeds `target`.
    std::size_t find(double target) const {
        std::size_t pos = 0;
        for (std::size_t s = step_; s > 0; s /= 2) {
            if (pos + s < tree_.size() && tree_[pos + s] <= target) {
                pos += s;
                target -= tree_[pos];
            }
        }
        return std::min(pos, tree_.size() - 2);
    }

private:
    std::vector<double> tree_;
    std::size_t step_;
};

}  // namespace detail

/// Neutral-with-selection community model on the trait grid {0, 0.001, ..., 1}
/// with competitive ability F(u) = 1 - omega + omega * phi(u; mu, sigma).
/// Parameters (gamma, mu, sigma, omega); the summary is species richness,
/// Gini index of abundances and 21 quantiles of individual traits.
class TraitSimulator final : public Simulator {
public:
    static constexpr std::size_t kGridPoints = 1001;
    static constexpr std::size_t kPopulation = 500;
    static constexpr std::size_t kSteps = 5000;

    TraitSimulator() : bounds_(Vector::Zero(4), Vector::Ones(4)) {}

    static Vector theta_true() { return (Vector(4) << 0.2, 0.7, 0.1, 0.7).finished(); }
    static double grid_value(std::size_t k) { return static_cast<double>(k) / 1000.0; }

    const Bounds& bounds() const override { return bounds_; }
    std::size_t dim_stat() const override { return 2 + summary_quantile_levels().size(); }

    /// F on the grid. Rejects parameters for which F is not a valid weight.
    static std::vector<double> fitness(const Vector& theta) {
        const double mu = theta[1];
        const double sigma = theta[2];
        const double omega = theta[3];
        if (omega > 0.0 && !(sigma > 0.0)) throw ModelError("trait: sigma must be positive when omega > 0", theta);
        std::vector<double> f(kGridPoints);
        double total = 0.0;
        for (std::size_t k = 0; k < kGridPoints; ++k) {
            const double phi = omega > 0.0 ? mathkit::normal_pdf(grid_value(k), mu, sigma) : 0.0;
            f[k] = 1.0 - omega + omega * phi;
            total += f[k];
        }
        if (!(total > 0.0) || !std::isfinite(total)) throw ModelError("trait: fitness vanishes on the whole grid", theta);
        return f;
    }

    /// Final abundance of each grid trait.
    std::vector<long> simulate_abundance(const Vector& theta, RngStream& rng) const {
        const double gamma = theta[0];
        const std::vector<double> f = fitness(theta);
        std::vector<double> cdf(kGridPoints);
        std::partial_sum(f.begin(), f.end(), cdf.begin());
        auto draw_immigrant = [&] {
            const double u = rng.uniform() * cdf.back();
            const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
            auto k = static_cast<std::size_t>(it - cdf.begin());
            k = std::min(k, kGridPoints - 1);
            while (f[k] <= 0.0) k = (k + 1) % kGridPoints;
            return k;
        };

        std::vector<long> abundance(kGridPoints, 0);
        std::vector<std::size_t> member(kPopulation);
        detail::WeightTree tree(kGridPoints);
        for (auto& m : member) {
            m = draw_immigrant();
            ++abundance[m];
            tree.add(m, f[m]);
        }
        for (std::size_t step = 0; step < kSteps; ++step) {
            const auto slot = static_cast<std::size_t>(rng.uniform_index(kPopulation));
            const std::size_t dead = member[slot];
            --abundance[dead];
            tree.add(dead, -f[dead]);
            std::size_t born;
            if (rng.uniform() < gamma) {
                born = draw_immigrant();
            } else {
                do {
                    born = tree.find(rng.uniform() * tree.total());
                } while (abundance[born] == 0 || f[born] <= 0.0);
            }
            member[slot] = born;
            ++abundance[born];
            tree.add(born, f[born]);
        }
        return abundance;
    }

    static Vector summarize(const std::vector<long>& abundance) {
        std::vector<double> present;
        std::vector<double> traits;
        for (std::size_t k = 0; k < abundance.size(); ++k) {
            if (abundance[k] <= 0) continue;
            present.push_back(static_cast<double>(abundance[k]));
            traits.insert(traits.end(), static_cast<std::size_t>(abundance[k]), grid_value(k));
        }
        if (traits.empty()) throw DataError("trait summary: empty population");
        const auto& levels = summary_quantile_levels();
        Vector out(static_cast<Eigen::Index>(2 + levels.size()));
        out[0] = static_cast<double>(present.size());
        out[1] = mathkit::gini(present);
        for (std::size_t j = 0; j < levels.size(); ++j)
            out[static_cast<Eigen::Index>(2 + j)] = mathkit::quantile_sorted(traits, levels[j]);
        return out;
    }

    Vector simulate(const Vector& theta, RngStream rng) const override {
        return summarize(simulate_abundance(theta, rng));
    }

private:
    Bounds bounds_;
};

}  // namespace ifit::models
