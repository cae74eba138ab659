#pragma once

#include "ifit/core/simulator.hpp"
#include "ifit/core/types.hpp"
#include "ifit/mathkit/stats.hpp"
#include "ifit/models/quantile_levels.hpp"
#include "ifit/sampling/rng.hpp"
#include "ifit/sampling/samplers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ifit::models {

using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;  // true = observed

inline constexpr std::array<int, 4> kToadLags{1, 2, 4, 8};
inline constexpr double kReturnThreshold = 10.0;
inline constexpr double kMaxStep = 1e12;

/// Toad x day refuge positions with an observation mask.
struct ToadData {
    Matrix positions;
    Mask observed;
};

/// Block of 22 statistics for one lag from the pooled displacements. When
/// `lenient`, a lag without non-returns yields median log(threshold) and zero
/// quantile gaps instead of an error.
inline void toad_lag_block(std::vector<double>& non_returns, std::size_t n_pairs, int lag, bool lenient,
                           Eigen::Ref<Vector> out) {
    if (n_pairs == 0) {
        std::ostringstream os;
        os << "toad summary: no observed displacement pairs at lag " << lag;
        throw DataError(os.str());
    }
    const auto& levels = summary_quantile_levels();
    out[0] = 1.0 - static_cast<double>(non_returns.size()) / static_cast<double>(n_pairs);
    if (non_returns.empty()) {
        if (!lenient) {
            std::ostringstream os;
            os << "toad summary: no non-return distances at lag " << lag;
            throw DataError(os.str());
        }
        out[1] = std::log(kReturnThreshold);
        out.tail(static_cast<Eigen::Index>(levels.size() - 1)).setZero();
        return;
    }
    for (double& d : non_returns) d = std::log(d);
    std::sort(non_returns.begin(), non_returns.end());
    out[1] = mathkit::quantile_sorted(non_returns, 0.5);
    double prev = mathkit::quantile_sorted(non_returns, levels[0]);
    for (std::size_t j = 1; j < levels.size(); ++j) {
        const double cur = mathkit::quantile_sorted(non_returns, levels[j]);
        out[static_cast<Eigen::Index>(1 + j)] = cur - prev;
        prev = cur;
    }
}

/// 88 statistics: for lags 1, 2, 4, 8 the return frequency (displacement
/// below 10 m), the median log non-return distance, and the 20 gaps between
/// consecutive quantiles of the log non-return distances.
inline Vector toad_summary(const Eigen::Ref<const Matrix>& positions, const Mask* observed = nullptr,
                           bool lenient = false) {
    if (observed && (observed->rows() != positions.rows() || observed->cols() != positions.cols()))
        throw DataError("toad summary: mask shape does not match positions");
    constexpr Eigen::Index block = 22;
    Vector out(block * static_cast<Eigen::Index>(kToadLags.size()));
    std::vector<double> non_returns;
    for (std::size_t li = 0; li < kToadLags.size(); ++li) {
        const int lag = kToadLags[li];
        non_returns.clear();
        std::size_t n_pairs = 0;
        for (Eigen::Index i = 0; i < positions.rows(); ++i) {
            for (Eigen::Index t = 0; t + lag < positions.cols(); ++t) {
                if (observed && !((*observed)(i, t) && (*observed)(i, t + lag))) continue;
                const double d = std::abs(positions(i, t + lag) - positions(i, t));
                ++n_pairs;
                if (!(d < kReturnThreshold)) non_returns.push_back(d);
            }
        }
        toad_lag_block(non_returns, n_pairs, lag, lenient, out.segment(static_cast<Eigen::Index>(li) * block, block));
    }
    return out;
}

/// Toad movement model: each night a toad moves an alpha-stable distance from
/// its refuge, then returns to a uniformly chosen earlier refuge with
/// probability pi, otherwise takes the new spot as its refuge.
class ToadSimulator final : public Simulator {
public:
    static constexpr Eigen::Index kToads = 66;
    static constexpr Eigen::Index kDays = 63;

    explicit ToadSimulator(std::optional<Mask> mask = std::nullopt, Eigen::Index n_toads = kToads,
                           Eigen::Index n_days = kDays)
        : bounds_((Vector(3) << 0.01, 0.0, 0.0).finished(), (Vector(3) << 2.0, 100.0, 1.0).finished()),
          mask_(std::move(mask)), n_toads_(mask_ ? mask_->rows() : n_toads), n_days_(mask_ ? mask_->cols() : n_days) {
        if (n_toads_ < 1 || n_days_ < 2) throw ConfigError("toad: need at least one toad and two days");
    }

    static Vector theta_true() { return (Vector(3) << 1.7, 35.0, 0.6).finished(); }

    const Bounds& bounds() const override { return bounds_; }
    std::size_t dim_stat() const override { return 22 * kToadLags.size(); }
    const std::optional<Mask>& mask() const noexcept { return mask_; }

    /// Daily refuge positions, every toad starting at 0.
    Matrix simulate_positions(const Vector& theta, RngStream& rng) const {
        const double alpha = theta[0];
        const double gamma = theta[1];
        const double pi = theta[2];
        Matrix pos(n_toads_, n_days_);
        std::vector<double> history;
        history.reserve(static_cast<std::size_t>(n_days_));
        for (Eigen::Index i = 0; i < n_toads_; ++i) {
            history.assign(1, 0.0);
            double refuge = 0.0;
            pos(i, 0) = refuge;
            for (Eigen::Index t = 1; t < n_days_; ++t) {
                const double step = std::clamp(sampling::alpha_stable(alpha, gamma, rng), -kMaxStep, kMaxStep);
                const double moved = refuge + step;
                if (rng.uniform() < pi)
                    refuge = history[static_cast<std::size_t>(rng.uniform_index(history.size()))];
                else
                    refuge = moved;
                history.push_back(refuge);
                pos(i, t) = refuge;
            }
        }
        return pos;
    }

    Vector simulate(const Vector& theta, RngStream rng) const override {
        const Matrix pos = simulate_positions(theta, rng);
        try {
            return toad_summary(pos, mask_ ? &*mask_ : nullptr, true);
        } catch (const DataError& e) {
            throw ModelError(e.what(), theta);
        }
    }

private:
    Bounds bounds_;
    std::optional<Mask> mask_;
    Eigen::Index n_toads_;
    Eigen::Index n_days_;
};

namespace detail {

inline std::string trim_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

inline double parse_number(const std::string& field, std::size_t line_no, const char* what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != field.size() || !std::isfinite(v)) {
        std::ostringstream os;
        os << "toad csv line " << line_no << ": non-numeric " << what << " '" << field << "'";
        throw DataError(os.str());
    }
    return v;
}

}  // namespace detail

/// Reads `toad_id,day,position` (1-based ids and days, empty position =
/// missing). The grid is at least 66 x 63 and grows to the largest id/day.
inline ToadData load_toad_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("toad csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || detail::trim_cr(line) != "toad_id,day,position")
        throw DataError("toad csv: expected header 'toad_id,day,position'");
    struct Row {
        long toad;
        long day;
        std::optional<double> pos;
    };
    std::vector<Row> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::trim_cr(line);
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        if (fields.size() != 3) {
            std::ostringstream os;
            os << "toad csv line " << line_no << ": expected 3 fields";
            throw DataError(os.str());
        }
        const double id = detail::parse_number(fields[0], line_no, "toad_id");
        const double day = detail::parse_number(fields[1], line_no, "day");
        if (id < 1 || day < 1 || id != std::floor(id) || day != std::floor(day)) {
            std::ostringstream os;
            os << "toad csv line " << line_no << ": toad_id and day must be positive integers";
            throw DataError(os.str());
        }
        Row r{static_cast<long>(id), static_cast<long>(day), std::nullopt};
        if (!fields[2].empty()) r.pos = detail::parse_number(fields[2], line_no, "position");
        rows.push_back(r);
    }
    long n_toads = ToadSimulator::kToads;
    long n_days = ToadSimulator::kDays;
    for (const auto& r : rows) {
        n_toads = std::max(n_toads, r.toad);
        n_days = std::max(n_days, r.day);
    }
    ToadData data{Matrix::Zero(n_toads, n_days), Mask::Constant(n_toads, n_days, false)};
    Mask seen = Mask::Constant(n_toads, n_days, false);
    for (const auto& r : rows) {
        const Eigen::Index i = r.toad - 1;
        const Eigen::Index t = r.day - 1;
        if (seen(i, t)) {
            std::ostringstream os;
            os << "toad csv: duplicate entry for toad " << r.toad << " day " << r.day;
            throw DataError(os.str());
        }
        seen(i, t) = true;
        if (r.pos) {
            data.positions(i, t) = *r.pos;
            data.observed(i, t) = true;
        }
    }
    return data;
}

/// Writes every cell of the grid, leaving the position empty where missing.
inline void write_toad_csv(const ToadData& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("toad csv: cannot write " + path);
    out.precision(17);
    out << "toad_id,day,position\n";
    for (Eigen::Index i = 0; i < data.positions.rows(); ++i) {
        for (Eigen::Index t = 0; t < data.positions.cols(); ++t) {
            out << i + 1 << ',' << t + 1 << ',';
            if (data.observed(i, t)) out << data.positions(i, t);
            out << '\n';
        }
    }
    if (!out) throw DataError("toad csv: write failed for " + path);
}

}  // namespace ifit::models
