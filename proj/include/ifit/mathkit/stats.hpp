#pragma once

#include "ifit/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace ifit::mathkit {

/// Type-7 quantile of an already sorted sample: linear interpolation between
/// order statistics at 1-based position h = (n-1)p + 1.
inline double quantile_sorted(std::span<const double> sorted, double prob) {
    const double h = static_cast<double>(sorted.size() - 1) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

inline std::vector<double> quantile(std::span<const double> sample, std::span<const double> probs) {
    if (sample.empty()) throw DataError("quantile: empty sample");
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> out;
    out.reserve(probs.size());
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw DataError("quantile: probability outside [0,1]");
        out.push_back(quantile_sorted(sorted, p));
    }
    return out;
}

inline double median(std::span<const double> sample) {
    const double half = 0.5;
    return quantile(sample, std::span<const double>(&half, 1)).front();
}

/// Mean absolute difference over all ordered pairs divided by twice the mean:
/// sum_i sum_j |a_i - a_j| / (2 m sum a). Evaluated in O(m log m) on the
/// sorted sample.
inline double gini(std::span<const double> abundances) {
    if (abundances.empty()) throw DataError("gini: empty input");
    std::vector<double> a(abundances.begin(), abundances.end());
    if (std::any_of(a.begin(), a.end(), [](double v) { return !(v >= 0.0); }))
        throw DataError("gini: abundances must be nonnegative");
    const double total = std::accumulate(a.begin(), a.end(), 0.0);
    if (!(total > 0.0)) throw DataError("gini: abundances sum to zero");
    std::sort(a.begin(), a.end());
    const auto m = static_cast<double>(a.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (2.0 * static_cast<double>(i + 1) - m - 1.0) * a[i];
    return acc / (m * total);
}

/// Mid-ranks (1-based, ties share the average rank).
inline std::vector<double> mid_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace ifit::mathkit
