#pragma once

#include <array>
#include <cstddef>

namespace ifit::models {

/// Quantile levels used by the trait and toad summaries:
/// 0.01, 0.05, 0.10, 0.15, ..., 0.90, 0.95, 0.99.
inline const std::array<double, 21>& summary_quantile_levels() {
    static const std::array<double, 21> levels = [] {
        std::array<double, 21> l{};
        l[0] = 0.01;
        for (int k = 1; k <= 19; ++k) l[static_cast<std::size_t>(k)] = 0.05 * k;
        l[20] = 0.99;
        return l;
    }();
    return levels;
}

}  // namespace ifit::models
