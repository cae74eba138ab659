#pragma once

#include "ifit/core/types.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace ifit {

enum class Phase { global, local };

inline const char* to_string(Phase p) { return p == Phase::global ? "global" : "local"; }

/// One engine iteration. For global rows `fit_size` holds the elite size E_k
/// and rho / g_norm are absent.
struct TraceRecord {
    Phase phase = Phase::global;
    std::size_t iter = 0;
    std::optional<double> rho;
    std::size_t fit_size = 0;
    bool accepted = false;
    std::optional<double> g_norm;

    bool operator==(const TraceRecord&) const = default;
};

struct FitResult {
    Vector estimate;
    Matrix covariance;
    Vector std_errors;
    std::size_t n_simulations = 0;
    double sh_stat = 0.0;
    int sh_df = 0;
    std::optional<double> sh_pvalue;  // absent when the model is exactly identified
    Vector std_scores;
    std::vector<TraceRecord> trace;
    bool converged = false;
};

/// Either phase hit its iteration cap. Carries the best partial result.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, FitResult partial) : Error(what), partial_(std::move(partial)) {}
    const FitResult& partial() const noexcept { return partial_; }

private:
    FitResult partial_;
};

}  // namespace ifit
