#pragma once

#include "ifit/core/errors.hpp"
#include "ifit/core/result.hpp"
#include "ifit/harness/benchmark.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <iomanip>
#include <optional>
#include <string>
#include <vector>

namespace ifit {

namespace detail {

inline nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline nlohmann::json matrix_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(row);
    }
    return rows;
}

inline Vector vector_from(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Matrix matrix_from(const nlohmann::json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    const auto cols = rows.empty() ? std::size_t{0} : rows.front().size();
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) throw DataError("matrix JSON has ragged rows");
        for (std::size_t k = 0; k < cols; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
    return m;
}

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<T>();
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const TraceRecord& t) {
    j = nlohmann::json{{"phase", to_string(t.phase)}, {"iter", t.iter},         {"rho", detail::optional_json(t.rho)},
                       {"fit_size", t.fit_size},      {"accepted", t.accepted}, {"g_norm", detail::optional_json(t.g_norm)}};
}

inline void from_json(const nlohmann::json& j, TraceRecord& t) {
    const auto phase = j.at("phase").get<std::string>();
    if (phase != "global" && phase != "local") throw DataError("trace phase must be 'global' or 'local'");
    t.phase = phase == "global" ? Phase::global : Phase::local;
    t.iter = j.at("iter").get<std::size_t>();
    t.rho = detail::optional_from<double>(j.at("rho"));
    t.fit_size = j.at("fit_size").get<std::size_t>();
    t.accepted = j.at("accepted").get<bool>();
    t.g_norm = detail::optional_from<double>(j.at("g_norm"));
}

inline void to_json(nlohmann::json& j, const FitResult& r) {
    j = nlohmann::json{{"estimate", detail::vector_json(r.estimate)},
                       {"covariance", detail::matrix_json(r.covariance)},
                       {"std_errors", detail::vector_json(r.std_errors)},
                       {"n_simulations", r.n_simulations},
                       {"sh_stat", r.sh_stat},
                       {"sh_df", r.sh_df},
                       {"sh_pvalue", detail::optional_json(r.sh_pvalue)},
                       {"std_scores", detail::vector_json(r.std_scores)},
                       {"trace", r.trace},
                       {"converged", r.converged}};
}

inline void from_json(const nlohmann::json& j, FitResult& r) {
    r.estimate = detail::vector_from(j.at("estimate"));
    r.covariance = detail::matrix_from(j.at("covariance"));
    r.std_errors = detail::vector_from(j.at("std_errors"));
    r.n_simulations = j.at("n_simulations").get<std::size_t>();
    r.sh_stat = j.at("sh_stat").get<double>();
    r.sh_df = j.at("sh_df").get<int>();
    r.sh_pvalue = detail::optional_from<double>(j.at("sh_pvalue"));
    r.std_scores = detail::vector_from(j.at("std_scores"));
    r.trace = j.at("trace").get<std::vector<TraceRecord>>();
    r.converged = j.value("converged", true);
}

namespace harness {

inline void to_json(nlohmann::json& j, const ReplicationRecord& r) {
    j = nlohmann::json{{"rep", r.rep},
                       {"ok", r.ok},
                       {"estimate", ifit::detail::vector_json(r.estimate)},
                       {"std_errors", ifit::detail::vector_json(r.std_errors)},
                       {"n_simulations", r.n_simulations},
                       {"failure", r.failure}};
}

inline void to_json(nlohmann::json& j, const SeSummary& s) {
    j = nlohmann::json{{"se", s.se}, {"ave_se", s.ave_se}, {"sd_se", s.sd_se}};
}

inline void to_json(nlohmann::json& j, const BenchmarkReport& r) {
    j = nlohmann::json{{"model", r.model},
                       {"reps", r.reps},
                       {"master_seed", r.master_seed},
                       {"theta_true", ifit::detail::vector_json(r.theta_true)},
                       {"ams", r.ams},
                       {"aare", r.aare},
                       {"se_table", r.se_table},
                       {"failures", r.failures},
                       {"failure_reasons", r.failure_reasons},
                       {"failure_flag", r.failure_flag},
                       {"replications", r.replications}};
}

inline void to_json(nlohmann::json& j, const McErrorReport& r) {
    nlohmann::json est = nlohmann::json::array();
    for (const auto& group : r.estimates) {
        nlohmann::json g = nlohmann::json::array();
        for (const auto& x : group) g.push_back(x.size() ? ifit::detail::vector_json(x) : nlohmann::json(nullptr));
        est.push_back(g);
    }
    j = nlohmann::json{{"model", r.model},
                       {"datasets", r.datasets},
                       {"repeats", r.repeats},
                       {"ratio", ifit::detail::vector_json(r.ratio)},
                       {"estimates", est},
                       {"failures", r.failures},
                       {"failure_reasons", r.failure_reasons}};
}

/// Pretty-printed JSON with full double precision.
template <typename T>
void write_json(const T& value, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << nlohmann::json(value).dump(2) << '\n';
    if (!out) throw DataError("write failed for '" + path + "'");
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_result(const FitResult& r, const std::string& path) { write_json(r, path); }

inline FitResult read_result(const std::string& path) {
    try {
        return read_json_file(path).get<FitResult>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("'" + path + "' is not a fit result: " + e.what());
    }
}

/// One row per engine iteration: iter,phase,rho,L,accepted,g_norm.
inline void write_trace_csv(const FitResult& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << std::setprecision(17) << "iter,phase,rho,L,accepted,g_norm\n";
    for (const auto& t : r.trace) {
        out << t.iter << ',' << to_string(t.phase) << ',';
        if (t.rho) out << *t.rho;
        out << ',' << t.fit_size << ',' << (t.accepted ? 1 : 0) << ',';
        if (t.g_norm) out << *t.g_norm;
        out << '\n';
    }
}

/// stat_index,score with a 0-based index.
inline void write_scores_csv(const FitResult& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << std::setprecision(17) << "stat_index,score\n";
    for (Eigen::Index i = 0; i < r.std_scores.size(); ++i) out << i << ',' << r.std_scores[i] << '\n';
}

}  // namespace harness

}  // namespace ifit
