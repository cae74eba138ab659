#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <utility>

namespace ifit {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid engine configuration; the message lists every violated constraint.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Factorization failed even after ridge escalation, or a degenerate estimate.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed or degenerate input data (CSV files, summary statistics).
class DataError : public Error {
public:
    using Error::Error;
};

/// A simulator failed or produced invalid output. Carries the offending parameter.
class ModelError : public Error {
public:
    ModelError(const std::string& what, Eigen::VectorXd theta)
        : Error(what), theta_(std::move(theta)) {}

    const Eigen::VectorXd& theta() const noexcept { return theta_; }

private:
    Eigen::VectorXd theta_;
};

/// External simulator broke the wire protocol (bad JSON, wrong length, timeouts).
class ProtocolError : public ModelError {
public:
    using ModelError::ModelError;
};

}  // namespace ifit
