#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace backfire {

inline constexpr const char* kVersion = "0.1.0";

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Base of every error the toolkit throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input file does not carry a required column.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Configuration is internally inconsistent or incomplete.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Design matrix is (numerically) rank deficient.
class RankError : public Error {
public:
    using Error::Error;
};

/// Iterative estimator failed to reach its stopping rule.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace backfire
