#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace umitk {

constexpr const char* kVersion = "0.1.0";

// Per-vertex morphometry values, one column per subject.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Bad or inconsistent input data / configuration (CLI exit code 2).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure: divergence detected, undefined statistic, ... (CLI exit code 3).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InputError(msg);
}

}  // namespace umitk
