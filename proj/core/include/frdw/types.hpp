#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

namespace frdw {

// Trials are stored channels x samples, column-major (one column per time point).
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Input data violates an invariant: malformed bundle, non-finite samples, shape mismatch.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Caller misuse or an invalid configuration value.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: matrix not positive definite, solver did not converge.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Trial {
  Matrix data;                // channels x samples
  double fs{250.0};           // Hz
  std::optional<int> label;   // 0-based class index

  Index channels() const { return data.rows(); }
  Index samples() const { return data.cols(); }
};

// Throws DataError unless C >= 1, S >= 1, fs > 0 and every sample is finite.
void validate_trial(const Trial& trial, const std::string& context = {});

bool all_finite(const Matrix& m);

} // namespace frdw
