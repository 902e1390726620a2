#pragma once

#include "frdw/types.hpp"

#include <optional>

namespace frdw {

// Euclidean alignment state: running sum of X X^T over received trials, then the frozen
// reference R = sum / n and its inverse square root.
class EaState {
public:
  explicit EaState(Index channels = 0);

  // sum_cov += X X^T, count += 1.
  void accumulate(const Matrix& x);

  // Freezes the reference: R = sum_cov / count + eps I with eps = 1e-8 trace(R) / C,
  // then R^{-1/2} = Q diag(lambda^{-1/2}) Q^T. Throws NumericError on all-zero data.
  void finalize();

  Index channels() const { return channels_; }
  long count() const { return count_; }
  bool finalized() const { return reference_.has_value(); }
  const Matrix& sum_cov() const { return sum_cov_; }
  const Matrix& reference() const;
  const Matrix& inverse_sqrt() const;

private:
  Index channels_;
  Matrix sum_cov_;
  long count_{0};
  std::optional<Matrix> reference_;
  std::optional<Matrix> inverse_sqrt_;
};

inline constexpr double kEaRegularization = 1e-8;

// Q diag(lambda^{-1/2}) Q^T for a symmetric positive definite matrix.
Matrix inverse_sqrt_spd(const Matrix& spd);

// inv_sqrt * x with a fixed per-column summation order, so aligning a signal chunk by
// chunk gives the same bits as aligning it whole.
Matrix align(const Matrix& x, const Matrix& inv_sqrt);
Trial align(const Trial& trial, const EaState& state);

} // namespace frdw
