#include "frdw/alignment.hpp"

#include <string>

namespace frdw {

EaState::EaState(Index channels) : channels_(channels), sum_cov_(Matrix::Zero(channels, channels)) {}

void EaState::accumulate(const Matrix& x) {
  if (x.rows() != channels_) {
    throw ConfigError("EaState::accumulate: trial has " + std::to_string(x.rows()) + " channels, expected " +
                      std::to_string(channels_));
  }
  Matrix cov = Matrix::Zero(channels_, channels_);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(x);
  sum_cov_ += cov.selfadjointView<Eigen::Lower>();
  ++count_;
}

void EaState::finalize() {
  if (count_ < 1) throw ConfigError("EaState::finalize: no trials accumulated");
  Matrix ref = sum_cov_ / static_cast<double>(count_);
  const double eps = kEaRegularization * ref.trace() / static_cast<double>(channels_);
  if (!(eps > 0.0)) throw NumericError("EaState::finalize: reference matrix is not positive definite (all-zero data)");
  ref.diagonal().array() += eps;
  inverse_sqrt_ = inverse_sqrt_spd(ref);
  reference_ = std::move(ref);
}

const Matrix& EaState::reference() const {
  if (!reference_) throw ConfigError("EaState: reference requested before finalize");
  return *reference_;
}

const Matrix& EaState::inverse_sqrt() const {
  if (!inverse_sqrt_) throw ConfigError("EaState: alignment requested before finalize");
  return *inverse_sqrt_;
}

Matrix inverse_sqrt_spd(const Matrix& spd) {
  if (spd.rows() != spd.cols() || spd.rows() == 0) throw ConfigError("inverse_sqrt_spd: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(spd);
  if (eig.info() != Eigen::Success) throw NumericError("inverse_sqrt_spd: eigendecomposition failed");
  const Vector& lambda = eig.eigenvalues();
  if (!(lambda.minCoeff() > 0.0)) throw NumericError("inverse_sqrt_spd: matrix is not positive definite");
  const Matrix& q = eig.eigenvectors();
  Matrix out = q * lambda.array().rsqrt().matrix().asDiagonal() * q.transpose();
  // Symmetrize away round-off.
  return 0.5 * (out + out.transpose());
}

Matrix align(const Matrix& x, const Matrix& inv_sqrt) {
  if (inv_sqrt.cols() != x.rows()) {
    throw ConfigError("align: trial has " + std::to_string(x.rows()) + " channels, reference has " +
                      std::to_string(inv_sqrt.cols()));
  }
  const Index c_out = inv_sqrt.rows();
  const Index c_in = inv_sqrt.cols();
  Matrix out(c_out, x.cols());
  for (Index s = 0; s < x.cols(); ++s) {
    for (Index r = 0; r < c_out; ++r) {
      double acc = 0.0;
      for (Index c = 0; c < c_in; ++c) acc += inv_sqrt(r, c) * x(c, s);
      out(r, s) = acc;
    }
  }
  return out;
}

Trial align(const Trial& trial, const EaState& state) {
  Trial out = trial;
  out.data = align(trial.data, state.inverse_sqrt());
  return out;
}

} // namespace frdw
