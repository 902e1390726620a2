#pragma once

#include "frdw/types.hpp"

#include <span>
#include <string>

namespace frdw {

enum class CspLayout { binary, one_vs_rest };

struct CspModel {
  Matrix filters;          // K x C, one spatial filter per row
  Vector eigenvalues;      // generalized eigenvalue of each row
  int n_classes{2};
  CspLayout layout{CspLayout::binary};
  int rows_per_class{0};   // one_vs_rest only

  Index n_features() const { return filters.rows(); }
  Index n_channels() const { return filters.cols(); }
};

inline constexpr double kCspRegularization = 1e-9;

// Mean of trace-normalized trial covariances, plus 1e-9 * trace / C on the diagonal.
Matrix normalized_mean_covariance(std::span<const Trial* const> trials);

// Sigma_1 w = lambda (Sigma_1 + Sigma_2) w on the two classes present (lower label is
// class 1). Keeps n_filters / 2 rows from each end of the spectrum, ordered by
// descending lambda. Eigenvectors are (Sigma_1 + Sigma_2)-orthonormal.
CspModel fit_csp_binary(std::span<const Trial> trials, int n_filters = 6);

// Class m vs all others for every class, keeping the rows_per_class largest-lambda rows
// of each, stacked in class order. Needs at least three classes.
CspModel fit_csp_ovr(std::span<const Trial> trials, int n_classes, int rows_per_class = 4);

// feature_k = log(var(z_k) / sum_j var(z_j)) with z = W X.
Vector extract_features(const CspModel& model, const Matrix& x);

std::string to_string(CspLayout layout);
CspLayout csp_layout_from_string(const std::string& s);

} // namespace frdw
