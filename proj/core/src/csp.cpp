#include "frdw/csp.hpp"

#include <cmath>
#include <map>
#include <vector>

namespace frdw {

namespace {

struct EigenPair {
  Vector values;   // ascending
  Matrix vectors;  // columns
};

EigenPair generalized_eigen(const Matrix& a, const Matrix& b) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(a, b, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (ges.info() != Eigen::Success) {
    throw NumericError("CSP: class covariances are not positive definite after regularization");
  }
  EigenPair out{ges.eigenvalues(), ges.eigenvectors()};
  for (Index j = 0; j < out.vectors.cols(); ++j) {
    Index arg = 0;
    out.vectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (out.vectors(arg, j) < 0.0) out.vectors.col(j) *= -1.0;
  }
  return out;
}

std::map<int, std::vector<const Trial*>> group_by_label(std::span<const Trial> trials) {
  std::map<int, std::vector<const Trial*>> groups;
  for (const auto& t : trials) {
    if (!t.label) throw DataError("CSP: training trial without label");
    groups[*t.label].push_back(&t);
  }
  return groups;
}

Index common_channels(std::span<const Trial> trials) {
  if (trials.empty()) throw DataError("CSP: no training trials");
  const Index c = trials.front().channels();
  for (const auto& t : trials) {
    if (t.channels() != c) throw DataError("CSP: trials have differing channel counts");
  }
  return c;
}

} // namespace

Matrix normalized_mean_covariance(std::span<const Trial* const> trials) {
  if (trials.empty()) throw DataError("CSP: a class has no trials");
  const Index c = trials.front()->channels();
  Matrix sum = Matrix::Zero(c, c);
  for (const Trial* t : trials) {
    const Matrix centered = t->data.colwise() - t->data.rowwise().mean();
    Matrix cov = centered * centered.transpose();
    const double tr = cov.trace();
    if (!(tr > 0.0)) throw NumericError("CSP: zero-variance training trial");
    sum += cov / tr;
  }
  sum /= static_cast<double>(trials.size());
  sum.diagonal().array() += kCspRegularization * sum.trace() / static_cast<double>(c);
  return 0.5 * (sum + sum.transpose());
}

CspModel fit_csp_binary(std::span<const Trial> trials, int n_filters) {
  const Index c = common_channels(trials);
  if (n_filters < 2 || n_filters % 2 != 0) throw ConfigError("fit_csp_binary: n_filters must be even and >= 2");
  if (n_filters > 2 * c) throw ConfigError("fit_csp_binary: n_filters exceeds 2 * channels");
  const auto groups = group_by_label(trials);
  if (groups.size() != 2) {
    throw DataError("fit_csp_binary: expected exactly 2 classes, found " + std::to_string(groups.size()));
  }
  const auto& first = groups.begin()->second;
  const auto& second = std::next(groups.begin())->second;
  const Matrix s1 = normalized_mean_covariance(first);
  const Matrix s2 = normalized_mean_covariance(second);
  const EigenPair eig = generalized_eigen(s1, s1 + s2);

  const int half = n_filters / 2;
  CspModel m;
  m.layout = CspLayout::binary;
  m.n_classes = 2;
  m.filters.resize(n_filters, c);
  m.eigenvalues.resize(n_filters);
  for (int i = 0; i < half; ++i) {
    const Index top = c - 1 - i;   // largest first
    m.filters.row(i) = eig.vectors.col(top).transpose();
    m.eigenvalues(i) = eig.values(top);
    const Index bottom = half - 1 - i;  // then the smallest, still descending
    m.filters.row(half + i) = eig.vectors.col(bottom).transpose();
    m.eigenvalues(half + i) = eig.values(bottom);
  }
  return m;
}

CspModel fit_csp_ovr(std::span<const Trial> trials, int n_classes, int rows_per_class) {
  const Index c = common_channels(trials);
  if (n_classes < 3) throw ConfigError("fit_csp_ovr: needs >= 3 classes; use fit_csp_binary for two");
  if (rows_per_class < 1 || rows_per_class > c) throw ConfigError("fit_csp_ovr: rows_per_class must lie in [1, C]");
  const auto groups = group_by_label(trials);
  if (groups.begin()->first < 0 || groups.rbegin()->first >= n_classes) {
    throw DataError("fit_csp_ovr: label outside [0, " + std::to_string(n_classes) + ")");
  }
  CspModel m;
  m.layout = CspLayout::one_vs_rest;
  m.n_classes = n_classes;
  m.rows_per_class = rows_per_class;
  m.filters.resize(static_cast<Index>(n_classes) * rows_per_class, c);
  m.eigenvalues.resize(m.filters.rows());
  for (int cls = 0; cls < n_classes; ++cls) {
    std::vector<const Trial*> in_class;
    std::vector<const Trial*> rest;
    for (const auto& t : trials) (*t.label == cls ? in_class : rest).push_back(&t);
    if (in_class.empty()) throw DataError("fit_csp_ovr: class " + std::to_string(cls) + " has no trials");
    if (rest.empty()) throw DataError("fit_csp_ovr: no trials outside class " + std::to_string(cls));
    const Matrix s1 = normalized_mean_covariance(in_class);
    const Matrix s2 = normalized_mean_covariance(rest);
    const EigenPair eig = generalized_eigen(s1, s1 + s2);
    for (int i = 0; i < rows_per_class; ++i) {
      const Index row = static_cast<Index>(cls) * rows_per_class + i;
      m.filters.row(row) = eig.vectors.col(c - 1 - i).transpose();
      m.eigenvalues(row) = eig.values(c - 1 - i);
    }
  }
  return m;
}

Vector extract_features(const CspModel& model, const Matrix& x) {
  if (x.rows() != model.n_channels()) {
    throw DataError("extract_features: trial has " + std::to_string(x.rows()) + " channels, model expects " +
                    std::to_string(model.n_channels()));
  }
  const Matrix z = model.filters * x;
  const Vector mean = z.rowwise().mean();
  Vector var(z.rows());
  for (Index k = 0; k < z.rows(); ++k) {
    var(k) = (z.row(k).array() - mean(k)).square().sum();
  }
  const double total = var.sum();
  if (!(total > 0.0) || !(var.minCoeff() > 0.0)) {
    throw DataError("extract_features: zero-variance projected signal");
  }
  return (var.array() / total).log().matrix();
}

std::string to_string(CspLayout layout) { return layout == CspLayout::binary ? "binary" : "ovr"; }

CspLayout csp_layout_from_string(const std::string& s) {
  if (s == "binary") return CspLayout::binary;
  if (s == "ovr") return CspLayout::one_vs_rest;
  throw ConfigError("unknown CSP layout '" + s + "'");
}

} // namespace frdw
