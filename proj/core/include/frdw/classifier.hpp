#pragma once

#include "frdw/types.hpp"

#include <span>
#include <string>
#include <variant>
#include <vector>

namespace frdw {

// Output of any probabilistic classifier: probs sum to one, cls = argmax (lowest index
// on ties), p = probs[cls].
struct Prediction {
  std::vector<double> probs;
  int cls{0};
  double p{0.0};
};

// Normalizes, floors every entry at 1e-15 so probabilities stay inside (0, 1), and
// picks the argmax.
Prediction make_prediction(std::vector<double> probs);

struct TrainingInfo {
  long iterations{0};
  bool converged{true};
  double residual{0.0};  // gradient norm (logreg) or worst KKT gap (svm)
};

// Multinomial logistic regression on standardized features.
struct LogRegModel {
  Matrix weights;        // M x K
  Vector bias;           // M
  Vector feature_mean;   // K
  Vector feature_scale;  // K
};

struct KernelSpec {
  enum class Kind { linear, rbf };
  Kind kind{Kind::rbf};
  double gamma{0.0};  // <= 0 means 1 / (K * var(features)), resolved at training time
  double c{1.0};
};

struct BinarySvm {
  RowMatrix support_vectors;  // n_sv x K
  Vector coef;             // alpha_i * y_i
  double rho{0.0};
  double platt_a{0.0};
  double platt_b{0.0};
};

struct SvmModel {
  KernelSpec kernel;
  std::vector<BinarySvm> machines;  // one for M == 2 (positive = class 1), else one per class
};

enum class ClassifierKind { logreg, svm };

class ProbClassifier {
public:
  using Params = std::variant<LogRegModel, SvmModel>;

  ProbClassifier() = default;
  ProbClassifier(Params params, int n_classes, int n_features, TrainingInfo info = {});

  ClassifierKind kind() const;
  int n_classes() const { return n_classes_; }
  int n_features() const { return n_features_; }
  const Params& params() const { return params_; }
  const TrainingInfo& info() const { return info_; }

  Prediction predict_proba(std::span<const double> feature) const;
  Prediction predict_proba(const Vector& feature) const {
    return predict_proba(std::span<const double>(feature.data(), static_cast<std::size_t>(feature.size())));
  }

private:
  Params params_;
  int n_classes_{0};
  int n_features_{0};
  TrainingInfo info_;
};

// --- logistic regression -------------------------------------------------------------

struct LogRegOptions {
  double l2{1e-2};
  int max_iter{5000};
  double grad_tol{1e-6};
};

// Mean cross-entropy + l2 ||W||^2 / 2 over parameters theta = [vec(W) (column-major, M x K), b].
class LogRegObjective {
public:
  LogRegObjective(const Matrix& features, std::span<const int> labels, int n_classes, double l2);

  Index n_params() const { return static_cast<Index>(n_classes_) * (features_.cols() + 1); }
  double value(const Vector& theta) const;
  Vector gradient(const Vector& theta) const;

private:
  Matrix logits(const Vector& theta) const;

  const Matrix& features_;
  std::vector<int> labels_;
  int n_classes_;
  double l2_;
};

// features: one row per sample. Full-batch gradient descent with Armijo backtracking until
// the gradient norm drops below grad_tol or max_iter is reached.
ProbClassifier train_logreg(const Matrix& features, std::span<const int> labels, int n_classes,
                            const LogRegOptions& options = {});

// --- support vector machine ----------------------------------------------------------

struct SvmOptions {
  double tol{1e-3};        // maximal KKT violation at exit
  long max_iter{10'000'000};
  std::size_t cache_mb{100};
};

struct DualSolution {
  Vector alpha;
  double rho{0.0};
  double objective{0.0};  // 1/2 a^T Q a - sum a, Q_ij = y_i y_j K_ij
  long iterations{0};
  bool converged{false};
  double kkt_gap{0.0};
};

double kernel_value(const KernelSpec& k, std::span<const double> a, std::span<const double> b);

// SMO with second-order working-set selection on a single +-1 problem.
DualSolution solve_svm_dual(const Matrix& features, std::span<const double> y, const KernelSpec& kernel,
                            const SvmOptions& options = {});

struct PlattParams {
  double a{0.0};
  double b{0.0};
};
// Fits P(y = +1 | f) = 1 / (1 + exp(a f + b)) by Newton's method with backtracking.
PlattParams fit_platt(std::span<const double> decision_values, std::span<const double> y);
double platt_probability(const PlattParams& params, double decision_value);

double svm_decision(const BinarySvm& machine, const KernelSpec& kernel, std::span<const double> x);

// Binary problems solved with SMO, one-vs-rest for M > 2, Platt scaling on training
// decision values. Non-convergence is reported through info(), not thrown.
ProbClassifier train_svm(const Matrix& features, std::span<const int> labels, int n_classes,
                         const KernelSpec& kernel, const SvmOptions& options = {});

std::string to_string(ClassifierKind kind);
std::string to_string(KernelSpec::Kind kind);

} // namespace frdw
