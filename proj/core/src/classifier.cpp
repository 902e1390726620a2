#include "frdw/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>

namespace frdw {

namespace {

constexpr double kProbFloor = 1e-15;
constexpr double kTau = 1e-12;

void check_training_input(const Matrix& features, std::span<const int> labels, int n_classes) {
  if (features.rows() == 0 || features.cols() == 0) throw DataError("classifier: empty training set");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw DataError("classifier: " + std::to_string(features.rows()) + " feature rows but " +
                    std::to_string(labels.size()) + " labels");
  }
  if (n_classes < 2) throw ConfigError("classifier: needs at least two classes");
  std::vector<bool> seen(static_cast<std::size_t>(n_classes), false);
  for (int l : labels) {
    if (l < 0 || l >= n_classes) throw DataError("classifier: label " + std::to_string(l) + " out of range");
    seen[static_cast<std::size_t>(l)] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) < 2) {
    throw DataError("classifier: degenerate training set with a single class");
  }
  if (!all_finite(features)) throw DataError("classifier: non-finite feature value");
}

std::span<const double> row_span(const Matrix& m, Index r, std::vector<double>& scratch) {
  scratch.resize(static_cast<std::size_t>(m.cols()));
  for (Index k = 0; k < m.cols(); ++k) scratch[static_cast<std::size_t>(k)] = m(r, k);
  return scratch;
}

std::span<const double> row_of(const RowMatrix& m, Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

// LRU cache of kernel matrix columns.
class KernelColumns {
public:
  KernelColumns(const RowMatrix& x, const KernelSpec& k, std::size_t cache_mb) : x_(x), k_(k) {
    const std::size_t col_bytes = static_cast<std::size_t>(x.rows()) * sizeof(double);
    capacity_ = std::max<std::size_t>(2, cache_mb * 1024 * 1024 / std::max<std::size_t>(col_bytes, 1));
    diag_.resize(x.rows());
    for (Index i = 0; i < x.rows(); ++i) diag_(i) = kernel_value(k_, row_of(x_, i), row_of(x_, i));
  }

  const Vector& diag() const { return diag_; }

  const Vector& column(Index i) {
    if (auto it = index_.find(i); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    Vector col(x_.rows());
    const auto xi = row_of(x_, i);
    for (Index j = 0; j < x_.rows(); ++j) col(j) = kernel_value(k_, xi, row_of(x_, j));
    lru_.emplace_front(i, std::move(col));
    index_[i] = lru_.begin();
    return lru_.front().second;
  }

private:
  const RowMatrix& x_;
  KernelSpec k_;
  Vector diag_;
  std::size_t capacity_;
  std::list<std::pair<Index, Vector>> lru_;
  std::unordered_map<Index, std::list<std::pair<Index, Vector>>::iterator> index_;
};

double sigmoid_neg(double z) {
  // 1 / (1 + exp(z)) without overflow
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

KernelSpec resolve_gamma(KernelSpec k, const Matrix& features) {
  if (k.c <= 0.0) throw ConfigError("train_svm: C must be positive");
  if (k.kind == KernelSpec::Kind::rbf && k.gamma <= 0.0) {
    const double mean = features.mean();
    const double var = (features.array() - mean).square().mean();
    const double dim = static_cast<double>(features.cols());
    k.gamma = var > 0.0 ? 1.0 / (dim * var) : 1.0 / dim;
  }
  return k;
}

} // namespace

Prediction make_prediction(std::vector<double> probs) {
  if (probs.empty()) throw ConfigError("make_prediction: no classes");
  for (double& v : probs) v = std::max(v, kProbFloor);
  double sum = 0.0;
  for (double v : probs) sum += v;
  for (double& v : probs) v /= sum;
  Prediction out;
  out.cls = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  out.p = probs[static_cast<std::size_t>(out.cls)];
  out.probs = std::move(probs);
  return out;
}

ProbClassifier::ProbClassifier(Params params, int n_classes, int n_features, TrainingInfo info)
    : params_(std::move(params)), n_classes_(n_classes), n_features_(n_features), info_(info) {}

ClassifierKind ProbClassifier::kind() const {
  return std::holds_alternative<LogRegModel>(params_) ? ClassifierKind::logreg : ClassifierKind::svm;
}

Prediction ProbClassifier::predict_proba(std::span<const double> feature) const {
  if (static_cast<int>(feature.size()) != n_features_) {
    throw DataError("predict_proba: feature length " + std::to_string(feature.size()) + ", model expects " +
                    std::to_string(n_features_));
  }
  std::vector<double> probs(static_cast<std::size_t>(n_classes_));
  if (const auto* lr = std::get_if<LogRegModel>(&params_)) {
    Vector x(n_features_);
    for (int k = 0; k < n_features_; ++k) {
      x(k) = (feature[static_cast<std::size_t>(k)] - lr->feature_mean(k)) / lr->feature_scale(k);
    }
    const Vector z = lr->weights * x + lr->bias;
    const double zmax = z.maxCoeff();
    double sum = 0.0;
    for (int m = 0; m < n_classes_; ++m) {
      probs[static_cast<std::size_t>(m)] = std::exp(z(m) - zmax);
      sum += probs[static_cast<std::size_t>(m)];
    }
    for (double& v : probs) v /= sum;
  } else {
    const auto& svm = std::get<SvmModel>(params_);
    if (n_classes_ == 2) {
      const auto& mc = svm.machines.front();
      const double p1 = platt_probability({mc.platt_a, mc.platt_b}, svm_decision(mc, svm.kernel, feature));
      probs = {1.0 - p1, p1};
    } else {
      for (int m = 0; m < n_classes_; ++m) {
        const auto& mc = svm.machines[static_cast<std::size_t>(m)];
        probs[static_cast<std::size_t>(m)] =
            platt_probability({mc.platt_a, mc.platt_b}, svm_decision(mc, svm.kernel, feature));
      }
    }
  }
  return make_prediction(std::move(probs));
}

// --- logistic regression -------------------------------------------------------------

LogRegObjective::LogRegObjective(const Matrix& features, std::span<const int> labels, int n_classes, double l2)
    : features_(features), labels_(labels.begin(), labels.end()), n_classes_(n_classes), l2_(l2) {}

Matrix LogRegObjective::logits(const Vector& theta) const {
  const Index k = features_.cols();
  const Eigen::Map<const Matrix> w(theta.data(), n_classes_, k);
  const Eigen::Map<const Vector> b(theta.data() + n_classes_ * k, n_classes_);
  Matrix z = features_ * w.transpose();
  z.rowwise() += b.transpose();
  return z;
}

double LogRegObjective::value(const Vector& theta) const {
  const Matrix z = logits(theta);
  double ce = 0.0;
  for (Index i = 0; i < z.rows(); ++i) {
    const double zmax = z.row(i).maxCoeff();
    const double lse = zmax + std::log((z.row(i).array() - zmax).exp().sum());
    ce += lse - z(i, labels_[static_cast<std::size_t>(i)]);
  }
  const Index k = features_.cols();
  const double wnorm = theta.head(n_classes_ * k).squaredNorm();
  return ce / static_cast<double>(z.rows()) + 0.5 * l2_ * wnorm;
}

Vector LogRegObjective::gradient(const Vector& theta) const {
  Matrix p = logits(theta);
  for (Index i = 0; i < p.rows(); ++i) {
    const double zmax = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - zmax).exp();
    p.row(i) /= p.row(i).sum();
    p(i, labels_[static_cast<std::size_t>(i)]) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(p.rows());
  const Index k = features_.cols();
  Vector g(n_params());
  Eigen::Map<Matrix> gw(g.data(), n_classes_, k);
  gw = (p.transpose() * features_) * inv_n;
  gw += l2_ * Eigen::Map<const Matrix>(theta.data(), n_classes_, k);
  g.tail(n_classes_) = p.colwise().sum().transpose() * inv_n;
  return g;
}

ProbClassifier train_logreg(const Matrix& features, std::span<const int> labels, int n_classes,
                            const LogRegOptions& options) {
  check_training_input(features, labels, n_classes);
  if (options.l2 < 0.0) throw ConfigError("train_logreg: l2 must be >= 0");
  const Index k = features.cols();

  LogRegModel model;
  model.feature_mean = features.colwise().mean().transpose();
  model.feature_scale.resize(k);
  for (Index j = 0; j < k; ++j) {
    const double sd = std::sqrt((features.col(j).array() - model.feature_mean(j)).square().mean());
    model.feature_scale(j) = sd > 0.0 ? sd : 1.0;
  }
  Matrix x = features.rowwise() - model.feature_mean.transpose();
  x = x.array().rowwise() / model.feature_scale.transpose().array();

  const LogRegObjective obj(x, labels, n_classes, options.l2);
  Vector theta = Vector::Zero(obj.n_params());
  double f = obj.value(theta);
  double step = 1.0;
  TrainingInfo info;
  info.converged = false;
  for (long it = 0; it < options.max_iter; ++it) {
    const Vector g = obj.gradient(theta);
    const double gnorm2 = g.squaredNorm();
    info.residual = std::sqrt(gnorm2);
    info.iterations = it;
    if (info.residual < options.grad_tol) {
      info.converged = true;
      break;
    }
    step = std::min(step * 2.0, 1e6);
    Vector next = theta - step * g;
    double f_next = obj.value(next);
    while (f_next > f - 0.5 * step * gnorm2 && step > 1e-20) {
      step *= 0.5;
      next = theta - step * g;
      f_next = obj.value(next);
    }
    if (!(f_next < f)) {
      // No further decrease is representable; treat as converged at machine precision.
      info.converged = info.residual < std::sqrt(options.grad_tol);
      break;
    }
    theta = std::move(next);
    f = f_next;
    info.iterations = it + 1;
  }
  if (!info.converged) {
    info.residual = obj.gradient(theta).norm();
    info.converged = info.residual < options.grad_tol;
  }

  model.weights = Eigen::Map<const Matrix>(theta.data(), n_classes, k);
  model.bias = theta.tail(n_classes);
  return ProbClassifier(std::move(model), n_classes, static_cast<int>(k), info);
}

// --- support vector machine ----------------------------------------------------------

double kernel_value(const KernelSpec& k, std::span<const double> a, std::span<const double> b) {
  if (k.kind == KernelSpec::Kind::linear) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot;
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-k.gamma * d2);
}

DualSolution solve_svm_dual(const Matrix& features, std::span<const double> y, const KernelSpec& kernel,
                            const SvmOptions& options) {
  const Index n = features.rows();
  if (static_cast<std::size_t>(n) != y.size()) throw DataError("solve_svm_dual: label count mismatch");
  if (kernel.c <= 0.0) throw ConfigError("solve_svm_dual: C must be positive");
  const double c = kernel.c;
  const RowMatrix x = features;
  KernelColumns cols(x, kernel, options.cache_mb);
  const Vector& kd = cols.diag();

  Vector alpha = Vector::Zero(n);
  Vector grad = Vector::Constant(n, -1.0);
  DualSolution sol;
  const double inf = std::numeric_limits<double>::infinity();

  long iter = 0;
  double gap = inf;
  for (; iter < options.max_iter; ++iter) {
    // Working set selection: maximal violating i, then j by second-order gain.
    double gmax = -inf;
    Index i = -1;
    for (Index t = 0; t < n; ++t) {
      if (y[static_cast<std::size_t>(t)] > 0) {
        if (alpha(t) < c && -grad(t) >= gmax) { gmax = -grad(t); i = t; }
      } else {
        if (alpha(t) > 0 && grad(t) >= gmax) { gmax = grad(t); i = t; }
      }
    }
    double gmax2 = -inf;
    Index j = -1;
    double best = inf;
    if (i >= 0) {
      const Vector& ki = cols.column(i);
      for (Index t = 0; t < n; ++t) {
        const bool pos = y[static_cast<std::size_t>(t)] > 0;
        const bool eligible = pos ? alpha(t) > 0 : alpha(t) < c;
        if (!eligible) continue;
        const double yg = pos ? grad(t) : -grad(t);
        gmax2 = std::max(gmax2, yg);
        const double grad_diff = gmax + yg;
        if (grad_diff > 0) {
          double quad = kd(i) + kd(t) - 2.0 * ki(t);
          if (quad <= 0) quad = kTau;
          const double obj_diff = -(grad_diff * grad_diff) / quad;
          if (obj_diff <= best) { best = obj_diff; j = t; }
        }
      }
    }
    gap = gmax + gmax2;
    if (i < 0 || j < 0 || gap < options.tol) break;

    const Vector ki = cols.column(i);  // copy: the next lookup may evict it
    const Vector& kj = cols.column(j);
    const double yi = y[static_cast<std::size_t>(i)];
    const double yj = y[static_cast<std::size_t>(j)];
    const double old_ai = alpha(i);
    const double old_aj = alpha(j);
    double ai = old_ai;
    double aj = old_aj;
    double quad = kd(i) + kd(j) - 2.0 * ki(j);
    if (quad <= 0) quad = kTau;
    if (yi != yj) {
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) { aj = 0; ai = diff; }
      } else {
        if (ai < 0) { ai = 0; aj = -diff; }
      }
      if (diff > 0) {
        if (ai > c) { ai = c; aj = c - diff; }
      } else {
        if (aj > c) { aj = c; ai = c + diff; }
      }
    } else {
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c) {
        if (ai > c) { ai = c; aj = sum - c; }
      } else {
        if (aj < 0) { aj = 0; ai = sum; }
      }
      if (sum > c) {
        if (aj > c) { aj = c; ai = sum - c; }
      } else {
        if (ai < 0) { ai = 0; aj = sum; }
      }
    }
    alpha(i) = ai;
    alpha(j) = aj;
    const double dai = (ai - old_ai) * yi;
    const double daj = (aj - old_aj) * yj;
    for (Index t = 0; t < n; ++t) {
      grad(t) += y[static_cast<std::size_t>(t)] * (ki(t) * dai + kj(t) * daj);
    }
  }

  sol.iterations = iter;
  sol.kkt_gap = gap;
  sol.converged = gap < options.tol;

  double ub = inf, lb = -inf, sum_free = 0.0;
  long n_free = 0;
  for (Index t = 0; t < n; ++t) {
    const double yt = y[static_cast<std::size_t>(t)];
    const double yg = yt * grad(t);
    if (alpha(t) >= c) {
      if (yt < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha(t) <= 0) {
      if (yt > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  sol.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  sol.objective = 0.5 * alpha.dot(grad - Vector::Ones(n));
  sol.alpha = std::move(alpha);
  return sol;
}

PlattParams fit_platt(std::span<const double> dec, std::span<const double> y) {
  const std::size_t n = dec.size();
  if (n != y.size() || n == 0) throw DataError("fit_platt: size mismatch");
  double prior1 = 0.0, prior0 = 0.0;
  for (double v : y) (v > 0 ? prior1 : prior0) += 1.0;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = y[i] > 0 ? hi : lo;

  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fab = dec[i] * a + b;
      f += fab >= 0 ? t[i] * fab + std::log1p(std::exp(-fab)) : (t[i] - 1.0) * fab + std::log1p(std::exp(fab));
    }
    return f;
  };

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = objective(a, b);
  constexpr double sigma = 1e-12;
  for (int it = 0; it < 100; ++it) {
    double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fab = dec[i] * a + b;
      double p, q;
      if (fab >= 0) {
        p = std::exp(-fab) / (1.0 + std::exp(-fab));
        q = 1.0 / (1.0 + std::exp(-fab));
      } else {
        p = 1.0 / (1.0 + std::exp(fab));
        q = std::exp(fab) / (1.0 + std::exp(fab));
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= 1e-10) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < 1e-10) break;
  }
  return {a, b};
}

double platt_probability(const PlattParams& params, double decision_value) {
  return sigmoid_neg(params.a * decision_value + params.b);
}

double svm_decision(const BinarySvm& machine, const KernelSpec& kernel, std::span<const double> x) {
  double sum = 0.0;
  for (Index s = 0; s < machine.support_vectors.rows(); ++s) {
    const auto sv = std::span<const double>(machine.support_vectors.data() + s * machine.support_vectors.cols(),
                                            static_cast<std::size_t>(machine.support_vectors.cols()));
    sum += machine.coef(s) * kernel_value(kernel, sv, x);
  }
  return sum - machine.rho;
}

ProbClassifier train_svm(const Matrix& features, std::span<const int> labels, int n_classes, const KernelSpec& spec,
                         const SvmOptions& options) {
  check_training_input(features, labels, n_classes);
  const KernelSpec kernel = resolve_gamma(spec, features);
  SvmModel model;
  model.kernel = kernel;
  TrainingInfo info;
  const int n_machines = n_classes == 2 ? 1 : n_classes;
  std::vector<double> scratch;
  for (int m = 0; m < n_machines; ++m) {
    const int positive = n_classes == 2 ? 1 : m;
    std::vector<double> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == positive ? 1.0 : -1.0;
    const DualSolution sol = solve_svm_dual(features, y, kernel, options);
    info.iterations += sol.iterations;
    info.converged = info.converged && sol.converged;
    info.residual = std::max(info.residual, sol.kkt_gap);

    BinarySvm mc;
    mc.rho = sol.rho;
    std::vector<Index> sv;
    for (Index i = 0; i < sol.alpha.size(); ++i) {
      if (sol.alpha(i) > 0.0) sv.push_back(i);
    }
    mc.support_vectors.resize(static_cast<Index>(sv.size()), features.cols());
    mc.coef.resize(static_cast<Index>(sv.size()));
    for (std::size_t s = 0; s < sv.size(); ++s) {
      mc.support_vectors.row(static_cast<Index>(s)) = features.row(sv[s]);
      mc.coef(static_cast<Index>(s)) = sol.alpha(sv[s]) * y[static_cast<std::size_t>(sv[s])];
    }

    std::vector<double> dec(labels.size());
    for (Index i = 0; i < features.rows(); ++i) {
      dec[static_cast<std::size_t>(i)] = svm_decision(mc, kernel, row_span(features, i, scratch));
    }
    const PlattParams pp = fit_platt(dec, y);
    mc.platt_a = pp.a;
    mc.platt_b = pp.b;
    model.machines.push_back(std::move(mc));
  }
  return ProbClassifier(std::move(model), n_classes, static_cast<int>(features.cols()), info);
}

std::string to_string(ClassifierKind kind) { return kind == ClassifierKind::logreg ? "logreg" : "svm"; }
std::string to_string(KernelSpec::Kind kind) { return kind == KernelSpec::Kind::linear ? "linear" : "rbf"; }

} // namespace frdw
