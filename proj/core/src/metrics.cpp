#include "frdw/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace frdw {

namespace {

double xlog2x(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericError("incomplete_beta: continued fraction did not converge");
}

std::string fmt(double v, int precision) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

} // namespace

double itr(double p, int m, double t) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("itr: accuracy must lie in [0, 1]");
  if (m < 2) throw ConfigError("itr: needs at least two classes");
  if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("itr: mean time must be positive");
  const double md = static_cast<double>(m);
  if (p < 1.0 / md) return 0.0;
  const double q = 1.0 - p;
  // (1 - P) log2((1 - P) / (M - 1)) = xlog2x(1 - P) - (1 - P) log2(M - 1)
  const double bits = std::log2(md) + xlog2x(p) + xlog2x(q) - q * std::log2(md - 1.0);
  return (60.0 / t) * std::max(bits, 0.0);
}

SessionMetrics session_metrics(std::span<const DecisionRecord> records, double fs, int n_classes) {
  if (records.empty()) throw DataError("session_metrics: no records");
  if (!(fs > 0.0)) throw ConfigError("session_metrics: fs must be positive");
  std::size_t correct = 0;
  double samples = 0.0;
  for (const auto& r : records) {
    if (!r.label) throw DataError("session_metrics: record " + std::to_string(r.trial) + " has no label");
    if (r.pred == *r.label) ++correct;
    samples += static_cast<double>(r.samples_used);
  }
  SessionMetrics m;
  m.n_trials = records.size();
  m.n_classes = n_classes;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(records.size());
  m.mean_time_s = samples / static_cast<double>(records.size()) / fs;
  m.itr = itr(m.accuracy, n_classes, m.mean_time_s);
  return m;
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw ConfigError("student_t_two_sided: df must be positive");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("paired_t_test: samples differ in length");
  if (a.size() < 2) throw ConfigError("paired_t_test: needs at least two pairs");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  bool all_zero = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) all_zero = false;
    ss += (d - mean) * (d - mean);
  }
  if (all_zero) return {0.0, 1.0};
  const double sd = std::sqrt(ss / (n - 1.0));
  TTestResult r;
  if (sd == 0.0) {
    r.t = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(n));
  r.p = student_t_two_sided(r.t, n - 1.0);
  return r;
}

Index select_hyperparams(std::span<const Candidate> candidates) {
  if (candidates.empty()) throw ConfigError("select_hyperparams: no candidates");
  const Candidate* best = &candidates.front();
  for (const auto& c : candidates) {
    if (c.itr > best->itr || (c.itr == best->itr && c.n_samples < best->n_samples)) best = &c;
  }
  return best->n_samples;
}

SweepResult sensitivity_sweep(std::span<const std::string> schemes, std::span<const Index> l_grid,
                              std::span<const double> tau_grid, const SweepEvaluator& evaluate) {
  if (schemes.empty() || l_grid.empty() || tau_grid.empty()) throw ConfigError("sensitivity_sweep: empty grid");
  SweepResult out;
  for (const auto& scheme : schemes) {
    for (Index l : l_grid) {
      for (double tau : tau_grid) {
        SweepCell cell;
        cell.scheme = scheme;
        cell.l_min = l;
        cell.tau = tau;
        try {
          const SessionMetrics m = evaluate(scheme, l, tau);
          cell.accuracy = m.accuracy;
          cell.itr = m.itr;
          cell.mean_time_s = m.mean_time_s;
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.error = e.what();
          cell.accuracy = cell.itr = cell.mean_time_s = std::numeric_limits<double>::quiet_NaN();
        }
        out.cells.push_back(std::move(cell));
      }
    }
  }
  return out;
}

std::string SweepResult::to_csv() const {
  std::ostringstream os;
  os << "l_min,tau,scheme,acc,itr,mean_time_s\n";
  for (const auto& c : cells) {
    os << c.l_min << ',' << fmt(c.tau, 6) << ',' << c.scheme << ',' << fmt(c.accuracy, 10) << ',' << fmt(c.itr, 10)
       << ',' << fmt(c.mean_time_s, 10) << '\n';
  }
  return os.str();
}

std::string SweepResult::to_table() const {
  std::ostringstream os;
  os << std::left << std::setw(9) << "scheme" << std::right << std::setw(7) << "l_min" << std::setw(7) << "tau"
     << std::setw(9) << "acc" << std::setw(10) << "itr" << std::setw(10) << "time_s" << '\n';
  for (const auto& c : cells) {
    os << std::left << std::setw(9) << c.scheme << std::right << std::setw(7) << c.l_min << std::setw(7)
       << std::fixed << std::setprecision(2) << c.tau;
    if (c.failed) {
      os << "   failed: " << c.error << '\n';
      continue;
    }
    os << std::setw(9) << std::setprecision(3) << c.accuracy << std::setw(10) << std::setprecision(2) << c.itr
       << std::setw(10) << std::setprecision(3) << c.mean_time_s << '\n';
  }
  return os.str();
}

} // namespace frdw
