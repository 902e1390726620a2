#pragma once

#include "frdw/controller.hpp"

#include <algorithm>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace frdw {

// Information transfer rate in bits/min:
//   (60 / T) (log2 M + P log2 P + (1 - P) log2((1 - P) / (M - 1)))
// with x log x -> 0 at the endpoints, and 0 whenever P < 1 / M.
double itr(double accuracy, int n_classes, double mean_time_s);

struct SessionMetrics {
  double accuracy{0.0};
  double mean_time_s{0.0};
  int n_classes{2};
  double itr{0.0};
  std::size_t n_trials{0};
};

// P = fraction of records whose prediction matches the label, T = mean(samples_used) / fs.
SessionMetrics session_metrics(std::span<const DecisionRecord> records, double fs, int n_classes);

struct TTestResult {
  double t{0.0};
  double p{1.0};  // two-sided
};

// Paired-sample t-test on d = a - b with n - 1 degrees of freedom.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);
// Two-sided tail probability of Student's t with df degrees of freedom.
double student_t_two_sided(double t, double df);

struct Candidate {
  Index n_samples{0};
  double itr{0.0};
};

// argmax validation ITR; ties go to the smallest N.
Index select_hyperparams(std::span<const Candidate> candidates);

struct SweepCell {
  Index l_min{0};
  double tau{0.0};
  std::string scheme;
  double accuracy{0.0};
  double itr{0.0};
  double mean_time_s{0.0};
  bool failed{false};
  std::string error;
};

struct SweepResult {
  std::vector<SweepCell> cells;

  // Header: l_min,tau,scheme,acc,itr,mean_time_s
  std::string to_csv() const;
  std::string to_table() const;
};

// Evaluates one (scheme, minimum length, threshold) cell, typically by replaying every subject.
using SweepEvaluator = std::function<SessionMetrics(const std::string& scheme, Index l_min, double tau)>;

// Full-factorial sweep. A cell whose evaluation throws is marked failed; the sweep goes on.
SweepResult sensitivity_sweep(std::span<const std::string> schemes, std::span<const Index> l_grid,
                              std::span<const double> tau_grid, const SweepEvaluator& evaluate);

// Removes repeated values while keeping first occurrences; returns true if any were dropped.
template <typename T>
bool dedupe_in_place(std::vector<T>& values) {
  std::vector<T> out;
  for (const auto& v : values) {
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  const bool changed = out.size() != values.size();
  values = std::move(out);
  return changed;
}

} // namespace frdw
