#pragma once
// Shared fixtures: seeded random data and scripted classifiers.
#include "frdw/controller.hpp"
#include "frdw/types.hpp"
#include "oracles/jacobi.hpp"

#include <Eigen/QR>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace fixture {

using frdw::Index;
using frdw::Matrix;

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Well-conditioned SPD: A A^T / m + 0.1 I.
inline Matrix random_spd(Index n, std::mt19937_64& rng) {
  const Matrix a = random_matrix(n, 2 * n + 3, rng);
  return a * a.transpose() / static_cast<double>(a.cols()) + 0.1 * Matrix::Identity(n, n);
}

// Random rotation times channel gains in [0.5, 2]: full rank with condition number <= 4.
inline Matrix random_mixing(Index n, std::mt19937_64& rng) {
  const Matrix q = random_matrix(n, n, rng).householderQr().householderQ();
  std::uniform_real_distribution<double> gain(0.5, 2.0);
  Matrix m = q;
  for (Index j = 0; j < n; ++j) m.col(j) *= gain(rng);
  return m;
}

inline oracle::Mat to_oracle(const Matrix& m) {
  oracle::Mat r = oracle::zeros(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return r;
}

inline frdw::Trial trial(Matrix data, std::optional<int> label = std::nullopt, double fs = 250.0) {
  frdw::Trial t;
  t.data = std::move(data);
  t.fs = fs;
  t.label = label;
  return t;
}

// Emits the next probability of a fixed script on every classify call; the last value
// repeats once the script runs out.
class ScriptedClassifier : public frdw::TrialClassifier {
public:
  explicit ScriptedClassifier(std::vector<double> script, int cls = 0) : script_(std::move(script)), cls_(cls) {}
  frdw::Prediction classify(const Matrix& window) const override {
    windows.push_back(window.cols());
    const double p = script_[std::min(calls_++, script_.size() - 1)];
    frdw::Prediction pr;
    pr.probs = {p, 1.0 - p};
    pr.cls = cls_;
    pr.p = p;
    return pr;
  }
  std::size_t calls() const { return calls_; }
  mutable std::vector<Index> windows;

private:
  std::vector<double> script_;
  int cls_;
  mutable std::size_t calls_{0};
};

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("frdw_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

} // namespace fixture
