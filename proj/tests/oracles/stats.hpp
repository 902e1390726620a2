#pragma once
// High-precision references: ITR in 50-digit binary floating point, Student-t tails from
// Boost.Math, and a two-parameter least-squares line fit.
#include <boost/math/distributions/students_t.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <vector>

namespace oracle {

using big = boost::multiprecision::cpp_bin_float_50;

inline double itr(double p_in, int m_in, double t_in) {
  const big p = p_in, m = m_in, t = t_in;
  if (p < 1 / m) return 0.0;
  auto xlog2x = [](const big& x) { return x > 0 ? big(x * log(x) / log(big(2))) : big(0); };
  const big q = 1 - p;
  big bits = log(m) / log(big(2)) + xlog2x(p) + xlog2x(q) - q * log(m - 1) / log(big(2));
  return static_cast<double>(60 / t * bits);
}

struct TTest {
  double t, p;
};

inline TTest paired_t(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  big mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += big(a[i]) - big(b[i]);
  mean /= n;
  big ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const big d = big(a[i]) - big(b[i]) - mean;
    ss += d * d;
  }
  const big sd = sqrt(ss / (n - 1));
  const double t = static_cast<double>(mean / (sd / sqrt(big(n))));
  boost::math::students_t dist(static_cast<double>(n - 1));
  return {t, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)))};
}

// Residual of y after removing its least-squares line over t = 0..n-1 (normal equations).
inline std::vector<long double> detrend(const std::vector<double>& y) {
  const std::size_t n = y.size();
  long double st = 0, stt = 0, sy = 0, sty = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double t = static_cast<long double>(i);
    st += t;
    stt += t * t;
    sy += y[i];
    sty += t * y[i];
  }
  const long double det = n * stt - st * st;
  long double slope = 0, icpt = sy / n;
  if (det != 0) {
    slope = (n * sty - st * sy) / det;
    icpt = (sy - slope * st) / n;
  }
  std::vector<long double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - (icpt + slope * static_cast<long double>(i));
  return r;
}

} // namespace oracle
