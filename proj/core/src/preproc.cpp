#include "frdw/preproc.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace frdw {

namespace {

using cplx = std::complex<double>;

std::vector<double> poly_mul(const std::vector<double>& p, const std::vector<double>& q) {
  std::vector<double> r(p.size() + q.size() - 1, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < q.size(); ++j) r[i + j] += p[i] * q[j];
  }
  return r;
}

cplx bilinear(cplx s, double fs2) { return (fs2 + s) / (fs2 - s); }

Biquad conjugate_pair_section(cplx z) {
  Biquad q;
  q.b = {1.0, 0.0, -1.0};
  q.a = {1.0, -2.0 * z.real(), std::norm(z)};
  return q;
}

// Runs every channel of x through the cascade, updating the delay lines in place.
void run_cascade(const FilterCoeffs& coeffs, FilterState& state, const Matrix& x, Matrix& y) {
  const std::size_t n_sec = coeffs.sections.size();
  for (Index c = 0; c < x.rows(); ++c) {
    double* z = state.channel(c);
    for (Index s = 0; s < x.cols(); ++s) {
      double v = x(c, s);
      for (std::size_t k = 0; k < n_sec; ++k) {
        const Biquad& q = coeffs.sections[k];
        double& z1 = z[2 * k];
        double& z2 = z[2 * k + 1];
        const double out = q.b[0] * v + z1;
        z1 = q.b[1] * v - q.a[1] * out + z2;
        z2 = q.b[2] * v - q.a[2] * out;
        v = out;
      }
      y(c, s) = v;
    }
  }
}

// Delay-line values that make the cascade output constant for a unit step input.
std::vector<double> steady_state(const FilterCoeffs& coeffs) {
  std::vector<double> zi(coeffs.sections.size() * 2, 0.0);
  double scale = 1.0;
  for (std::size_t k = 0; k < coeffs.sections.size(); ++k) {
    const Biquad& q = coeffs.sections[k];
    const double g = (q.b[0] + q.b[1] + q.b[2]) / (q.a[0] + q.a[1] + q.a[2]);
    const double z2 = scale * (q.b[2] - q.a[2] * g);
    const double z1 = scale * (q.b[1] - q.a[1] * g) + z2;
    zi[2 * k] = z1;
    zi[2 * k + 1] = z2;
    scale *= g;
  }
  return zi;
}

void filter_row_with_initial(const FilterCoeffs& coeffs, const std::vector<double>& zi_unit,
                             std::vector<double>& sig) {
  std::vector<double> z(zi_unit.size());
  const double x0 = sig.front();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = zi_unit[i] * x0;
  for (double& v : sig) {
    for (std::size_t k = 0; k < coeffs.sections.size(); ++k) {
      const Biquad& q = coeffs.sections[k];
      const double out = q.b[0] * v + z[2 * k];
      z[2 * k] = q.b[1] * v - q.a[1] * out + z[2 * k + 1];
      z[2 * k + 1] = q.b[2] * v - q.a[2] * out;
      v = out;
    }
  }
}

} // namespace

cplx FilterCoeffs::response(double freq_hz) const {
  const double w = 2.0 * std::numbers::pi * freq_hz / fs;
  const cplx zinv = std::polar(1.0, -w);
  cplx h{1.0, 0.0};
  for (const auto& q : sections) {
    const cplx num = q.b[0] + zinv * (q.b[1] + zinv * q.b[2]);
    const cplx den = q.a[0] + zinv * (q.a[1] + zinv * q.a[2]);
    h *= num / den;
  }
  return h;
}

bool FilterCoeffs::stable() const {
  for (const auto& q : sections) {
    // Jury conditions for a monic quadratic.
    if (!(std::abs(q.a[2]) < 1.0 && std::abs(q.a[1]) < 1.0 + q.a[2])) return false;
  }
  return true;
}

FilterState::FilterState(const FilterCoeffs& coeffs, Index channels)
    : channels_(channels), sections_(coeffs.sections.size()),
      z_(static_cast<std::size_t>(channels) * coeffs.sections.size() * 2, 0.0) {}

void FilterState::reset() { std::fill(z_.begin(), z_.end(), 0.0); }

Matrix detrend(const Matrix& x) {
  const Index n = x.cols();
  Matrix out(x.rows(), n);
  const double center = 0.5 * static_cast<double>(n - 1);
  double stt = 0.0;
  for (Index s = 0; s < n; ++s) {
    const double t = static_cast<double>(s) - center;
    stt += t * t;
  }
  for (Index c = 0; c < x.rows(); ++c) {
    double mean = 0.0;
    double sty = 0.0;
    for (Index s = 0; s < n; ++s) {
      mean += x(c, s);
      sty += (static_cast<double>(s) - center) * x(c, s);
    }
    mean /= static_cast<double>(n);
    const double slope = stt > 0.0 ? sty / stt : 0.0;
    for (Index s = 0; s < n; ++s) {
      out(c, s) = x(c, s) - mean - slope * (static_cast<double>(s) - center);
    }
  }
  return out;
}

Trial detrend(const Trial& trial) {
  Trial out = trial;
  out.data = detrend(trial.data);
  return out;
}

FilterCoeffs design_bandpass(int order, double low_hz, double high_hz, double fs) {
  if (order < 1) throw ConfigError("design_bandpass: order must be >= 1");
  if (!(fs > 0.0)) throw ConfigError("design_bandpass: fs must be positive");
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0)) {
    throw ConfigError("design_bandpass: band edges must satisfy 0 < low < high < fs/2 (got " +
                      std::to_string(low_hz) + ", " + std::to_string(high_hz) + " at fs " + std::to_string(fs) + ")");
  }
  const double fs2 = 2.0 * fs;
  const double w1 = fs2 * std::tan(std::numbers::pi * low_hz / fs);
  const double w2 = fs2 * std::tan(std::numbers::pi * high_hz / fs);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  FilterCoeffs f;
  f.fs = fs;
  f.low_hz = low_hz;
  f.high_hz = high_hz;
  f.order = order;

  auto bandpass_roots = [&](cplx p) {
    const cplx half = p * bw / 2.0;
    const cplx disc = std::sqrt(half * half - w0 * w0);
    return std::pair<cplx, cplx>{half + disc, half - disc};
  };

  for (int k = 0; 2 * k + 1 <= order; ++k) {
    if (2 * k + 1 == order) {
      // Real prototype pole at -1 maps to one section.
      const auto [s1, s2] = bandpass_roots(cplx{-1.0, 0.0});
      const cplx z1 = bilinear(s1, fs2);
      const cplx z2 = bilinear(s2, fs2);
      Biquad q;
      q.b = {1.0, 0.0, -1.0};
      q.a = {1.0, -(z1 + z2).real(), (z1 * z2).real()};
      f.sections.push_back(q);
    } else {
      const double theta = std::numbers::pi * static_cast<double>(2 * k + order + 1) / (2.0 * order);
      const auto [s1, s2] = bandpass_roots(std::polar(1.0, theta));
      f.sections.push_back(conjugate_pair_section(bilinear(s1, fs2)));
      f.sections.push_back(conjugate_pair_section(bilinear(s2, fs2)));
    }
  }

  // The analog response is exactly 1 at w0, which the bilinear map sends to f_center.
  const double f_center = fs / std::numbers::pi * std::atan(w0 / fs2);
  const double gain = 1.0 / std::abs(f.response(f_center));
  const double per_section = std::pow(gain, 1.0 / static_cast<double>(f.sections.size()));
  for (auto& q : f.sections) {
    for (double& v : q.b) v *= per_section;
  }

  f.b = {1.0};
  f.a = {1.0};
  for (const auto& q : f.sections) {
    f.b = poly_mul(f.b, {q.b.begin(), q.b.end()});
    f.a = poly_mul(f.a, {q.a.begin(), q.a.end()});
  }
  if (!f.stable()) throw NumericError("design_bandpass: designed filter is unstable");
  return f;
}

Matrix apply_streaming(const FilterCoeffs& coeffs, FilterState& state, const Matrix& chunk) {
  if (chunk.rows() != state.channels()) {
    throw ConfigError("apply_streaming: chunk has " + std::to_string(chunk.rows()) + " channels, state has " +
                      std::to_string(state.channels()));
  }
  if (state.sections() != coeffs.sections.size()) throw ConfigError("apply_streaming: state built for other coefficients");
  Matrix y(chunk.rows(), chunk.cols());
  run_cascade(coeffs, state, chunk, y);
  return y;
}

Matrix apply_offline(const FilterCoeffs& coeffs, const Matrix& x, FilterMode mode) {
  if (mode == FilterMode::causal) {
    FilterState state(coeffs, x.rows());
    return apply_streaming(coeffs, state, x);
  }
  const Index pad = static_cast<Index>(3 * coeffs.coefficient_count());
  const Index n = x.cols();
  if (n <= pad) {
    throw DataError("apply_offline: zero-phase filtering needs more than " + std::to_string(pad) +
                    " samples, trial has " + std::to_string(n));
  }
  const std::vector<double> zi = steady_state(coeffs);
  Matrix out(x.rows(), n);
  std::vector<double> ext(static_cast<std::size_t>(n + 2 * pad));
  for (Index c = 0; c < x.rows(); ++c) {
    const double first = x(c, 0);
    const double last = x(c, n - 1);
    for (Index i = 0; i < pad; ++i) ext[static_cast<std::size_t>(i)] = 2.0 * first - x(c, pad - i);
    for (Index s = 0; s < n; ++s) ext[static_cast<std::size_t>(pad + s)] = x(c, s);
    for (Index i = 0; i < pad; ++i) ext[static_cast<std::size_t>(pad + n + i)] = 2.0 * last - x(c, n - 2 - i);

    filter_row_with_initial(coeffs, zi, ext);
    std::reverse(ext.begin(), ext.end());
    filter_row_with_initial(coeffs, zi, ext);
    std::reverse(ext.begin(), ext.end());
    for (Index s = 0; s < n; ++s) out(c, s) = ext[static_cast<std::size_t>(pad + s)];
  }
  return out;
}

Trial apply_offline(const FilterCoeffs& coeffs, const Trial& trial, FilterMode mode) {
  Trial out = trial;
  out.data = apply_offline(coeffs, trial.data, mode);
  return out;
}

} // namespace frdw
