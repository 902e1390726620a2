#pragma once

#include "frdw/types.hpp"

#include <algorithm>
#include <array>
#include <complex>
#include <vector>

namespace frdw {

// One second-order section, transposed direct form II. a[0] is always 1.
struct Biquad {
  std::array<double, 3> b{1.0, 0.0, 0.0};
  std::array<double, 3> a{1.0, 0.0, 0.0};
};

struct FilterCoeffs {
  std::vector<Biquad> sections;   // what actually runs
  std::vector<double> b;          // equivalent transfer function numerator
  std::vector<double> a;          // equivalent transfer function denominator, a[0] == 1
  double fs{0.0};
  double low_hz{0.0};
  double high_hz{0.0};
  int order{0};

  std::size_t coefficient_count() const { return std::max(b.size(), a.size()); }
  // H(e^{j 2 pi f / fs}) evaluated section by section.
  std::complex<double> response(double freq_hz) const;
  bool stable() const;
};

// Per-channel delay lines, two values per section.
class FilterState {
public:
  FilterState() = default;
  FilterState(const FilterCoeffs& coeffs, Index channels);

  Index channels() const { return channels_; }
  std::size_t sections() const { return sections_; }
  void reset();

  double* channel(Index c) { return z_.data() + static_cast<std::size_t>(c) * sections_ * 2; }

private:
  Index channels_{0};
  std::size_t sections_{0};
  std::vector<double> z_;
};

// Subtracts each channel's least-squares straight line.
Matrix detrend(const Matrix& x);
Trial detrend(const Trial& trial);

// Digital Butterworth bandpass: analog prototype, lowpass-to-bandpass transform and
// bilinear transform with pre-warped band edges. Requires 0 < low < high < fs/2.
FilterCoeffs design_bandpass(int order, double low_hz, double high_hz, double fs);

enum class FilterMode { causal, zero_phase };

// causal: one forward pass from zero state.
// zero_phase: forward-backward pass with odd extension of 3 * coefficient_count samples
// at each end and steady-state initial conditions.
Matrix apply_offline(const FilterCoeffs& coeffs, const Matrix& x, FilterMode mode);
Trial apply_offline(const FilterCoeffs& coeffs, const Trial& trial, FilterMode mode);

// Filters one chunk and advances state. Streaming all chunks of a signal from a fresh
// state gives exactly the causal offline output.
Matrix apply_streaming(const FilterCoeffs& coeffs, FilterState& state, const Matrix& chunk);

} // namespace frdw
