#include "frdw/augmentation.hpp"

#include "frdw/controller.hpp"

#include <cmath>

namespace frdw {

Index AugmentSpec::effective_fr_window() const {
  if (fr_window > 0) return fr_window;
  return static_cast<Index>(std::ceil(0.7 * static_cast<double>(target_len) - 1e-9));
}

void AugmentSpec::validate() const {
  if (target_len < 1) throw ConfigError("AugmentSpec: target length must be >= 1");
  if (stride < 1 || stride > target_len) throw ConfigError("AugmentSpec: stride must lie in [1, N]");
  if (scheme == AugmentScheme::fr) {
    const Index w = effective_fr_window();
    if (w > target_len) throw ConfigError("AugmentSpec: fr_window exceeds N");
    if (w < stride) throw ConfigError("AugmentSpec: fr_window must be >= stride");
  }
}

Index window_count(Index len, Index window, Index stride) {
  if (window > len) return 0;
  return (len - window) / stride + 1;
}

Trial crop_to_length(const Trial& trial, Index n) {
  if (n < 1) throw ConfigError("crop_to_length: N must be >= 1");
  if (trial.samples() < n) {
    throw DataError("crop_to_length: trial has " + std::to_string(trial.samples()) + " samples, N = " +
                    std::to_string(n));
  }
  Trial out;
  out.fs = trial.fs;
  out.label = trial.label;
  out.data = trial.data.leftCols(n);
  return out;
}

namespace {

std::vector<Trial> slide(const Trial& trial, Index window, Index stride) {
  std::vector<Trial> out;
  const Index count = window_count(trial.samples(), window, stride);
  out.reserve(static_cast<std::size_t>(count));
  for (Index w = 0; w < count; ++w) {
    Trial t;
    t.fs = trial.fs;
    t.label = trial.label;
    t.data = trial.data.middleCols(w * stride, window);
    out.push_back(std::move(t));
  }
  return out;
}

} // namespace

std::vector<Trial> augment_overlap(const Trial& trial, const AugmentSpec& spec) {
  spec.validate();
  if (trial.samples() < spec.target_len) {
    throw DataError("augment_overlap: trial shorter than N");
  }
  return slide(trial, spec.target_len, spec.stride);
}

std::vector<Trial> augment_fr(const Trial& trial, const AugmentSpec& spec) {
  spec.validate();
  const Index w = spec.effective_fr_window();
  if (trial.samples() < w) throw DataError("augment_fr: trial shorter than the FR window");
  std::vector<Trial> out = slide(trial, w, spec.stride);
  for (auto& t : out) t.data = front_end_replicate(t.data, spec.target_len);
  return out;
}

std::vector<Trial> augment(const Trial& trial, const AugmentSpec& spec) {
  switch (spec.scheme) {
    case AugmentScheme::overlap:
      return augment_overlap(trial, spec);
    case AugmentScheme::fr:
      return augment_fr(trial, spec);
    case AugmentScheme::none:
      break;
  }
  spec.validate();
  if (trial.samples() < spec.target_len) throw DataError("augment: trial shorter than N");
  return slide(trial, spec.target_len, spec.target_len);
}

std::vector<Trial> augment_all(std::span<const Trial> trials, const AugmentSpec& spec) {
  std::vector<Trial> out;
  for (const auto& t : trials) {
    auto w = augment(t, spec);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

std::string to_string(AugmentScheme s) {
  switch (s) {
    case AugmentScheme::none: return "none";
    case AugmentScheme::overlap: return "overlap";
    case AugmentScheme::fr: return "fr";
  }
  return "none";
}

AugmentScheme augment_scheme_from_string(const std::string& s) {
  if (s == "none") return AugmentScheme::none;
  if (s == "overlap") return AugmentScheme::overlap;
  if (s == "fr") return AugmentScheme::fr;
  throw ConfigError("unknown augmentation scheme '" + s + "' (expected none|overlap|fr)");
}

} // namespace frdw
