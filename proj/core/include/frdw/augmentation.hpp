#pragma once

#include "frdw/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace frdw {

enum class AugmentScheme { none, overlap, fr };

struct AugmentSpec {
  AugmentScheme scheme{AugmentScheme::none};
  Index target_len{250};  // N
  Index stride{25};
  Index fr_window{0};     // 0 means ceil(0.7 * N)

  Index effective_fr_window() const;
  void validate() const;
};

// First n samples of every channel.
Trial crop_to_length(const Trial& trial, Index n);

// Length-N windows starting at 0, stride, 2 * stride, ... while they fit.
std::vector<Trial> augment_overlap(const Trial& trial, const AugmentSpec& spec);

// Length fr_window windows on the same stride grid, each front-end replicated to N.
std::vector<Trial> augment_fr(const Trial& trial, const AugmentSpec& spec);

// Dispatches on spec.scheme. `none` yields non-overlapping length-N windows.
std::vector<Trial> augment(const Trial& trial, const AugmentSpec& spec);
std::vector<Trial> augment_all(std::span<const Trial> trials, const AugmentSpec& spec);

// floor((len - window) / stride) + 1, or 0 when the window does not fit.
Index window_count(Index len, Index window, Index stride);

std::string to_string(AugmentScheme s);
AugmentScheme augment_scheme_from_string(const std::string& s);

} // namespace frdw
