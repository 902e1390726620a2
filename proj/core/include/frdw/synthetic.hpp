#pragma once

#include "frdw/bundle.hpp"

#include <cstdint>

namespace frdw {

// Seeded motor-imagery-like recordings. Each class owns one narrowband (mu) source whose
// amplitude drops during that class's trials; background sources, sensor noise and a small
// per-channel drift are mixed in through a subject-specific forward model. Up to 7 channels
// form a single strip over the motor area; larger counts spread over rows of 7.
struct SyntheticSpec {
  int n_subjects{9};
  Index n_channels{22};
  int n_classes{2};
  double fs{250.0};
  Index n_samples{750};
  int train_per_class{36};
  int test_per_class{72};
  double erd{0.3};           // mu amplitude ratio during imagery of the matching class
  double trial_jitter{0.9};  // lognormal std of per-trial source amplitudes
  double sensor_noise{0.5};  // white noise std per channel, relative to unit-variance sources
  double drift{0.05};        // std of per-channel offset and end-to-end linear drift
  std::uint64_t seed{0};

  void validate() const;
};

DatasetBundle make_synthetic_bundle(const SyntheticSpec& spec);

} // namespace frdw
