#include "frdw/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace frdw {

namespace {

// 22-lead motor montage; longer layouts fall back to generic names.
constexpr std::array<const char*, 22> kMontage = {"Fz",  "FC3", "FC1", "FCz", "FC2", "FC4", "C5",  "C3",
                                                  "C1",  "Cz",  "C2",  "C4",  "C6",  "CP3", "CP1", "CPz",
                                                  "CP2", "CP4", "P1",  "Pz",  "P2",  "POz"};

constexpr int kBackgroundSources = 6;

struct Vec2 {
  double x, y;
};

// Channels on a rough scalp grid: rows of up to 7 leads, centered.
std::vector<Vec2> channel_positions(Index c) {
  std::vector<Vec2> pos;
  const Index per_row = 7;
  const Index rows = (c + per_row - 1) / per_row;
  for (Index i = 0; i < c; ++i) {
    const Index r = i / per_row;
    const Index in_row = std::min(per_row, c - r * per_row);
    const Index k = i % per_row;
    const double x = in_row > 1 ? -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(in_row - 1) : 0.0;
    const double y = rows > 1 ? 1.0 - 2.0 * static_cast<double>(r) / static_cast<double>(rows - 1) : 0.0;
    pos.push_back({x, y});
  }
  return pos;
}

// Class sources sit left/right over the central strip, further classes on the midline.
Vec2 class_source_position(int k) {
  switch (k) {
    case 0: return {-0.55, 0.05};
    case 1: return {0.55, 0.05};
    case 2: return {0.0, -0.2};
    default: return {0.0, 0.6};
  }
}

struct Oscillator {
  double a1, a2, gain;
};

// AR(2) resonator with poles at r exp(+-i w), scaled to unit stationary variance.
Oscillator make_oscillator(double f0, double r, double fs) {
  const double w = 2.0 * std::numbers::pi * f0 / fs;
  const double a1 = 2.0 * r * std::cos(w);
  const double a2 = -r * r;
  const double var = (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2) * (1.0 - a2) - a1 * a1));
  return {a1, a2, 1.0 / std::sqrt(var)};
}

class SubjectModel {
public:
  SubjectModel(const SyntheticSpec& spec, std::mt19937_64& rng) : spec_(spec) {
    std::normal_distribution<double> jitter(0.0, 0.12);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto pos = channel_positions(spec.n_channels);
    const int n_src = spec.n_classes + kBackgroundSources;
    mixing_.resize(spec.n_channels, n_src);
    const double width = 0.45 * (1.0 + 0.2 * jitter(rng));
    for (int s = 0; s < n_src; ++s) {
      Vec2 q;
      if (s < spec.n_classes) {
        const Vec2 base = class_source_position(s);
        q = {base.x + jitter(rng), base.y + jitter(rng)};
      } else {
        q = {-1.0 + 2.0 * unit(rng), -1.0 + 2.0 * unit(rng)};
      }
      const double g = 0.7 + 0.6 * unit(rng);
      for (Index i = 0; i < spec.n_channels; ++i) {
        const double dx = pos[static_cast<std::size_t>(i)].x - q.x;
        const double dy = pos[static_cast<std::size_t>(i)].y - q.y;
        mixing_(i, s) = g * std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
      }
    }
    // Per-channel gain differences (electrode impedance) shift the subject covariance.
    for (Index i = 0; i < spec.n_channels; ++i) mixing_.row(i) *= 0.6 + 0.8 * unit(rng);
    for (int s = 0; s < n_src; ++s) {
      if (s < spec.n_classes) {
        osc_.push_back(make_oscillator(10.0 + 2.0 * unit(rng), 0.97, spec.fs));
      } else if (s % 2 == 0) {
        osc_.push_back(make_oscillator(6.0 + 20.0 * unit(rng), 0.9, spec.fs));
      } else {
        osc_.push_back({0.95, 0.0, std::sqrt(1.0 - 0.95 * 0.95)});  // AR(1) broadband
      }
    }
  }

  Trial trial(int label, std::mt19937_64& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index n = spec_.n_samples;
    const Index burn = 200;
    const int n_src = static_cast<int>(osc_.size());
    Matrix src(n_src, n);
    for (int s = 0; s < n_src; ++s) {
      const Oscillator& o = osc_[static_cast<std::size_t>(s)];
      double y1 = 0.0, y2 = 0.0;
      double amp = std::exp(spec_.trial_jitter * normal(rng));
      if (s < spec_.n_classes && s == label) amp *= spec_.erd;
      for (Index t = -burn; t < n; ++t) {
        const double y = o.a1 * y1 + o.a2 * y2 + normal(rng);
        y2 = y1;
        y1 = y;
        if (t >= 0) src(s, t) = amp * o.gain * y;
      }
    }
    Matrix x = mixing_ * src;
    for (Index i = 0; i < x.rows(); ++i) {
      const double offset = spec_.drift * normal(rng);
      const double slope = spec_.drift * normal(rng) / static_cast<double>(n);
      for (Index t = 0; t < n; ++t) {
        x(i, t) += spec_.sensor_noise * normal(rng) + offset + slope * static_cast<double>(t);
      }
    }
    Trial out;
    out.data = std::move(x);
    out.fs = spec_.fs;
    out.label = label;
    return out;
  }

private:
  const SyntheticSpec& spec_;
  Matrix mixing_;
  std::vector<Oscillator> osc_;
};

std::vector<int> shuffled_labels(int n_classes, int per_class, std::mt19937_64& rng) {
  std::vector<int> labels;
  for (int k = 0; k < n_classes; ++k) labels.insert(labels.end(), static_cast<std::size_t>(per_class), k);
  // Fisher-Yates with the raw engine so the order does not depend on the library's distributions.
  for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[rng() % i]);
  return labels;
}

} // namespace

void SyntheticSpec::validate() const {
  if (n_subjects < 1) throw ConfigError("synthetic: need at least one subject");
  if (n_channels < 2) throw ConfigError("synthetic: need at least two channels");
  if (n_classes < 2 || n_classes > 4) throw ConfigError("synthetic: class count must lie in [2, 4]");
  if (!(fs > 0.0)) throw ConfigError("synthetic: fs must be positive");
  if (n_samples < 1) throw ConfigError("synthetic: n_samples must be positive");
  if (train_per_class < 1 || test_per_class < 1) throw ConfigError("synthetic: need trials in both splits");
  if (!(erd > 0.0)) throw ConfigError("synthetic: erd must be positive");
  if (!(trial_jitter >= 0.0)) throw ConfigError("synthetic: trial_jitter must be >= 0");
  if (!(sensor_noise >= 0.0) || !(drift >= 0.0)) throw ConfigError("synthetic: noise levels must be >= 0");
}

DatasetBundle make_synthetic_bundle(const SyntheticSpec& spec) {
  spec.validate();
  DatasetBundle b;
  b.n_classes = spec.n_classes;
  b.fs = spec.fs;
  for (Index i = 0; i < spec.n_channels; ++i) {
    b.channel_names.push_back(spec.n_channels == static_cast<Index>(kMontage.size())
                                  ? std::string(kMontage[static_cast<std::size_t>(i)])
                                  : "ch" + std::to_string(i + 1));
  }
  b.notes = "synthetic seed=" + std::to_string(spec.seed);
  for (int s = 0; s < spec.n_subjects; ++s) {
    // Independent stream per subject so subsets of subjects reproduce the same data.
    std::mt19937_64 rng(spec.seed * 1000003ULL + static_cast<std::uint64_t>(s) + 1);
    SubjectModel model(spec, rng);
    SubjectData subj;
    subj.id = "S" + std::to_string(s + 1);
    for (int label : shuffled_labels(spec.n_classes, spec.train_per_class, rng)) {
      subj.train_trials.push_back(model.trial(label, rng));
    }
    for (int label : shuffled_labels(spec.n_classes, spec.test_per_class, rng)) {
      subj.test_trials.push_back(model.trial(label, rng));
    }
    b.subjects.push_back(std::move(subj));
  }
  return b;
}

} // namespace frdw
