#pragma once

#include "frdw/alignment.hpp"
#include "frdw/classifier.hpp"
#include "frdw/preproc.hpp"
#include "frdw/types.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace frdw {

enum class DecodeMode { within, cross };

// Any tau above 1 can never be met, so the controller falls back to the full window.
inline constexpr double kFixedWindowTau = 2.0;

struct FrdwConfig {
  Index n_samples{250};  // N, the training length
  Index chunk{10};       // L', samples per update
  Index min_len{60};     // L-bar, first length that is classified
  double tau{0.7};       // confidence threshold, p >= tau decides
  int n_ea{10};          // warm-up trials before alignment (cross mode)
  DecodeMode mode{DecodeMode::within};

  void validate() const;
  bool fixed_window() const { return tau > 1.0; }

  // Minimum length and threshold used for each setting in the reference experiments:
  // within (binary 60/0.7, 4-class 60/0.6), cross (binary 60/0.6, 4-class 50/0.4).
  static FrdwConfig table_defaults(DecodeMode mode, int n_classes, Index n_samples);
};

// The classifier f: maps a channels x N window (already filtered, and aligned where
// applicable) to class probabilities. Deep models plug in here.
class TrialClassifier {
public:
  virtual ~TrialClassifier() = default;
  virtual Prediction classify(const Matrix& window) const = 0;
};

// Causal per-chunk processing applied before samples enter the buffer.
struct StreamFrontEnd {
  const FilterCoeffs* filter{nullptr};  // null: samples pass through unfiltered
  const Matrix* alignment{nullptr};     // R^{-1/2}; null: no alignment
};

// Column j of the output is column (j mod L) of the input, for j in [0, n).
Matrix front_end_replicate(const Matrix& partial, Index n);

struct DecisionRecord {
  int trial{0};
  std::optional<int> label;
  int pred{0};
  double p{0.0};
  Index samples_used{0};
  double decision_time_s{0.0};
  std::vector<double> update_ms;  // one entry per classify call
  bool used_ea{false};
};

// One trial arriving chunk by chunk through the dynamic-window loop.
class TrialStream {
public:
  struct NeedMore {};
  struct Decision {
    int cls{0};
    double p{0.0};
    Index samples_used{0};
  };
  using StepResult = std::variant<NeedMore, Decision>;

  // full_window_only skips the early-decision region (warm-up trials).
  TrialStream(const FrdwConfig& config, const TrialClassifier& classifier, StreamFrontEnd front_end,
              Index channels, bool full_window_only = false);

  StepResult step(const Matrix& chunk);

  bool decided() const { return decided_; }
  Index received() const { return received_; }
  // Filtered (and aligned) samples received so far.
  auto buffer() const { return buffer_.leftCols(received_); }
  const std::vector<double>& update_ms() const { return update_ms_; }

private:
  FrdwConfig config_;
  const TrialClassifier& classifier_;
  StreamFrontEnd front_end_;
  std::optional<FilterState> filter_state_;
  bool full_window_only_;
  Matrix buffer_;
  Index received_{0};
  bool decided_{false};
  std::vector<double> update_ms_;
};

// Called before each chunk is handed to the controller (realtime pacing hook).
using ChunkHook = std::function<void()>;

// Drives one trial to a decision. Throws DataError if the chunks run out first.
DecisionRecord run_trial_within(std::span<const Matrix> chunks, const FrdwConfig& config,
                                const TrialClassifier& classifier, StreamFrontEnd front_end, double fs,
                                int trial_index = 0, std::optional<int> label = std::nullopt,
                                const ChunkHook& before_chunk = {});

struct ChunkedTrial {
  std::vector<Matrix> chunks;
  std::optional<int> label;
  double fs{250.0};
};

struct CrossSessionResult {
  std::vector<DecisionRecord> records;
  bool reference_ready{false};
  std::vector<std::string> warnings;
};

// Trials 1..n_EA are decided on the full window by no_ea while their filtered windows
// are accumulated into ea_state; the reference is then frozen and every later trial is
// aligned chunk by chunk and decided by the dynamic-window loop with `ea`.
// n_EA = 0 disables alignment entirely.
CrossSessionResult run_session_cross(std::span<const ChunkedTrial> trials, const FrdwConfig& config,
                                     const TrialClassifier& no_ea, const TrialClassifier& ea,
                                     const FilterCoeffs* filter, EaState& ea_state,
                                     const ChunkHook& before_chunk = {});

std::string to_string(DecodeMode m);
DecodeMode decode_mode_from_string(const std::string& s);

} // namespace frdw
