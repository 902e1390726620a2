#pragma once

#include "frdw/bundle.hpp"
#include "frdw/controller.hpp"

#include <chrono>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace frdw {

enum class ClockMode { simulated, realtime };

struct ReplayPlan {
  ClockMode clock{ClockMode::simulated};
  Index chunk{10};        // L'
  double tick_ms{40.0};   // one chunk per tick
  std::uint64_t seed{0};
  std::size_t max_trials{0};  // 0 = every test trial

  // L' / fs must equal the tick (10 / 250 Hz = 40 ms).
  void validate(double fs) const;
};

// Splits the first floor(len / L') * L' samples into consecutive C x L' chunks.
std::vector<Matrix> make_stream(const Matrix& data, Index chunk);

struct LatencySummary {
  std::size_t count{0};
  double mean_ms{0.0};
  double std_ms{0.0};  // population standard deviation
  double max_ms{0.0};
  std::size_t overruns{0};
};

struct LatencyStats {
  LatencySummary all;
  std::map<std::string, LatencySummary> per_model;
};

LatencySummary summarize_latency(std::span<const double> update_ms, double deadline_ms);

// Classifiers and filter used for one subject's replay. In within mode only `primary` is
// used; cross mode uses `primary` for warm-up and `ea` afterwards.
struct ReplayModels {
  const TrialClassifier* primary{nullptr};
  const TrialClassifier* ea{nullptr};
  const FilterCoeffs* filter{nullptr};
  std::string primary_name{"primary"};
  std::string ea_name{"ea"};
};

struct ReplayResult {
  std::vector<DecisionRecord> records;
  LatencyStats latency;
  std::vector<std::string> warnings;
};

// Streams every test trial of the subject in arrival order. Within mode runs the
// dynamic-window loop per trial; cross mode runs the warm-up/alignment session.
// Realtime clock waits for each tick and flags updates slower than tick_ms.
ReplayResult replay_subject(const ReplayPlan& plan, const SubjectData& subject, const FrdwConfig& config,
                            const ReplayModels& models);

// Classifier wrapper that sleeps before delegating; used to force deadline overruns.
class DelayedClassifier : public TrialClassifier {
public:
  DelayedClassifier(const TrialClassifier& inner, std::chrono::microseconds delay) : inner_(inner), delay_(delay) {}
  Prediction classify(const Matrix& window) const override;

private:
  const TrialClassifier& inner_;
  std::chrono::microseconds delay_;
};

// One JSON object per line: trial, label, pred, p, samples_used, decision_time_s,
// update_ms, used_ea.
std::string record_to_json_line(const DecisionRecord& record);
DecisionRecord record_from_json_line(const std::string& line);

} // namespace frdw
