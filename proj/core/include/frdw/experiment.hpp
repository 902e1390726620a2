#pragma once

#include "frdw/bundle.hpp"
#include "frdw/metrics.hpp"
#include "frdw/pipeline.hpp"
#include "frdw/replay.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace frdw {

// fw / frdw decode without alignment; ea_fw / ea_frdw run the cross-subject warm-up session.
enum class Strategy { fw, frdw, ea_fw, ea_frdw };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct ExperimentConfig {
  std::filesystem::path bundle;
  DecodeMode mode{DecodeMode::within};
  PipelineSpec pipeline;  // n_samples is replaced by the selected N
  FrdwConfig frdw;        // n_samples likewise
  std::vector<Index> candidate_n{100, 125, 150, 200, 250, 500, 750};
  SplitPolicy split{LastKPerClass{12}};
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir{"frdw_out"};
  std::filesystem::path pipeline_dir;  // empty: <out_dir>/pipelines
  std::vector<std::string> subjects;   // empty: every subject
  Strategy strategy{Strategy::frdw};
  double tick_ms{40.0};
  std::vector<Index> sweep_l_min{30, 60, 90, 120, 150};
  std::vector<double> sweep_tau{0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<std::string> sweep_schemes{"none"};
  int jobs{1};
  std::size_t bench_max_trials{10};
  double inject_delay_ms{0.0};

  void validate() const;
  std::filesystem::path pipelines() const { return pipeline_dir.empty() ? out_dir / "pipelines" : pipeline_dir; }
  // Seed fallback order: explicit value, then FRDW_SEED, then 0.
  std::uint64_t resolved_seed() const;

  std::string to_json() const;
  // Fields absent from the text keep their values from `base`.
  static ExperimentConfig from_json(const std::string& text, ExperimentConfig base);
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& file, ExperimentConfig base);
  static ExperimentConfig load(const std::filesystem::path& file);
};

// --- library entry points, usable without touching the filesystem -------------------

// Online-path configuration for a pipeline of length N: the minimum length is capped at N.
FrdwConfig frdw_for(const FrdwConfig& base, Index n_samples, double tau);

struct WithinModel {
  Pipeline pipeline;
  std::vector<Candidate> candidates;  // validation ITR per candidate N
};

// Picks N by validation ITR over the candidate grid, then refits on every training trial.
WithinModel train_within_subject(const SubjectData& subject, int n_classes, const ExperimentConfig& cfg);

struct CrossModels {
  Pipeline no_ea;
  Pipeline ea;
  std::vector<Candidate> candidates;  // pooled validation ITR of the EA path
};

// Leave-one-subject-out: every other subject is a source. Models are fitted on the
// sources' training parts and the best-validation pair is kept as is.
CrossModels train_cross_subject(const DatasetBundle& bundle, std::size_t held_out, const ExperimentConfig& cfg);

// Replays one subject's test trials with the given strategy (simulated unless plan says otherwise).
ReplayResult replay_strategy(const SubjectData& subject, Strategy strategy, const ExperimentConfig& cfg,
                             const Pipeline& primary, const Pipeline* ea, ClockMode clock = ClockMode::simulated,
                             std::size_t max_trials = 0, double inject_delay_ms = 0.0);

// --- commands -------------------------------------------------------------------------

struct SubjectOutcome {
  std::string subject;
  SessionMetrics metrics;
  LatencyStats latency;
};

struct TrainReport {
  std::vector<std::filesystem::path> files;
  std::vector<std::pair<std::string, Index>> chosen_n;
};

struct ReplayReport {
  std::vector<SubjectOutcome> subjects;
  std::vector<std::string> warnings;
};

struct BenchReport {
  LatencyStats latency;
  std::vector<double> update_ms;  // every logged update, subject order
  std::vector<std::string> warnings;
};

TrainReport cmd_train(const ExperimentConfig& cfg, const DatasetBundle& bundle, std::ostream& log);
ReplayReport cmd_replay(const ExperimentConfig& cfg, const DatasetBundle& bundle, std::ostream& log);
SweepResult cmd_sweep(const ExperimentConfig& cfg, const DatasetBundle& bundle, std::ostream& log);
BenchReport cmd_bench(const ExperimentConfig& cfg, const DatasetBundle& bundle, std::ostream& log);

// Writes <out_dir>/config.json with the resolved seed; enough to rerun the command.
void write_config_echo(const ExperimentConfig& cfg);

// Re-derives per-subject metrics rows from a replay record log.
SessionMetrics metrics_from_log(const std::filesystem::path& jsonl, double fs, int n_classes);

} // namespace frdw
