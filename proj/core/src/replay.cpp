#include "frdw/replay.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <thread>

namespace frdw {

using nlohmann::json;

void ReplayPlan::validate(double fs) const {
  if (chunk < 1) throw ConfigError("ReplayPlan: chunk must be >= 1");
  if (!(tick_ms > 0.0)) throw ConfigError("ReplayPlan: tick must be positive");
  const double implied = 1000.0 * static_cast<double>(chunk) / fs;
  if (std::abs(implied - tick_ms) > 1e-9 * tick_ms) {
    throw ConfigError("ReplayPlan: chunk of " + std::to_string(chunk) + " samples at " + std::to_string(fs) +
                      " Hz lasts " + std::to_string(implied) + " ms, tick is " + std::to_string(tick_ms) + " ms");
  }
}

std::vector<Matrix> make_stream(const Matrix& data, Index chunk) {
  if (chunk < 1) throw ConfigError("make_stream: chunk must be >= 1");
  std::vector<Matrix> out;
  const Index n = data.cols() / chunk;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out.emplace_back(data.middleCols(i * chunk, chunk));
  return out;
}

LatencySummary summarize_latency(std::span<const double> ms, double deadline_ms) {
  LatencySummary s;
  s.count = ms.size();
  if (ms.empty()) return s;
  double sum = 0.0;
  for (double v : ms) {
    sum += v;
    s.max_ms = std::max(s.max_ms, v);
    if (v > deadline_ms) ++s.overruns;
  }
  s.mean_ms = sum / static_cast<double>(ms.size());
  double ss = 0.0;
  for (double v : ms) ss += (v - s.mean_ms) * (v - s.mean_ms);
  s.std_ms = std::sqrt(ss / static_cast<double>(ms.size()));
  return s;
}

ReplayResult replay_subject(const ReplayPlan& plan, const SubjectData& subject, const FrdwConfig& config,
                            const ReplayModels& models) {
  if (subject.test_trials.empty()) throw DataError("replay_subject: subject " + subject.id + " has no test trials");
  const double fs = subject.test_trials.front().fs;
  plan.validate(fs);
  config.validate();
  if (config.chunk != plan.chunk) throw ConfigError("replay_subject: controller chunk differs from replay chunk");
  if (!models.primary) throw ConfigError("replay_subject: no classifier");
  if (config.mode == DecodeMode::cross && !models.ea) throw ConfigError("replay_subject: cross mode needs an EA classifier");

  std::size_t n_trials = subject.test_trials.size();
  if (plan.max_trials > 0) n_trials = std::min(n_trials, plan.max_trials);

  std::vector<ChunkedTrial> streams;
  streams.reserve(n_trials);
  for (std::size_t i = 0; i < n_trials; ++i) {
    const Trial& t = subject.test_trials[i];
    streams.push_back(ChunkedTrial{make_stream(t.data, plan.chunk), t.label, t.fs});
  }

  ChunkHook pace;
  using clock = std::chrono::steady_clock;
  auto next_tick = clock::now();
  const auto tick = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double, std::milli>(plan.tick_ms));
  if (plan.clock == ClockMode::realtime) {
    pace = [&] {
      next_tick += tick;
      std::this_thread::sleep_until(next_tick);
    };
  }

  ReplayResult out;
  if (config.mode == DecodeMode::within) {
    for (std::size_t i = 0; i < streams.size(); ++i) {
      out.records.push_back(run_trial_within(streams[i].chunks, config, *models.primary,
                                             StreamFrontEnd{models.filter, nullptr}, streams[i].fs,
                                             static_cast<int>(i), streams[i].label, pace));
    }
  } else {
    EaState ea_state(subject.test_trials.front().channels());
    auto session = run_session_cross(streams, config, *models.primary, *models.ea, models.filter, ea_state, pace);
    out.records = std::move(session.records);
    out.warnings = std::move(session.warnings);
  }

  std::vector<double> all;
  std::map<std::string, std::vector<double>> by_model;
  for (const auto& r : out.records) {
    all.insert(all.end(), r.update_ms.begin(), r.update_ms.end());
    auto& bucket = by_model[r.used_ea ? models.ea_name : models.primary_name];
    bucket.insert(bucket.end(), r.update_ms.begin(), r.update_ms.end());
    if (plan.clock == ClockMode::realtime) {
      for (std::size_t u = 0; u < r.update_ms.size(); ++u) {
        if (r.update_ms[u] > plan.tick_ms) {
          out.warnings.push_back("subject " + subject.id + " trial " + std::to_string(r.trial) + " update " +
                                 std::to_string(u) + " took " + std::to_string(r.update_ms[u]) + " ms (budget " +
                                 std::to_string(plan.tick_ms) + " ms)");
        }
      }
    }
  }
  out.latency.all = summarize_latency(all, plan.tick_ms);
  for (const auto& [name, v] : by_model) out.latency.per_model[name] = summarize_latency(v, plan.tick_ms);
  return out;
}

Prediction DelayedClassifier::classify(const Matrix& window) const {
  std::this_thread::sleep_for(delay_);
  return inner_.classify(window);
}

std::string record_to_json_line(const DecisionRecord& r) {
  json j{{"trial", r.trial},
         {"label", r.label ? json(*r.label) : json(nullptr)},
         {"pred", r.pred},
         {"p", r.p},
         {"samples_used", r.samples_used},
         {"decision_time_s", r.decision_time_s},
         {"update_ms", r.update_ms},
         {"used_ea", r.used_ea}};
  return j.dump();
}

DecisionRecord record_from_json_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    DecisionRecord r;
    r.trial = j.at("trial").get<int>();
    if (!j.at("label").is_null()) r.label = j.at("label").get<int>();
    r.pred = j.at("pred").get<int>();
    r.p = j.at("p").get<double>();
    r.samples_used = j.at("samples_used").get<Index>();
    r.decision_time_s = j.at("decision_time_s").get<double>();
    r.update_ms = j.at("update_ms").get<std::vector<double>>();
    r.used_ea = j.at("used_ea").get<bool>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("record log: ") + e.what());
  }
}

} // namespace frdw
