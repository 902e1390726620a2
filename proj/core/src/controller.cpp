#include "frdw/controller.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace frdw {

void FrdwConfig::validate() const {
  if (n_samples < 1) throw ConfigError("FrdwConfig: N must be >= 1");
  if (chunk < 1) throw ConfigError("FrdwConfig: chunk L' must be >= 1");
  if (min_len < 1 || min_len > n_samples) throw ConfigError("FrdwConfig: minimum length must lie in [1, N]");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("FrdwConfig: tau must be a finite value >= 0");
  if (n_ea < 0) throw ConfigError("FrdwConfig: n_EA must be >= 0");
  if (mode == DecodeMode::cross && n_ea < 1) throw ConfigError("FrdwConfig: cross mode needs n_EA >= 1");
}

FrdwConfig FrdwConfig::table_defaults(DecodeMode mode, int n_classes, Index n_samples) {
  FrdwConfig c;
  c.mode = mode;
  c.n_samples = n_samples;
  const bool binary = n_classes <= 2;
  if (mode == DecodeMode::within) {
    c.min_len = 60;
    c.tau = binary ? 0.7 : 0.6;
  } else {
    c.min_len = binary ? 60 : 50;
    c.tau = binary ? 0.6 : 0.4;
  }
  c.min_len = std::min(c.min_len, n_samples);
  return c;
}

Matrix front_end_replicate(const Matrix& partial, Index n) {
  const Index l = partial.cols();
  if (l < 1) throw ConfigError("front_end_replicate: empty input");
  if (l > n) throw ConfigError("front_end_replicate: input longer than N");
  Matrix out(partial.rows(), n);
  for (Index start = 0; start < n; start += l) {
    const Index len = std::min(l, n - start);
    out.middleCols(start, len) = partial.leftCols(len);
  }
  return out;
}

TrialStream::TrialStream(const FrdwConfig& config, const TrialClassifier& classifier, StreamFrontEnd front_end,
                         Index channels, bool full_window_only)
    : config_(config), classifier_(classifier), front_end_(front_end), full_window_only_(full_window_only),
      buffer_(channels, config.n_samples + config.chunk) {
  config_.validate();
  if (front_end_.filter) filter_state_.emplace(*front_end_.filter, channels);
  if (front_end_.alignment && front_end_.alignment->cols() != channels) {
    throw ConfigError("TrialStream: alignment matrix does not match channel count");
  }
}

TrialStream::StepResult TrialStream::step(const Matrix& chunk) {
  using clock = std::chrono::steady_clock;
  if (decided_) throw ConfigError("TrialStream::step: trial already decided");
  if (chunk.rows() != buffer_.rows() || chunk.cols() != config_.chunk) {
    throw DataError("TrialStream::step: malformed chunk " + std::to_string(chunk.rows()) + "x" +
                    std::to_string(chunk.cols()) + ", expected " + std::to_string(buffer_.rows()) + "x" +
                    std::to_string(config_.chunk));
  }
  const auto t0 = clock::now();

  Matrix processed = front_end_.filter ? apply_streaming(*front_end_.filter, *filter_state_, chunk) : chunk;
  if (front_end_.alignment) processed = align(processed, *front_end_.alignment);
  buffer_.middleCols(received_, config_.chunk) = processed;
  received_ += config_.chunk;

  const Index n = config_.n_samples;
  const Index l = received_;
  auto finish = [&](const Prediction& pred, Index used) -> StepResult {
    update_ms_.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
    return Decision{pred.cls, pred.p, used};
  };

  if (l >= n) {
    const Prediction pred = classifier_.classify(buffer_.leftCols(n));
    decided_ = true;
    return finish(pred, n);
  }
  if (full_window_only_ || l < config_.min_len) return NeedMore{};

  const Prediction pred = classifier_.classify(front_end_replicate(buffer_.leftCols(l), n));
  if (pred.p >= config_.tau) {
    decided_ = true;
    return finish(pred, l);
  }
  update_ms_.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
  return NeedMore{};
}

DecisionRecord run_trial_within(std::span<const Matrix> chunks, const FrdwConfig& config,
                                const TrialClassifier& classifier, StreamFrontEnd front_end, double fs,
                                int trial_index, std::optional<int> label, const ChunkHook& before_chunk) {
  if (chunks.empty()) throw DataError("run_trial_within: empty stream");
  TrialStream stream(config, classifier, front_end, chunks.front().rows());
  for (const auto& chunk : chunks) {
    if (before_chunk) before_chunk();
    const auto r = stream.step(chunk);
    if (const auto* d = std::get_if<TrialStream::Decision>(&r)) {
      DecisionRecord rec;
      rec.trial = trial_index;
      rec.label = label;
      rec.pred = d->cls;
      rec.p = d->p;
      rec.samples_used = d->samples_used;
      rec.decision_time_s = static_cast<double>(d->samples_used) / fs;
      rec.update_ms = stream.update_ms();
      rec.used_ea = front_end.alignment != nullptr;
      return rec;
    }
  }
  throw DataError("run_trial_within: stream ended after " + std::to_string(stream.received()) +
                  " samples, before N = " + std::to_string(config.n_samples));
}

CrossSessionResult run_session_cross(std::span<const ChunkedTrial> trials, const FrdwConfig& config,
                                     const TrialClassifier& no_ea, const TrialClassifier& ea,
                                     const FilterCoeffs* filter, EaState& ea_state, const ChunkHook& before_chunk) {
  CrossSessionResult out;
  const auto n_ea = static_cast<std::size_t>(std::max(config.n_ea, 0));
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const ChunkedTrial& t = trials[i];
    if (t.chunks.empty()) throw DataError("run_session_cross: trial " + std::to_string(i) + " has no chunks");
    const int index = static_cast<int>(i);

    if (n_ea == 0) {
      out.records.push_back(run_trial_within(t.chunks, config, ea, StreamFrontEnd{filter, nullptr}, t.fs, index, t.label,
                                             before_chunk));
      continue;
    }
    if (i < n_ea) {
      // Warm-up: full window, no alignment, window covariance kept for the reference.
      TrialStream stream(config, no_ea, StreamFrontEnd{filter, nullptr}, t.chunks.front().rows(), true);
      std::optional<TrialStream::Decision> decision;
      for (const auto& chunk : t.chunks) {
        if (before_chunk) before_chunk();
        const auto r = stream.step(chunk);
        if (const auto* d = std::get_if<TrialStream::Decision>(&r)) {
          decision = *d;
          break;
        }
      }
      if (!decision) throw DataError("run_session_cross: trial " + std::to_string(i) + " shorter than N");
      ea_state.accumulate(stream.buffer().leftCols(config.n_samples));
      DecisionRecord rec;
      rec.trial = index;
      rec.label = t.label;
      rec.pred = decision->cls;
      rec.p = decision->p;
      rec.samples_used = decision->samples_used;
      rec.decision_time_s = static_cast<double>(rec.samples_used) / t.fs;
      rec.update_ms = stream.update_ms();
      rec.used_ea = false;
      out.records.push_back(std::move(rec));
      if (i + 1 == n_ea) ea_state.finalize();
      continue;
    }
    out.records.push_back(run_trial_within(t.chunks, config, ea, StreamFrontEnd{filter, &ea_state.inverse_sqrt()},
                                           t.fs, index, t.label, before_chunk));
  }
  out.reference_ready = ea_state.finalized();
  if (n_ea > 0 && trials.size() < n_ea) {
    out.warnings.push_back("session has " + std::to_string(trials.size()) + " trials, fewer than n_EA = " +
                           std::to_string(n_ea) + "; every trial was decided without alignment");
  }
  return out;
}

std::string to_string(DecodeMode m) { return m == DecodeMode::within ? "within" : "cross"; }

DecodeMode decode_mode_from_string(const std::string& s) {
  if (s == "within") return DecodeMode::within;
  if (s == "cross") return DecodeMode::cross;
  throw ConfigError("unknown mode '" + s + "' (expected within|cross)");
}

} // namespace frdw
