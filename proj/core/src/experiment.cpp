#include "frdw/experiment.hpp"

#include "spec_json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace frdw {

using detail::json;
using detail::read_field;

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::fw: return "fw";
    case Strategy::frdw: return "frdw";
    case Strategy::ea_fw: return "ea_fw";
    case Strategy::ea_frdw: return "ea_frdw";
  }
  return "frdw";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "fw") return Strategy::fw;
  if (s == "frdw") return Strategy::frdw;
  if (s == "ea_fw") return Strategy::ea_fw;
  if (s == "ea_frdw") return Strategy::ea_frdw;
  throw ConfigError("unknown strategy '" + s + "' (expected fw|frdw|ea_fw|ea_frdw)");
}

namespace {

bool uses_ea(Strategy s) { return s == Strategy::ea_fw || s == Strategy::ea_frdw; }

// Re-throws the active exception with a location prefix, keeping its category.
[[noreturn]] void rethrow_in(const std::string& where) {
  try {
    throw;
  } catch (const DataError& e) {
    throw DataError(where + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(where + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(where + ": " + e.what());
  }
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; the lowest-index failure is rethrown.
template <typename F>
void parallel_for(std::size_t n, int jobs, F&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto workers = static_cast<std::size_t>(std::clamp<int>(jobs, 1, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::mutex m;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard lock(m);
            if (next >= n) return;
            i = next++;
          }
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<std::size_t> selected_subjects(const DatasetBundle& bundle, const ExperimentConfig& cfg) {
  std::vector<std::size_t> out;
  if (cfg.subjects.empty()) {
    for (std::size_t i = 0; i < bundle.subjects.size(); ++i) out.push_back(i);
    return out;
  }
  for (const auto& id : cfg.subjects) {
    auto it = std::find_if(bundle.subjects.begin(), bundle.subjects.end(), [&](const auto& s) { return s.id == id; });
    if (it == bundle.subjects.end()) throw ConfigError("unknown subject '" + id + "'");
    out.push_back(static_cast<std::size_t>(it - bundle.subjects.begin()));
  }
  return out;
}

Index shortest(std::span<const Trial> trials) {
  Index n = std::numeric_limits<Index>::max();
  for (const auto& t : trials) n = std::min(n, t.samples());
  return n;
}

double bundle_fs(const SubjectData& s) {
  if (!s.test_trials.empty()) return s.test_trials.front().fs;
  if (!s.train_trials.empty()) return s.train_trials.front().fs;
  throw DataError("subject " + s.id + " has no trials");
}

std::filesystem::path within_file(const ExperimentConfig& cfg, const std::string& id) {
  return cfg.pipelines() / (id + ".pipeline.json");
}
std::filesystem::path cross_file(const ExperimentConfig& cfg, const std::string& id, bool ea) {
  return cfg.pipelines() / (id + (ea ? ".ea" : ".no_ea") + ".pipeline.json");
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + file.string());
  os << text;
  if (!os) throw std::runtime_error("write failed for " + file.string());
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

SessionMetrics mean_metrics(std::span<const SessionMetrics> per_subject) {
  SessionMetrics m;
  if (per_subject.empty()) return m;
  for (const auto& s : per_subject) {
    m.accuracy += s.accuracy;
    m.itr += s.itr;
    m.mean_time_s += s.mean_time_s;
    m.n_trials += s.n_trials;
    m.n_classes = s.n_classes;
  }
  const auto n = static_cast<double>(per_subject.size());
  m.accuracy /= n;
  m.itr /= n;
  m.mean_time_s /= n;
  return m;
}

void check_strategy(const ExperimentConfig& cfg) {
  if (uses_ea(cfg.strategy) && cfg.mode != DecodeMode::cross) {
    throw ConfigError("strategy " + to_string(cfg.strategy) + " needs cross mode");
  }
}

struct LoadedModels {
  Pipeline primary;
  std::optional<Pipeline> ea;
};

LoadedModels load_models(const ExperimentConfig& cfg, const std::string& id) {
  LoadedModels m;
  if (cfg.mode == DecodeMode::within) {
    m.primary = Pipeline::load(within_file(cfg, id));
  } else {
    m.primary = Pipeline::load(cross_file(cfg, id, false));
    if (uses_ea(cfg.strategy)) m.ea = Pipeline::load(cross_file(cfg, id, true));
  }
  return m;
}

} // namespace

// --- configuration ----------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (candidate_n.empty()) throw ConfigError("candidate_n must not be empty");
  for (Index n : candidate_n) {
    if (n < 1) throw ConfigError("candidate_n values must be positive");
  }
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (!(tick_ms > 0.0)) throw ConfigError("tick_ms must be positive");
  if (!(inject_delay_ms >= 0.0)) throw ConfigError("inject_delay_ms must be >= 0");
  if (const auto* f = std::get_if<LastFraction>(&split); f && !(f->fraction > 0.0 && f->fraction < 1.0)) {
    throw ConfigError("split fraction must lie in (0, 1)");
  }
  if (const auto* k = std::get_if<LastKPerClass>(&split); k && k->k < 1) throw ConfigError("split k must be >= 1");
  FrdwConfig probe = frdw_for(frdw, *std::max_element(candidate_n.begin(), candidate_n.end()), frdw.tau);
  probe.mode = mode;
  probe.validate();
  if (pipeline.filter_order < 1) throw ConfigError("pipeline.filter_order must be >= 1");
}

std::uint64_t ExperimentConfig::resolved_seed() const {
  if (seed) return *seed;
  if (const char* env = std::getenv("FRDW_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used != std::char_traits<char>::length(env)) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(std::string("FRDW_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  return 0;
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["bundle"] = bundle.string();
  j["mode"] = to_string(mode);
  j["pipeline"] = detail::to_json(pipeline);
  j["frdw"] = detail::to_json(frdw);
  j["candidate_n"] = candidate_n;
  if (const auto* k = std::get_if<LastKPerClass>(&split)) {
    j["split"] = json{{"kind", "last_k_per_class"}, {"k", k->k}};
  } else {
    j["split"] = json{{"kind", "last_fraction"}, {"fraction", std::get<LastFraction>(split).fraction}};
  }
  j["seed"] = resolved_seed();
  j["out_dir"] = out_dir.string();
  j["pipeline_dir"] = pipeline_dir.string();
  j["subjects"] = subjects;
  j["strategy"] = to_string(strategy);
  j["tick_ms"] = tick_ms;
  j["sweep"] = json{{"l_min", sweep_l_min}, {"tau", sweep_tau}, {"schemes", sweep_schemes}};
  j["jobs"] = jobs;
  j["bench"] = json{{"max_trials", bench_max_trials}, {"inject_delay_ms", inject_delay_ms}};
  return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text, ExperimentConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  std::string s;
  if (j.contains("bundle")) {
    read_field(j, "bundle", s);
    c.bundle = s;
  }
  if (j.contains("mode")) {
    read_field(j, "mode", s);
    c.mode = decode_mode_from_string(s);
  }
  if (j.contains("pipeline")) c.pipeline = detail::pipeline_spec_from_json(j.at("pipeline"), c.pipeline);
  if (j.contains("frdw")) c.frdw = detail::frdw_from_json(j.at("frdw"), c.frdw);
  read_field(j, "candidate_n", c.candidate_n);
  if (j.contains("split")) {
    const json& sj = j.at("split");
    if (!sj.is_object()) throw ConfigError("config field 'split': expected an object");
    std::string kind = "last_k_per_class";
    read_field(sj, "kind", kind);
    if (kind == "last_k_per_class") {
      LastKPerClass k;
      read_field(sj, "k", k.k);
      c.split = k;
    } else if (kind == "last_fraction") {
      LastFraction f;
      read_field(sj, "fraction", f.fraction);
      c.split = f;
    } else {
      throw ConfigError("split.kind must be last_k_per_class|last_fraction, got '" + kind + "'");
    }
  }
  if (j.contains("seed") && !j.at("seed").is_null()) {
    std::uint64_t seed = 0;
    read_field(j, "seed", seed);
    c.seed = seed;
  }
  if (j.contains("out_dir")) {
    read_field(j, "out_dir", s);
    c.out_dir = s;
  }
  if (j.contains("pipeline_dir")) {
    read_field(j, "pipeline_dir", s);
    c.pipeline_dir = s;
  }
  read_field(j, "subjects", c.subjects);
  if (j.contains("strategy")) {
    read_field(j, "strategy", s);
    c.strategy = strategy_from_string(s);
  }
  read_field(j, "tick_ms", c.tick_ms);
  if (j.contains("sweep")) {
    const json& sw = j.at("sweep");
    if (!sw.is_object()) throw ConfigError("config field 'sweep': expected an object");
    read_field(sw, "l_min", c.sweep_l_min);
    read_field(sw, "tau", c.sweep_tau);
    read_field(sw, "schemes", c.sweep_schemes);
  }
  read_field(j, "jobs", c.jobs);
  if (j.contains("bench")) {
    const json& bj = j.at("bench");
    if (!bj.is_object()) throw ConfigError("config field 'bench': expected an object");
    read_field(bj, "max_trials", c.bench_max_trials);
    read_field(bj, "inject_delay_ms", c.inject_delay_ms);
  }
  c.frdw.mode = c.mode;
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& file, ExperimentConfig base) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw ConfigError("cannot read config file " + file.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json(ss.str(), std::move(base));
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) { return from_json(text, ExperimentConfig{}); }

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& file) { return load(file, ExperimentConfig{}); }

void write_config_echo(const ExperimentConfig& cfg) { write_text(cfg.out_dir / "config.json", cfg.to_json()); }

FrdwConfig frdw_for(const FrdwConfig& base, Index n_samples, double tau) {
  FrdwConfig c = base;
  c.n_samples = n_samples;
  c.min_len = std::min(c.min_len, n_samples);
  c.tau = tau;
  return c;
}

// --- training ---------------------------------------------------------------------------

ReplayResult replay_strategy(const SubjectData& subject, Strategy strategy, const ExperimentConfig& cfg,
                             const Pipeline& primary, const Pipeline* ea, ClockMode clock, std::size_t max_trials,
                             double inject_delay_ms) {
  const bool fixed = strategy == Strategy::fw || strategy == Strategy::ea_fw;
  FrdwConfig fc = frdw_for(cfg.frdw, primary.n_samples(), fixed ? kFixedWindowTau : cfg.frdw.tau);
  fc.mode = uses_ea(strategy) ? DecodeMode::cross : DecodeMode::within;
  if (uses_ea(strategy)) {
    if (!ea) throw ConfigError("strategy " + to_string(strategy) + " needs an EA pipeline");
    if (ea->n_samples() != primary.n_samples()) throw ConfigError("EA and warm-up pipelines differ in N");
  }
  ReplayPlan plan;
  plan.clock = clock;
  plan.chunk = fc.chunk;
  plan.tick_ms = cfg.tick_ms;
  plan.seed = cfg.resolved_seed();
  plan.max_trials = max_trials;

  std::optional<DelayedClassifier> slow_primary, slow_ea;
  const TrialClassifier* p = &primary;
  const TrialClassifier* e = ea;
  if (inject_delay_ms > 0.0) {
    const auto us = std::chrono::microseconds(static_cast<std::int64_t>(inject_delay_ms * 1000.0));
    slow_primary.emplace(primary, us);
    p = &*slow_primary;
    if (ea) {
      slow_ea.emplace(*ea, us);
      e = &*slow_ea;
    }
  }
  ReplayModels models{p, uses_ea(strategy) ? e : nullptr, &primary.filter(),
                      uses_ea(strategy) ? "no_ea" : (cfg.mode == DecodeMode::cross ? "no_ea" : "pipeline"), "ea"};
  return replay_subject(plan, subject, fc, models);
}

WithinModel train_within_subject(const SubjectData& subject, int n_classes, const ExperimentConfig& cfg) {
  if (subject.train_trials.empty()) throw DataError("no training trials");
  const double fs = subject.train_trials.front().fs;
  const FilterCoeffs filter = design_filter(cfg.pipeline, fs);
  auto [train, validation] = split_validation(subject, cfg.split);
  if (train.empty() || validation.empty()) throw DataError("validation split left an empty part");
  const std::vector<Trial> train_pre = preprocess_offline(train, filter);
  const Index longest_usable = std::min(shortest(subject.train_trials), shortest(validation));

  WithinModel out;
  SubjectData val{subject.id, {}, std::move(validation)};
  for (Index n : cfg.candidate_n) {
    if (n > longest_usable) continue;
    PipelineSpec spec = cfg.pipeline;
    spec.n_samples = n;
    try {
      const Pipeline p = fit_pipeline(train_pre, spec, n_classes, false);
      const ReplayResult r = replay_strategy(val, Strategy::frdw, cfg, p, nullptr);
      out.candidates.push_back({n, session_metrics(r.records, fs, n_classes).itr});
    } catch (...) {
      rethrow_in("candidate N=" + std::to_string(n));
    }
  }
  if (out.candidates.empty()) {
    throw DataError("no candidate N fits trials of " + std::to_string(longest_usable) + " samples");
  }
  PipelineSpec spec = cfg.pipeline;
  spec.n_samples = select_hyperparams(out.candidates);
  out.pipeline = fit_pipeline(preprocess_offline(subject.train_trials, filter), spec, n_classes, false);
  return out;
}

CrossModels train_cross_subject(const DatasetBundle& bundle, std::size_t held_out, const ExperimentConfig& cfg) {
  if (bundle.subjects.size() < 2) throw ConfigError("cross mode needs at least two subjects");
  if (held_out >= bundle.subjects.size()) throw ConfigError("held-out subject index out of range");
  const FilterCoeffs filter = design_filter(cfg.pipeline, bundle.fs);

  struct Source {
    std::vector<Trial> train_pre;
    SubjectData validation;
  };
  std::vector<Source> sources;
  Index longest_usable = std::numeric_limits<Index>::max();
  for (std::size_t s = 0; s < bundle.subjects.size(); ++s) {
    if (s == held_out) continue;
    const SubjectData& subj = bundle.subjects[s];
    auto [train, validation] = split_validation(subj, cfg.split);
    if (train.empty() || validation.empty()) throw DataError("source " + subj.id + ": empty validation split");
    longest_usable = std::min({longest_usable, shortest(train), shortest(validation)});
    sources.push_back({preprocess_offline(train, filter), SubjectData{subj.id, {}, std::move(validation)}});
  }

  std::vector<std::pair<Pipeline, Pipeline>> fitted;
  CrossModels out;
  for (Index n : cfg.candidate_n) {
    if (n > longest_usable) continue;
    PipelineSpec spec = cfg.pipeline;
    spec.n_samples = n;
    try {
      std::vector<Trial> raw_pool, ea_pool;
      for (const auto& src : sources) {
        raw_pool.insert(raw_pool.end(), src.train_pre.begin(), src.train_pre.end());
        auto aligned = align_by_own_reference(src.train_pre, n);
        ea_pool.insert(ea_pool.end(), std::make_move_iterator(aligned.begin()), std::make_move_iterator(aligned.end()));
      }
      Pipeline no_ea = fit_pipeline(raw_pool, spec, bundle.n_classes, false);
      Pipeline ea = fit_pipeline(ea_pool, spec, bundle.n_classes, true);
      std::vector<DecisionRecord> records;
      for (const auto& src : sources) {
        const ReplayResult r = replay_strategy(src.validation, Strategy::ea_frdw, cfg, no_ea, &ea);
        records.insert(records.end(), r.records.begin(), r.records.end());
      }
      out.candidates.push_back({n, session_metrics(records, bundle.fs, bundle.n_classes).itr});
      fitted.emplace_back(std::move(no_ea), std::move(ea));
    } catch (...) {
      rethrow_in("candidate N=" + std::to_string(n));
    }
  }
  if (out.candidates.empty()) {
    throw DataError("no candidate N fits trials of " + std::to_string(longest_usable) + " samples");
  }
  const Index best = select_hyperparams(out.candidates);
  for (std::size_t i = 0; i < out.candidates.size(); ++i) {
    if (out.candidates[i].n_samples == best) {
      out.no_ea = std::move(fitted[i].first);
      out.ea = std::move(fitted[i].second);
      break;
    }
  }
  return out;
}

// --- commands ---------------------------------------------------------------------------

TrainReport cmd_train(const ExperimentConfig& cfg, const DatasetBundle& bundle, std::ostream& log) {
  cfg.validate();
  validate_bundle(bundle);
  const auto picked = selected_subjects(bundle, cfg);
  write_config_echo(cfg);

  std::vector<std::vector<std::filesystem::path>> files(picked.size());
  std::vector<Index> chosen(picked.size());
  std::vector<std::string> notes(picked.size());
  parallel_for(picked.size(), cfg.jobs, [&](std::size_t i) {
    const SubjectData& subj = bundle.subjects[picked[i]];
    try {
      std::ostringstream note;
      if (cfg.mode == DecodeMode::within) {
        WithinModel m = train_within_subject(subj, bundle.n_classes, cfg);
        // Self-test on the head of the training data.
        const Trial head = crop_to_length(preprocess_offline(subj.train_trials.front(), m.pipeline.filter()),
                                          m.pipeline.n_samples());
        const Prediction pr = m.pipeline.classify(head.data);
        double total = 0.0;
        bool finite = true;
        for (double v : pr.probs) {
          total += v;
          finite = finite && std::isfinite(v);
        }
        if (!finite || std::abs(total - 1.0) > 1e-9) {
          throw NumericError("self-test produced invalid probabilities");
        }
        const auto file = within_file(cfg, subj.id);
        m.pipeline.save(file);
        files[i] = {file};
        chosen[i] = m.pipeline.n_samples();
        note << subj.id << ": N=" << chosen[i] << " (validation ITR";
        for (const auto& c : m.candidates) note << ' ' << c.n_samples << ':' << std::fixed << std::setprecision(2) << c.itr;
        note << ")\n";
      } else {
        CrossModels m = train_cross_subject(bundle, picked[i], cfg);
        const auto f0 = cross_file(cfg, subj.id, false);
        const auto f1 = cross_file(cfg, subj.id, true);
        m.no_ea.save(f0);
        m.ea.save(f1);
        files[i] = {f0, f1};
        chosen[i] = m.ea.n_samples();
        note << subj.id << " held out: N=" << chosen[i] << " (validation ITR";
        for (const auto& c : m.candidates) note << ' ' << c.n_samples << ':' << std::fixed << std::setprecision(2) << c.itr;
        note << ")\n";
      }
      notes[i] = note.str();
    } catch (...) {
      rethrow_in("subject " + subj.id + ", train");
    }
  });

  TrainReport report;
  for (std::size_t i = 0; i < picked.size(); ++i) {
    log << notes[i];
    report.files.insert(report.files.end(), files[i].begin(), files[i].end());
    report.chosen_n.emplace_back(bundle.subjects[picked[i]].id, chosen[i]);
  }
  return report;
}

ReplayReport cmd_replay(const ExperimentConfig& cfg, const DatasetBundle& bundle, std::ostream& log) {
  cfg.validate();
  check_strategy(cfg);
  validate_bundle(bundle);
  const auto picked = selected_subjects(bundle, cfg);
  write_config_echo(cfg);
  const auto dir = cfg.out_dir / "replay" / to_string(cfg.strategy);

  ReplayReport report;
  report.subjects.resize(picked.size());
  std::vector<std::vector<std::string>> warnings(picked.size());
  parallel_for(picked.size(), cfg.jobs, [&](std::size_t i) {
    const SubjectData& subj = bundle.subjects[picked[i]];
    try {
      const LoadedModels models = load_models(cfg, subj.id);
      const ReplayResult r =
          replay_strategy(subj, cfg.strategy, cfg, models.primary, models.ea ? &*models.ea : nullptr);
      std::string lines;
      for (const auto& rec : r.records) lines += record_to_json_line(rec) + "\n";
      write_text(dir / (subj.id + ".jsonl"), lines);
      report.subjects[i] = {subj.id, session_metrics(r.records, bundle_fs(subj), bundle.n_classes), r.latency};
      warnings[i] = r.warnings;
    } catch (...) {
      rethrow_in("subject " + subj.id + ", replay");
    }
  });

  std::string csv = "subject,strategy,n_trials,acc,mean_time_s,itr\n";
  log << std::left << std::setw(10) << "subject" << std::right << std::setw(8) << "trials" << std::setw(9) << "acc"
      << std::setw(10) << "time_s" << std::setw(10) << "itr" << '\n';
  for (std::size_t i = 0; i < picked.size(); ++i) {
    const auto& o = report.subjects[i];
    csv += o.subject + "," + to_string(cfg.strategy) + "," + std::to_string(o.metrics.n_trials) + "," +
           num(o.metrics.accuracy) + "," + num(o.metrics.mean_time_s) + "," + num(o.metrics.itr) + "\n";
    log << std::left << std::setw(10) << o.subject << std::right << std::setw(8) << o.metrics.n_trials << std::fixed
        << std::setprecision(3) << std::setw(9) << o.metrics.accuracy << std::setw(10) << o.metrics.mean_time_s
        << std::setprecision(2) << std::setw(10) << o.metrics.itr << '\n';
    for (auto& w : warnings[i]) report.warnings.push_back(std::move(w));
  }
  write_text(dir / "metrics.csv", csv);
  return report;
}

SweepResult cmd_sweep(const ExperimentConfig& cfg_in, const DatasetBundle& bundle, std::ostream& log) {
  ExperimentConfig cfg = cfg_in;
  if (cfg.sweep_l_min.empty() || cfg.sweep_tau.empty() || cfg.sweep_schemes.empty()) {
    throw ConfigError("sweep grid must not be empty");
  }
  if (dedupe_in_place(cfg.sweep_l_min)) log << "warning: duplicate l_min values removed\n";
  if (dedupe_in_place(cfg.sweep_tau)) log << "warning: duplicate tau values removed\n";
  if (dedupe_in_place(cfg.sweep_schemes)) log << "warning: duplicate schemes removed\n";
  for (const auto& s : cfg.sweep_schemes) augment_scheme_from_string(s);
  cfg.validate();
  validate_bundle(bundle);
  const auto picked = selected_subjects(bundle, cfg);
  write_config_echo(cfg);

  struct Trained {
    std::string scheme;
    std::vector<Pipeline> primary;
    std::vector<Pipeline> ea;
  };
  std::vector<Trained> cache;
  auto models_for = [&](const std::string& scheme) -> const Trained& {
    for (const auto& t : cache) {
      if (t.scheme == scheme) return t;
    }
    ExperimentConfig c = cfg;
    c.pipeline.augment.scheme = augment_scheme_from_string(scheme);
    Trained t{scheme, std::vector<Pipeline>(picked.size()), std::vector<Pipeline>(picked.size())};
    parallel_for(picked.size(), cfg.jobs, [&](std::size_t i) {
      const SubjectData& subj = bundle.subjects[picked[i]];
      try {
        if (cfg.mode == DecodeMode::within) {
          t.primary[i] = train_within_subject(subj, bundle.n_classes, c).pipeline;
        } else {
          CrossModels m = train_cross_subject(bundle, picked[i], c);
          t.primary[i] = std::move(m.no_ea);
          t.ea[i] = std::move(m.ea);
        }
      } catch (...) {
        rethrow_in("subject " + subj.id + ", sweep training (" + scheme + ")");
      }
    });
    cache.push_back(std::move(t));
    return cache.back();
  };

  const SweepEvaluator evaluate = [&](const std::string& scheme, Index l_min, double tau) {
    const Trained& t = models_for(scheme);
    ExperimentConfig c = cfg;
    c.frdw.min_len = l_min;
    c.frdw.tau = tau;
    const Strategy strategy = cfg.mode == DecodeMode::within ? Strategy::frdw : Strategy::ea_frdw;
    std::vector<SessionMetrics> per(picked.size());
    parallel_for(picked.size(), cfg.jobs, [&](std::size_t i) {
      const SubjectData& subj = bundle.subjects[picked[i]];
      if (l_min > t.primary[i].n_samples()) {
        throw ConfigError("l_min " + std::to_string(l_min) + " exceeds N = " +
                          std::to_string(t.primary[i].n_samples()) + " for subject " + subj.id);
      }
      const ReplayResult r = replay_strategy(subj, strategy, c, t.primary[i],
                                             cfg.mode == DecodeMode::cross ? &t.ea[i] : nullptr);
      per[i] = session_metrics(r.records, bundle_fs(subj), bundle.n_classes);
    });
    return mean_metrics(per);
  };

  std::vector<Index> l_grid = cfg.sweep_l_min;
  SweepResult result = sensitivity_sweep(cfg.sweep_schemes, l_grid, cfg.sweep_tau, evaluate);
  write_text(cfg.out_dir / "sweep.csv", result.to_csv());
  log << result.to_table();
  return result;
}

BenchReport cmd_bench(const ExperimentConfig& cfg, const DatasetBundle& bundle, std::ostream& log) {
  cfg.validate();
  check_strategy(cfg);
  validate_bundle(bundle);
  const auto picked = selected_subjects(bundle, cfg);
  write_config_echo(cfg);

  BenchReport report;
  std::map<std::string, std::vector<double>> by_model;
  json per_subject = json::array();
  // Sequential on purpose: concurrent realtime replays would share cores and skew timings.
  for (std::size_t idx : picked) {
    const SubjectData& subj = bundle.subjects[idx];
    try {
      const LoadedModels models = load_models(cfg, subj.id);
      const ReplayResult r = replay_strategy(subj, cfg.strategy, cfg, models.primary,
                                             models.ea ? &*models.ea : nullptr, ClockMode::realtime,
                                             cfg.bench_max_trials, cfg.inject_delay_ms);
      for (const auto& rec : r.records) {
        report.update_ms.insert(report.update_ms.end(), rec.update_ms.begin(), rec.update_ms.end());
        auto& bucket = by_model[rec.used_ea ? "ea" : (cfg.mode == DecodeMode::cross ? "no_ea" : "pipeline")];
        bucket.insert(bucket.end(), rec.update_ms.begin(), rec.update_ms.end());
      }
      report.warnings.insert(report.warnings.end(), r.warnings.begin(), r.warnings.end());
      per_subject.push_back(json{{"subject", subj.id},
                                 {"count", r.latency.all.count},
                                 {"mean_ms", r.latency.all.mean_ms},
                                 {"std_ms", r.latency.all.std_ms},
                                 {"max_ms", r.latency.all.max_ms},
                                 {"overruns", r.latency.all.overruns}});
    } catch (...) {
      rethrow_in("subject " + subj.id + ", bench");
    }
  }
  report.latency.all = summarize_latency(report.update_ms, cfg.tick_ms);
  for (const auto& [name, v] : by_model) report.latency.per_model[name] = summarize_latency(v, cfg.tick_ms);

  auto summary_json = [](const LatencySummary& s) {
    return json{{"count", s.count}, {"mean_ms", s.mean_ms}, {"std_ms", s.std_ms}, {"max_ms", s.max_ms},
                {"overruns", s.overruns}};
  };
  json j{{"deadline_ms", cfg.tick_ms},
         {"strategy", to_string(cfg.strategy)},
         {"all", summary_json(report.latency.all)},
         {"subjects", per_subject},
         {"update_ms", report.update_ms}};
  for (const auto& [name, s] : report.latency.per_model) j["per_model"][name] = summary_json(s);
  write_text(cfg.out_dir / "bench" / "latency.json", j.dump(2) + "\n");

  const auto& a = report.latency.all;
  log << std::fixed << std::setprecision(3) << "updates " << a.count << "  mean " << a.mean_ms << " ms  std "
      << a.std_ms << " ms  max " << a.max_ms << " ms  overruns " << a.overruns << " (deadline " << cfg.tick_ms
      << " ms)\n";
  for (const auto& [name, s] : report.latency.per_model) {
    log << "  " << name << ": mean " << s.mean_ms << " ms  max " << s.max_ms << " ms  n " << s.count << '\n';
  }
  return report;
}

SessionMetrics metrics_from_log(const std::filesystem::path& jsonl, double fs, int n_classes) {
  std::ifstream is(jsonl);
  if (!is) throw DataError("cannot read record log " + jsonl.string());
  std::vector<DecisionRecord> records;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) records.push_back(record_from_json_line(line));
  }
  return session_metrics(records, fs, n_classes);
}

} // namespace frdw
