// frdw: train, replay, sweep and benchmark dynamic-window decoders on EEG bundles.
#include "frdw/experiment.hpp"
#include "frdw/synthetic.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

// Flag values; unset optionals leave the config file (or default) untouched.
struct Overrides {
  std::string config;
  std::optional<std::string> bundle, mode, out, pipelines, strategy, classifier, kernel, augment;
  std::optional<std::vector<std::string>> subjects, schemes;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<frdw::Index>> candidate_n, sweep_l_min;
  std::optional<std::vector<double>> sweep_tau;
  std::optional<frdw::Index> l_min, chunk;
  std::optional<double> tau, tick_ms, inject_delay_ms, split_fraction;
  std::optional<int> n_ea, jobs, split_k;
  std::optional<std::size_t> max_trials;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "experiment config file (JSON)");
  cmd->add_option("-b,--bundle", o.bundle, "bundle directory");
  cmd->add_option("-m,--mode", o.mode, "within|cross");
  cmd->add_option("-o,--out", o.out, "output directory");
  cmd->add_option("--pipelines", o.pipelines, "pipeline directory (default <out>/pipelines)");
  cmd->add_option("-s,--subjects", o.subjects, "subject ids (default: all)")->delimiter(',');
  cmd->add_option("--seed", o.seed, "seed (falls back to FRDW_SEED)");
  cmd->add_option("--strategy", o.strategy, "fw|frdw|ea_fw|ea_frdw");
  cmd->add_option("--classifier", o.classifier, "logreg|svm");
  cmd->add_option("--kernel", o.kernel, "linear|rbf (svm)");
  cmd->add_option("--augment", o.augment, "none|overlap|fr");
  cmd->add_option("--candidate-n", o.candidate_n, "candidate training lengths")->delimiter(',');
  cmd->add_option("--l-min", o.l_min, "minimum decision length in samples");
  cmd->add_option("--tau", o.tau, "confidence threshold");
  cmd->add_option("--n-ea", o.n_ea, "warm-up trials before alignment");
  cmd->add_option("--chunk", o.chunk, "samples per update");
  cmd->add_option("--tick-ms", o.tick_ms, "update period in ms");
  cmd->add_option("--split-k", o.split_k, "validation: last k trials per class");
  cmd->add_option("--split-fraction", o.split_fraction, "validation: last fraction of trials");
  cmd->add_option("-j,--jobs", o.jobs, "subjects processed in parallel");
}

frdw::ExperimentConfig build_config(const Overrides& o) {
  frdw::ExperimentConfig c = o.config.empty() ? frdw::ExperimentConfig{} : frdw::ExperimentConfig::load(o.config);
  if (o.bundle) c.bundle = *o.bundle;
  if (o.mode) c.mode = frdw::decode_mode_from_string(*o.mode);
  c.frdw.mode = c.mode;
  if (o.out) c.out_dir = *o.out;
  if (o.pipelines) c.pipeline_dir = *o.pipelines;
  if (o.subjects) c.subjects = *o.subjects;
  if (o.seed) c.seed = *o.seed;
  if (o.strategy) c.strategy = frdw::strategy_from_string(*o.strategy);
  if (o.classifier) {
    if (*o.classifier == "logreg") c.pipeline.classifier.kind = frdw::ClassifierKind::logreg;
    else if (*o.classifier == "svm") c.pipeline.classifier.kind = frdw::ClassifierKind::svm;
    else throw frdw::ConfigError("--classifier must be logreg|svm");
  }
  if (o.kernel) {
    if (*o.kernel == "linear") c.pipeline.classifier.kernel.kind = frdw::KernelSpec::Kind::linear;
    else if (*o.kernel == "rbf") c.pipeline.classifier.kernel.kind = frdw::KernelSpec::Kind::rbf;
    else throw frdw::ConfigError("--kernel must be linear|rbf");
  }
  if (o.augment) c.pipeline.augment.scheme = frdw::augment_scheme_from_string(*o.augment);
  if (o.candidate_n) c.candidate_n = *o.candidate_n;
  if (o.l_min) c.frdw.min_len = *o.l_min;
  if (o.tau) c.frdw.tau = *o.tau;
  if (o.n_ea) c.frdw.n_ea = *o.n_ea;
  if (o.chunk) c.frdw.chunk = *o.chunk;
  if (o.tick_ms) c.tick_ms = *o.tick_ms;
  if (o.split_k && o.split_fraction) throw frdw::ConfigError("--split-k and --split-fraction are exclusive");
  if (o.split_k) c.split = frdw::LastKPerClass{*o.split_k};
  if (o.split_fraction) c.split = frdw::LastFraction{*o.split_fraction};
  if (o.jobs) c.jobs = *o.jobs;
  if (o.sweep_l_min) c.sweep_l_min = *o.sweep_l_min;
  if (o.sweep_tau) c.sweep_tau = *o.sweep_tau;
  if (o.schemes) c.sweep_schemes = *o.schemes;
  if (o.max_trials) c.bench_max_trials = *o.max_trials;
  if (o.inject_delay_ms) c.inject_delay_ms = *o.inject_delay_ms;
  if (c.bundle.empty()) throw frdw::ConfigError("no bundle given (--bundle or \"bundle\" in the config)");
  return c;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"frdw: dynamic-window motor imagery decoding"};
  app.require_subcommand(1);

  Overrides o;
  auto* train = app.add_subcommand("train", "select N on validation data and train pipelines");
  auto* replay = app.add_subcommand("replay", "stream test trials through trained pipelines");
  auto* sweep = app.add_subcommand("sweep", "minimum length x threshold sensitivity grid");
  auto* bench = app.add_subcommand("bench", "realtime replay with per-update latency report");
  for (auto* cmd : {train, replay, sweep, bench}) add_common(cmd, o);
  sweep->add_option("--sweep-l-min", o.sweep_l_min, "minimum-length grid")->delimiter(',');
  sweep->add_option("--sweep-tau", o.sweep_tau, "threshold grid")->delimiter(',');
  sweep->add_option("--schemes", o.schemes, "augmentation schemes")->delimiter(',');
  bench->add_option("--max-trials", o.max_trials, "trials per subject (0: all)");
  bench->add_option("--inject-delay-ms", o.inject_delay_ms, "sleep added to every classify call");

  std::string validate_dir;
  auto* validate = app.add_subcommand("validate-bundle", "check a bundle directory");
  validate->add_option("dir", validate_dir, "bundle directory")->required();

  frdw::SyntheticSpec synth_spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a seeded synthetic bundle");
  synth->add_option("dir", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_spec.seed);
  synth->add_option("--n-subjects", synth_spec.n_subjects);
  synth->add_option("--channels", synth_spec.n_channels);
  synth->add_option("--classes", synth_spec.n_classes);
  synth->add_option("--samples", synth_spec.n_samples);
  synth->add_option("--train-per-class", synth_spec.train_per_class);
  synth->add_option("--test-per-class", synth_spec.test_per_class);
  synth->add_option("--erd", synth_spec.erd, "mu amplitude ratio during imagery");
  synth->add_option("--noise", synth_spec.sensor_noise);
  synth->add_option("--jitter", synth_spec.trial_jitter, "per-trial amplitude variability");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*validate) {
      const frdw::DatasetBundle b = frdw::load_bundle(validate_dir);
      std::size_t train = 0, test = 0;
      for (const auto& s : b.subjects) {
        train += s.train_trials.size();
        test += s.test_trials.size();
      }
      std::cout << "ok: " << b.subjects.size() << " subjects, " << b.n_channels() << " channels, " << b.n_classes
                << " classes, fs " << b.fs << " Hz, " << train << " train / " << test << " test trials\n";
      return kOk;
    }
    if (*synth) {
      if (!synth->count("--seed")) {
        frdw::ExperimentConfig probe;
        synth_spec.seed = probe.resolved_seed();
      }
      frdw::write_bundle(frdw::make_synthetic_bundle(synth_spec), synth_out);
      std::cout << "wrote " << synth_out << '\n';
      return kOk;
    }

    const frdw::ExperimentConfig cfg = build_config(o);
    const frdw::DatasetBundle bundle = frdw::load_bundle(cfg.bundle);
    if (*train) {
      const auto r = frdw::cmd_train(cfg, bundle, std::cout);
      std::cout << "wrote " << r.files.size() << " pipeline file(s) to " << cfg.pipelines().string() << '\n';
    } else if (*replay) {
      const auto r = frdw::cmd_replay(cfg, bundle, std::cout);
      print_warnings(r.warnings);
    } else if (*sweep) {
      frdw::cmd_sweep(cfg, bundle, std::cout);
    } else if (*bench) {
      const auto r = frdw::cmd_bench(cfg, bundle, std::cout);
      print_warnings(r.warnings);
      if (r.latency.all.overruns > 0) {
        std::cerr << "warning: " << r.latency.all.overruns << " update(s) exceeded the " << cfg.tick_ms
                  << " ms deadline\n";
      }
    }
    return kOk;
  } catch (const frdw::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const frdw::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}
