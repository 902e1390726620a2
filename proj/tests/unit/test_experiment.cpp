#include "frdw/experiment.hpp"
#include "frdw/synthetic.hpp"
#include "support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

using namespace frdw;

namespace {

const DatasetBundle& bundle() {
  static const DatasetBundle b = [] {
    SyntheticSpec s;
    s.n_subjects = 3;
    s.n_channels = 7;
    s.n_samples = 500;
    s.train_per_class = 24;
    s.test_per_class = 5;
    s.seed = 5;
    return make_synthetic_bundle(s);
  }();
  return b;
}

ExperimentConfig config(const std::string& name, DecodeMode mode = DecodeMode::within) {
  ExperimentConfig c;
  c.mode = mode;
  c.out_dir = fixture::temp_dir(name);
  c.candidate_n = {125, 250, 500};
  c.split = LastKPerClass{6};
  c.seed = 11;
  c.frdw = FrdwConfig::table_defaults(mode, 2, 250);
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<DecisionRecord> read_log(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<DecisionRecord> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(record_from_json_line(line));
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

} // namespace

TEST_CASE("within training writes one self-tested pipeline per subject, byte-identical on rerun") {
  ExperimentConfig c = config("exp_train_within");
  std::ostringstream log;
  const TrainReport r = cmd_train(c, bundle(), log);
  REQUIRE(r.files.size() == 3);
  CHECK(r.chosen_n.size() == 3);
  for (const auto& [id, n] : r.chosen_n) CHECK(std::find(c.candidate_n.begin(), c.candidate_n.end(), n) != c.candidate_n.end());
  std::vector<std::string> first;
  for (const auto& f : r.files) {
    CHECK(f.filename().string().ends_with(".pipeline.json"));
    first.push_back(slurp(f));
  }
  CHECK(log.str().find("S1: N=") != std::string::npos);
  CHECK(std::filesystem::exists(c.out_dir / "config.json"));

  c.jobs = 2;
  const TrainReport again = cmd_train(c, bundle(), log);
  for (std::size_t i = 0; i < again.files.size(); ++i) CHECK(slurp(again.files[i]) == first[i]);
}

TEST_CASE("within N selection picks the best validation ITR") {
  const ExperimentConfig c = config("exp_select");
  const WithinModel m = train_within_subject(bundle().subjects[0], 2, c);
  CHECK(m.candidates.size() == 3);
  CHECK(m.pipeline.n_samples() == select_hyperparams(m.candidates));
}

TEST_CASE("cross training on 3 subjects gives 3 held-out pipeline pairs") {
  ExperimentConfig c = config("exp_train_cross", DecodeMode::cross);
  std::ostringstream log;
  const TrainReport r = cmd_train(c, bundle(), log);
  CHECK(r.files.size() == 6);
  for (const char* id : {"S1", "S2", "S3"}) {
    const auto no_ea = Pipeline::load(c.pipelines() / (std::string(id) + ".no_ea.pipeline.json"));
    const auto ea = Pipeline::load(c.pipelines() / (std::string(id) + ".ea.pipeline.json"));
    CHECK_FALSE(no_ea.aligned());
    CHECK(ea.aligned());
    CHECK(no_ea.n_samples() == ea.n_samples());
  }
}

TEST_CASE("replay fw then frdw: dynamic windows never exceed the fixed ones, metrics recompute from the log") {
  ExperimentConfig c = config("exp_replay");
  std::ostringstream log;
  cmd_train(c, bundle(), log);
  c.strategy = Strategy::fw;
  const ReplayReport fw = cmd_replay(c, bundle(), log);
  c.strategy = Strategy::frdw;
  const ReplayReport dw = cmd_replay(c, bundle(), log);
  REQUIRE(fw.subjects.size() == 3);
  for (const char* id : {"S1", "S2", "S3"}) {
    const auto a = read_log(c.out_dir / "replay" / "fw" / (std::string(id) + ".jsonl"));
    const auto b = read_log(c.out_dir / "replay" / "frdw" / (std::string(id) + ".jsonl"));
    REQUIRE(a.size() == 10);
    REQUIRE(b.size() == 10);
    const Index n = Pipeline::load(c.pipelines() / (std::string(id) + ".pipeline.json")).n_samples();
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(b[i].samples_used <= a[i].samples_used);
      CHECK(a[i].samples_used == n);
      CHECK(b[i].update_ms.size() <= a[i].update_ms.size());
    }
  }
  const auto rows = read_csv(c.out_dir / "replay" / "frdw" / "metrics.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == std::vector<std::string>{"subject", "strategy", "n_trials", "acc", "mean_time_s", "itr"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto m = metrics_from_log(c.out_dir / "replay" / "frdw" / (rows[i][0] + ".jsonl"), 250.0, 2);
    CHECK(rows[i][1] == "frdw");
    CHECK(std::stoul(rows[i][2]) == m.n_trials);
    CHECK(std::stod(rows[i][3]) == m.accuracy);
    CHECK(std::stod(rows[i][4]) == m.mean_time_s);
    CHECK(std::stod(rows[i][5]) == m.itr);
    CHECK(dw.subjects[i - 1].metrics.itr == m.itr);
  }
}

TEST_CASE("ea_frdw with 10 test trials and n_EA = 10 decides everything without alignment") {
  ExperimentConfig c = config("exp_ea", DecodeMode::cross);
  c.subjects = {"S2"};
  std::ostringstream log;
  cmd_train(c, bundle(), log);
  c.strategy = Strategy::ea_frdw;
  cmd_replay(c, bundle(), log);
  const auto recs = read_log(c.out_dir / "replay" / "ea_frdw" / "S2.jsonl");
  REQUIRE(recs.size() == 10);
  for (const auto& r : recs) CHECK_FALSE(r.used_ea);

  c.frdw.n_ea = 4;
  cmd_replay(c, bundle(), log);
  const auto later = read_log(c.out_dir / "replay" / "ea_frdw" / "S2.jsonl");
  for (std::size_t i = 0; i < later.size(); ++i) CHECK(later[i].used_ea == (i >= 4));
}

TEST_CASE("EA strategies are rejected in within mode") {
  ExperimentConfig c = config("exp_ea_within");
  c.strategy = Strategy::ea_frdw;
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_replay(c, bundle(), log), ConfigError);
  c.strategy = Strategy::ea_fw;
  CHECK_THROWS_AS(cmd_bench(c, bundle(), log), ConfigError);
}

TEST_CASE("sweep: complete CSV over the grid, duplicates removed with a warning, empty grid rejected") {
  ExperimentConfig c = config("exp_sweep");
  c.subjects = {"S1"};
  c.candidate_n = {250};
  c.sweep_l_min = {30, 60, 60, 300};
  c.sweep_tau = {0.5, 0.9, 0.5};
  std::ostringstream log;
  const SweepResult r = cmd_sweep(c, bundle(), log);
  CHECK(log.str().find("duplicate l_min") != std::string::npos);
  CHECK(log.str().find("duplicate tau") != std::string::npos);
  CHECK(r.cells.size() == 6);
  const auto rows = read_csv(c.out_dir / "sweep.csv");
  CHECK(rows.size() == 7);
  int failed = 0;
  for (const auto& cell : r.cells) failed += cell.failed;
  CHECK(failed == 2);  // l_min 300 exceeds N = 250

  c.sweep_tau.clear();
  CHECK_THROWS_AS(cmd_sweep(c, bundle(), log), ConfigError);
}

TEST_CASE("bench with a 50 ms injected delay flags every update, and the report mean is the logged mean") {
  ExperimentConfig c = config("exp_bench");
  c.subjects = {"S3"};
  c.candidate_n = {125};
  std::ostringstream log;
  cmd_train(c, bundle(), log);
  c.bench_max_trials = 2;
  c.inject_delay_ms = 50.0;
  const BenchReport r = cmd_bench(c, bundle(), log);
  CHECK(r.latency.all.count == r.update_ms.size());
  CHECK(r.latency.all.overruns == r.update_ms.size());
  CHECK(r.warnings.size() == r.update_ms.size());
  double sum = 0;
  for (double v : r.update_ms) sum += v;
  CHECK(std::fabs(r.latency.all.mean_ms - sum / static_cast<double>(r.update_ms.size())) < 1e-9);
  const auto j = nlohmann::json::parse(slurp(c.out_dir / "bench" / "latency.json"));
  CHECK(j.at("all").at("overruns").get<std::size_t>() == r.update_ms.size());
  CHECK(j.at("update_ms").size() == r.update_ms.size());
}

TEST_CASE("config JSON round trip, file overrides and seed fallback") {
  ExperimentConfig c = config("exp_config", DecodeMode::cross);
  c.strategy = Strategy::ea_fw;
  c.split = LastFraction{0.25};
  c.sweep_schemes = {"none", "fr"};
  c.pipeline.classifier.kind = ClassifierKind::svm;
  const std::string text = c.to_json();
  const ExperimentConfig back = ExperimentConfig::from_json(text);
  CHECK(back.to_json() == text);
  CHECK(back.mode == DecodeMode::cross);
  CHECK(std::get<LastFraction>(back.split).fraction == 0.25);

  const ExperimentConfig partial = ExperimentConfig::from_json(R"({"frdw": {"tau": 0.55}})", c);
  CHECK(partial.frdw.tau == 0.55);
  CHECK(partial.frdw.min_len == c.frdw.min_len);
  CHECK(partial.strategy == Strategy::ea_fw);

  CHECK_THROWS_AS(ExperimentConfig::from_json("[1]"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"mode": "sideways"})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"candidate_n": []})").validate(), ConfigError);

  ExperimentConfig s;
  CHECK(s.resolved_seed() == 0);
  ::setenv("FRDW_SEED", "42", 1);
  CHECK(s.resolved_seed() == 42);
  s.seed = 7;
  CHECK(s.resolved_seed() == 7);
  s.seed.reset();
  ::setenv("FRDW_SEED", "x1", 1);
  CHECK_THROWS_AS(s.resolved_seed(), ConfigError);
  ::unsetenv("FRDW_SEED");
}

TEST_CASE("the config echo reruns to the same config") {
  ExperimentConfig c = config("exp_echo");
  write_config_echo(c);
  const ExperimentConfig back = ExperimentConfig::load(c.out_dir / "config.json");
  CHECK(back.to_json() == c.to_json());
}

TEST_CASE("unknown subjects and strategies are configuration errors") {
  ExperimentConfig c = config("exp_unknown");
  c.subjects = {"S99"};
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_train(c, bundle(), log), ConfigError);
  CHECK_THROWS_AS(strategy_from_string("slow"), ConfigError);
  CHECK(strategy_from_string("ea_frdw") == Strategy::ea_frdw);
}

TEST_CASE("replay without trained pipelines is a data error") {
  ExperimentConfig c = config("exp_no_pipelines");
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_replay(c, bundle(), log), DataError);
}
