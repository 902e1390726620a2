#include "frdw/replay.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace frdw;

namespace {

class PowerClassifier : public TrialClassifier {
public:
  Prediction classify(const Matrix& w) const override {
    const double a = w.row(0).squaredNorm(), b = w.row(1).squaredNorm();
    return make_prediction({a / (a + b), b / (a + b)});
  }
};

SubjectData subject(int trials, Index samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SubjectData s;
  s.id = "S1";
  for (int i = 0; i < trials; ++i) {
    Matrix x = fixture::random_matrix(3, samples, rng);
    x.row(i % 2) *= 1.6;
    s.test_trials.push_back(fixture::trial(x, i % 2));
  }
  return s;
}

FrdwConfig config(Index n, Index l_min, double tau) {
  FrdwConfig c;
  c.n_samples = n;
  c.min_len = l_min;
  c.tau = tau;
  return c;
}

void same_decisions(const std::vector<DecisionRecord>& a, const std::vector<DecisionRecord>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].trial == b[i].trial);
    CHECK(a[i].label == b[i].label);
    CHECK(a[i].pred == b[i].pred);
    CHECK(a[i].p == b[i].p);
    CHECK(a[i].samples_used == b[i].samples_used);
    CHECK(a[i].used_ea == b[i].used_ea);
    CHECK(a[i].update_ms.size() == b[i].update_ms.size());
  }
}

} // namespace

TEST_CASE("make_stream: 750 samples in chunks of 10 give 75 chunks that reassemble exactly") {
  std::mt19937_64 rng(1);
  const Matrix x = fixture::random_matrix(22, 750, rng);
  const auto chunks = make_stream(x, 10);
  CHECK(chunks.size() == 75);
  Matrix back(22, 750);
  for (std::size_t i = 0; i < chunks.size(); ++i) back.middleCols(static_cast<Index>(i) * 10, 10) = chunks[i];
  CHECK(back == x);
}

TEST_CASE("make_stream: a chunk as long as the trial, and truncation of a ragged tail") {
  std::mt19937_64 rng(2);
  const Matrix x = fixture::random_matrix(2, 37, rng);
  const auto one = make_stream(x, 37);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == x);
  const auto ragged = make_stream(x, 10);
  CHECK(ragged.size() == 3);
  CHECK(ragged.back() == x.middleCols(20, 10));
  CHECK_THROWS_AS(make_stream(x, 0), ConfigError);
}

TEST_CASE("ReplayPlan requires the chunk to fill exactly one tick") {
  ReplayPlan p;
  CHECK_NOTHROW(p.validate(250.0));
  CHECK_THROWS_AS(p.validate(500.0), ConfigError);
  p.tick_ms = 20.0;
  CHECK_NOTHROW(p.validate(500.0));
}

TEST_CASE("simulated replay is deterministic") {
  const SubjectData s = subject(12, 250, 3);
  const FilterCoeffs f = design_bandpass(5, 8.0, 26.0, 250.0);
  PowerClassifier clf;
  const ReplayModels m{&clf, nullptr, &f};
  const auto a = replay_subject({}, s, config(250, 60, 0.6), m);
  const auto b = replay_subject({}, s, config(250, 60, 0.6), m);
  same_decisions(a.records, b.records);
}

TEST_CASE("with an unreachable threshold, streamed decisions equal batch decisions on the causal-filtered trial") {
  const SubjectData s = subject(20, 250, 4);
  const FilterCoeffs f = design_bandpass(5, 8.0, 26.0, 250.0);
  PowerClassifier clf;
  const auto res = replay_subject({}, s, config(250, 60, kFixedWindowTau), {&clf, nullptr, &f});
  for (std::size_t i = 0; i < s.test_trials.size(); ++i) {
    const Prediction batch = clf.classify(apply_offline(f, s.test_trials[i].data, FilterMode::causal));
    CHECK(res.records[i].pred == batch.cls);
    CHECK(res.records[i].p == batch.p);
    CHECK(res.records[i].samples_used == 250);
  }
}

TEST_CASE("latency log holds one entry per classify call and the summary recomputes independently") {
  const SubjectData s = subject(15, 250, 5);
  const FilterCoeffs f = design_bandpass(5, 8.0, 26.0, 250.0);
  PowerClassifier clf;
  const auto res = replay_subject({}, s, config(250, 60, 0.62), {&clf, nullptr, &f});
  std::vector<double> all;
  for (const auto& r : res.records) {
    const auto windows = static_cast<std::size_t>(r.samples_used == 250 ? (250 - 60) / 10 + 1 : (r.samples_used - 60) / 10 + 1);
    CHECK(r.update_ms.size() == windows);
    all.insert(all.end(), r.update_ms.begin(), r.update_ms.end());
  }
  long double sum = 0, ss = 0, mx = 0;
  for (double v : all) {
    sum += v;
    mx = std::max<long double>(mx, v);
  }
  const long double mean = sum / static_cast<long double>(all.size());
  for (double v : all) ss += (v - mean) * (v - mean);
  const long double sd = std::sqrt(ss / static_cast<long double>(all.size()));
  CHECK(res.latency.all.count == all.size());
  CHECK(std::fabs(res.latency.all.mean_ms - static_cast<double>(mean)) < 1e-9);
  CHECK(std::fabs(res.latency.all.std_ms - static_cast<double>(sd)) < 1e-9);
  CHECK(res.latency.all.max_ms == static_cast<double>(mx));
  CHECK(res.latency.per_model.at("primary").count == all.size());
}

TEST_CASE("summarize_latency counts updates over the deadline") {
  const std::vector<double> ms{1.0, 50.0, 40.0, 41.0};
  const LatencySummary s = summarize_latency(ms, 40.0);
  CHECK(s.overruns == 2);
  CHECK(s.mean_ms == doctest::Approx(33.0));
  CHECK(s.max_ms == 50.0);
  CHECK(summarize_latency({}, 40.0).count == 0);
}

TEST_CASE("realtime replay paces chunks and flags every slow update") {
  const SubjectData s = subject(2, 50, 6);
  PowerClassifier clf;
  DelayedClassifier slow(clf, std::chrono::milliseconds(50));
  ReplayPlan plan;
  plan.clock = ClockMode::realtime;
  const auto start = std::chrono::steady_clock::now();
  const auto res = replay_subject(plan, s, config(50, 50, kFixedWindowTau), {&slow, nullptr, nullptr});
  const double elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  CHECK(elapsed >= 2 * 5 * 40.0 - 1.0);
  CHECK(res.latency.all.count == 2);
  CHECK(res.latency.all.overruns == 2);
  CHECK(res.warnings.size() == 2);
}

TEST_CASE("cross-mode replay requires an EA classifier and max_trials caps the session") {
  const SubjectData s = subject(14, 100, 7);
  PowerClassifier clf;
  FrdwConfig c = config(100, 60, 0.6);
  c.mode = DecodeMode::cross;
  CHECK_THROWS_AS(replay_subject({}, s, c, {&clf, nullptr, nullptr}), ConfigError);
  ReplayPlan plan;
  plan.max_trials = 12;
  const auto res = replay_subject(plan, s, c, {&clf, &clf, nullptr, "no_ea", "ea"});
  CHECK(res.records.size() == 12);
  CHECK(res.latency.per_model.at("no_ea").count == 10);
  CHECK(res.latency.per_model.count("ea") == 1);
}

TEST_CASE("record log lines round-trip") {
  DecisionRecord r;
  r.trial = 4;
  r.label = 1;
  r.pred = 0;
  r.p = 0.7234567890123;
  r.samples_used = 80;
  r.decision_time_s = 0.32;
  r.update_ms = {0.25, 1.0 / 3.0, 2.5};
  r.used_ea = true;
  const DecisionRecord back = record_from_json_line(record_to_json_line(r));
  CHECK(back.trial == r.trial);
  CHECK(back.label == r.label);
  CHECK(back.pred == r.pred);
  CHECK(back.p == r.p);
  CHECK(back.samples_used == r.samples_used);
  CHECK(back.decision_time_s == r.decision_time_s);
  CHECK(back.update_ms == r.update_ms);
  CHECK(back.used_ea == r.used_ea);
  r.label.reset();
  CHECK_FALSE(record_from_json_line(record_to_json_line(r)).label.has_value());
  CHECK_THROWS_AS(record_from_json_line("{\"trial\": 1}"), DataError);
}
