// Acceptance suite: one PASS/FAIL line per primary criterion, exit status 1 if any fail.
#include "frdw/alignment.hpp"
#include "frdw/controller.hpp"
#include "frdw/csp.hpp"
#include "frdw/experiment.hpp"
#include "frdw/metrics.hpp"
#include "frdw/pipeline.hpp"
#include "frdw/preproc.hpp"
#include "frdw/replay.hpp"
#include "frdw/synthetic.hpp"
#include "oracles/jacobi.hpp"
#include "oracles/stats.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace frdw;

namespace {

struct Outcome {
  bool pass{false};
  std::string detail;
};

int failures = 0;

void criterion(const char* name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s  %-24s %s  [%.2f s]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), s);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome itr_formula() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string why;
  if (itr(1.0, 4, 1.0) != 120.0) ok = false, why += " itr(1,4,1)!=120";
  for (int m : {2, 3, 4}) {
    for (double p = 0.0; p < 1.0 / m; p += 0.01)
      if (itr(p, m, 1.0) != 0.0) ok = false, why += " zero-rule";
  }
  const double v = itr(0.9, 2, 3.0);
  const double ref = oracle::itr(0.9, 2, 3.0);
  if (std::fabs(v - ref) > 1e-3) ok = false, why += " oracle mismatch";
  // 100 grid points: 4 class counts x 25 accuracies, each checked for P-monotonicity and T-scaling
  int violations = 0, points = 0;
  for (int m : {2, 3, 4, 8}) {
    double last = -1.0;
    for (int i = 1; i <= 25; ++i, ++points) {
      const double p = 1.0 / m + (1.0 - 1.0 / m) * i / 25.0;
      const double here = itr(p, m, 1.0);
      if (!(here > last)) ++violations;
      if (itr(p, m, 0.8) != 2.0 * itr(p, m, 1.6)) ++violations;
      if (!(itr(p, m, 0.8) > itr(p, m, 0.9))) ++violations;
      last = here;
    }
  }
  if (violations) ok = false;
  const double runtime = seconds_since(t0);
  if (runtime >= 1.0) ok = false, why += " slow";
  return {ok, fmt("itr(1,4,1)=%.1f itr(0.9,2,3)=%.6f oracle=%.6f (literal 10.6096 differs by %.1e) grid=%d violations=%d%s",
                  itr(1.0, 4, 1.0), v, ref, std::fabs(ref - 10.6096), points, violations, why.c_str())};
}

Outcome ea_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int sets = 0;
  for (int s = 0; s < 50; ++s, ++sets) {
    const Index c = s % 2 == 0 ? 3 : 22;
    const Matrix mix = fixture::random_mixing(c, rng);
    std::vector<Matrix> xs;
    EaState st(c);
    for (int i = 0; i < 20; ++i) {
      xs.push_back(mix * fixture::random_matrix(c, 250, rng));
      st.accumulate(xs.back());
    }
    st.finalize();
    Matrix mean = Matrix::Zero(c, c);
    for (const auto& x : xs) {
      const Matrix a = align(x, st.inverse_sqrt());
      mean += a * a.transpose();
    }
    mean /= static_cast<double>(xs.size());
    worst = std::max(worst, (mean - Matrix::Identity(c, c)).norm());
  }
  const double runtime = seconds_since(t0);
  return {worst < 1e-6 && runtime < 10.0, fmt("%d sets (C=3,22) max |mean cov - I|_F=%.2e", sets, worst)};
}

Outcome inverse_sqrt() {
  std::mt19937_64 rng(202);
  double worst = 0.0, worst_oracle = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Index n = 2 + i % 21;
    const Matrix r = fixture::random_spd(n, rng);
    const Matrix m = inverse_sqrt_spd(r);
    worst = std::max(worst, (m * r * m - Matrix::Identity(n, n)).norm());
    const auto ref = oracle::inverse_sqrt(fixture::to_oracle(r));
    worst_oracle = std::max(worst_oracle, static_cast<double>(oracle::frobenius_diff(fixture::to_oracle(m), ref)));
  }
  return {worst < 1e-8 && worst_oracle < 1e-8,
          fmt("100 SPD up to 22x22 max |MRM - I|_F=%.2e, max |M - M_jacobi|_F=%.2e", worst, worst_oracle)};
}

Outcome fr_exhaustive() {
  std::mt19937_64 rng(303);
  long checked = 0, bad = 0;
  for (Index l = 1; l <= 20; ++l) {
    const Matrix part = fixture::random_matrix(4, l, rng);
    for (Index n = l; n <= 40; ++n) {
      const Matrix out = front_end_replicate(part, n);
      ++checked;
      bool ok = out.cols() == n && out.leftCols(l) == part;
      for (Index j = 0; ok && j < n; ++j) ok = out.col(j) == part.col(j % l);
      for (Index j = l; ok && j < n; ++j) ok = out.col(j) == out.col(j - l);
      bad += !ok;
    }
  }
  return {bad == 0, fmt("%ld (L,N) pairs, %ld mismatches (bit-exact)", checked, bad)};
}

Outcome degeneracies() {
  SyntheticSpec spec;
  spec.n_subjects = 1;
  spec.n_samples = 750;
  spec.train_per_class = 36;
  spec.test_per_class = 100;
  spec.seed = 404;
  const DatasetBundle b = make_synthetic_bundle(spec);
  const SubjectData& subj = b.subjects[0];
  PipelineSpec ps;
  ps.n_samples = 250;
  ps.augment.target_len = 250;
  const FilterCoeffs f = design_filter(ps, b.fs);
  const Pipeline pipe = fit_pipeline(preprocess_offline(subj.train_trials, f), ps, 2, false);

  FrdwConfig cfg;
  cfg.n_samples = 250;
  cfg.min_len = 60;
  long mismatches = 0;
  std::size_t trials = 0;
  for (double tau : {0.0, kFixedWindowTau}) {
    cfg.tau = tau;
    const ReplayResult r = replay_subject({}, subj, cfg, {&pipe, nullptr, &pipe.filter()});
    trials = r.records.size();
    for (std::size_t i = 0; i < r.records.size(); ++i) {
      const Matrix y = apply_offline(pipe.filter(), subj.test_trials[i].data, FilterMode::causal);
      const Index len = tau == 0.0 ? cfg.min_len : cfg.n_samples;
      const Prediction batch =
          pipe.classify(len == cfg.n_samples ? Matrix(y.leftCols(len)) : front_end_replicate(y.leftCols(len), 250));
      const auto& rec = r.records[i];
      if (rec.pred != batch.cls || rec.p != batch.p || rec.samples_used != len || rec.label != subj.test_trials[i].label)
        ++mismatches;
    }
  }
  return {mismatches == 0 && trials == 200,
          fmt("%zu trials x {tau=0 vs FW(L=60), tau unreachable vs FW(N=250)}: %ld record mismatches", trials, mismatches)};
}

Outcome tau_monotonicity() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(0.35, 1.0);
  const auto chunks = make_stream(fixture::random_matrix(2, 250, rng), 10);
  FrdwConfig cfg;
  cfg.n_samples = 250;
  cfg.min_len = 60;
  long violations = 0;
  for (int seq = 0; seq < 100; ++seq) {
    std::vector<double> script;
    for (int i = 0; i < 20; ++i) script.push_back(u(rng));
    Index last = 0;
    for (int k = 0; k < 10; ++k) {
      cfg.tau = 0.1 * k + 0.05;
      fixture::ScriptedClassifier clf(script);
      const Index used = run_trial_within(chunks, cfg, clf, {}, 250.0).samples_used;
      // first-crossing oracle
      Index expect = 250;
      for (std::size_t w = 0; w < script.size(); ++w) {
        const Index l = 60 + 10 * static_cast<Index>(w);
        if (l >= 250) break;
        if (script[w] >= cfg.tau) {
          expect = l;
          break;
        }
      }
      if (used < last || used != expect) ++violations;
      last = used;
    }
  }
  return {violations == 0, fmt("100 sequences x 10 thresholds, %ld violations", violations)};
}

Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticSpec spec;
  spec.seed = 7;
  const DatasetBundle b = make_synthetic_bundle(spec);
  ExperimentConfig cfg;
  cfg.frdw = FrdwConfig::table_defaults(DecodeMode::within, 2, 250);
  int pass = 0;
  std::ostringstream rows;
  for (const auto& subj : b.subjects) {
    const WithinModel m = train_within_subject(subj, b.n_classes, cfg);
    const auto fw = replay_strategy(subj, Strategy::fw, cfg, m.pipeline, nullptr);
    const auto dw = replay_strategy(subj, Strategy::frdw, cfg, m.pipeline, nullptr);
    const SessionMetrics a = session_metrics(fw.records, b.fs, b.n_classes);
    const SessionMetrics d = session_metrics(dw.records, b.fs, b.n_classes);
    const bool ok = d.itr >= a.itr && a.accuracy - d.accuracy <= 0.05;
    pass += ok;
    rows << fmt("\n      %-3s N=%-4ld FW acc %.3f itr %6.2f | FRDW acc %.3f itr %6.2f T %.2fs %s", subj.id.c_str(),
                static_cast<long>(m.pipeline.n_samples()), a.accuracy, a.itr, d.accuracy, d.itr, d.mean_time_s,
                ok ? "ok" : "x");
  }
  const double runtime = seconds_since(t0);
  return {pass >= 8 && runtime < 300.0, fmt("%d/9 subjects with FRDW ITR >= FW ITR and acc drop <= 0.05", pass) + rows.str()};
}

Outcome streaming_filter() {
  const FilterCoeffs f = design_bandpass(5, 8.0, 26.0, 250.0);
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<Index> len(1, 64);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const Matrix x = fixture::random_matrix(22, 750, rng, 10.0);
    const Matrix whole = apply_offline(f, x, FilterMode::causal);
    FilterState st(f, 22);
    Matrix out(22, 750);
    for (Index pos = 0; pos < 750;) {
      const Index l = std::min(len(rng), 750 - pos);
      out.middleCols(pos, l) = apply_streaming(f, st, x.middleCols(pos, l));
      pos += l;
    }
    worst = std::max(worst, (out - whole).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-12, fmt("50 random chunkings (22x750) max |chunked - one-shot|=%.2e", worst)};
}

Outcome csp_whitening() {
  double worst = 0.0;
  int models = 0;
  SyntheticSpec spec;
  spec.seed = 707;
  spec.n_subjects = 4;
  const DatasetBundle b = make_synthetic_bundle(spec);
  const FilterCoeffs f = design_bandpass(5, 8.0, 26.0, b.fs);
  for (const auto& subj : b.subjects) {
    const auto pre = preprocess_offline(subj.train_trials, f);
    for (int n_filters : {2, 6, 22}) {
      const CspModel m = fit_csp_binary(pre, n_filters);
      std::vector<const Trial*> c1, c2;
      for (const auto& t : pre) (*t.label == 0 ? c1 : c2).push_back(&t);
      const Matrix s = normalized_mean_covariance(c1) + normalized_mean_covariance(c2);
      const Matrix w = m.filters;
      worst = std::max(worst, (w * s * w.transpose() - Matrix::Identity(w.rows(), w.rows())).norm());
      ++models;
    }
  }
  SyntheticSpec four;
  four.seed = 708;
  four.n_subjects = 1;
  four.n_classes = 4;
  const DatasetBundle b4 = make_synthetic_bundle(four);
  const CspModel ovr = fit_csp_ovr(preprocess_offline(b4.subjects[0].train_trials, f), 4, 4);
  const bool ok = worst < 1e-6 && ovr.n_features() == 16 && ovr.n_channels() == 22;
  return {ok, fmt("%d binary models max |W(S1+S2)W^T - I|_F=%.2e; ovr M=4 rows=%ld", models, worst,
                  static_cast<long>(ovr.n_features()))};
}

Outcome latency() {
  SyntheticSpec spec;
  spec.seed = 808;
  spec.n_subjects = 1;
  spec.test_per_class = 3;
  const DatasetBundle b = make_synthetic_bundle(spec);
  const SubjectData& subj = b.subjects[0];
  PipelineSpec ps;
  ps.n_samples = 750;
  ps.augment.target_len = 750;
  const FilterCoeffs f = design_filter(ps, b.fs);
  const Pipeline pipe = fit_pipeline(preprocess_offline(subj.train_trials, f), ps, 2, false);
  FrdwConfig cfg;
  cfg.n_samples = 750;
  cfg.min_len = 60;
  cfg.tau = 1.0;  // every window from 60 to 750 samples is classified
  ReplayPlan plan;
  plan.clock = ClockMode::realtime;
  plan.max_trials = 4;
  const ReplayResult r = replay_subject(plan, subj, cfg, {&pipe, nullptr, &pipe.filter()});
  const LatencySummary& s = r.latency.all;
  const bool ok = s.mean_ms < 40.0 && s.overruns == 0;
  return {ok, fmt("22ch N=750 realtime: %zu updates mean %.3f ms std %.3f max %.3f overruns %zu; 10 ms target %s",
                  s.count, s.mean_ms, s.std_ms, s.max_ms, s.overruns, s.mean_ms < 10.0 ? "met" : "missed")};
}

Outcome t_test() {
  const std::vector<double> d{1, -1, 2}, z{0, 0, 0};
  const TTestResult r = paired_t_test(d, z);
  const auto ref = oracle::paired_t(d, z);
  const TTestResult same = paired_t_test(d, d);
  const bool ok = std::fabs(r.t - 0.7559) < 1e-3 && std::fabs(r.p - 0.5286) < 1e-3 && std::fabs(r.t - ref.t) < 1e-9 &&
                  std::fabs(r.p - ref.p) < 1e-8 && same.p == 1.0 && same.t == 0.0;
  return {ok, fmt("d=[1,-1,2]: t=%.6f p=%.6f (oracle t=%.6f p=%.6f); a=b: t=%g p=%g", r.t, r.p, ref.t, ref.p, same.t,
                  same.p)};
}

} // namespace

int main() {
  criterion("itr-formula", itr_formula);
  criterion("ea-identity", ea_identity);
  criterion("inverse-sqrt", inverse_sqrt);
  criterion("fr-correctness", fr_exhaustive);
  criterion("dw-degeneracies", degeneracies);
  criterion("tau-monotonicity", tau_monotonicity);
  criterion("end-to-end", end_to_end);
  criterion("streaming-filter", streaming_filter);
  criterion("csp-whitening", csp_whitening);
  criterion("latency-budget", latency);
  criterion("t-test", t_test);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
