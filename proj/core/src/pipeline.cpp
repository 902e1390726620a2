#include "frdw/pipeline.hpp"

#include "hex_codec.hpp"
#include "spec_json.hpp"

#include <fstream>
#include <sstream>

namespace frdw {

using detail::json;

namespace {

constexpr int kPipelineFormatVersion = 1;

std::vector<double> flatten_rows(const Matrix& m) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
  }
  return v;
}

std::vector<double> flatten_rows(const RowMatrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::vector<double> decode_exact(const json& j, const char* key, std::size_t expected, const std::string& ctx) {
  if (!j.contains(key) || !j.at(key).is_string()) throw DataError("pipeline file: " + ctx + "." + key + " missing");
  auto v = detail::decode_f32_hex(j.at(key).get<std::string>());
  if (v.size() != expected) {
    throw DataError("pipeline file: " + ctx + "." + key + " holds " + std::to_string(v.size()) + " values, expected " +
                    std::to_string(expected));
  }
  return v;
}

Matrix rows_to_matrix(const std::vector<double>& v, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

template <typename T>
T need(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw DataError("pipeline file: " + ctx + "." + key + " missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError("pipeline file: " + ctx + "." + key + ": " + e.what());
  }
}

json classifier_json(const ProbClassifier& clf) {
  json out;
  out["kind"] = to_string(clf.kind());
  out["n_classes"] = clf.n_classes();
  out["n_features"] = clf.n_features();
  out["training"] = json{{"iterations", clf.info().iterations},
                         {"converged", clf.info().converged},
                         {"residual", clf.info().residual}};
  if (const auto* lr = std::get_if<LogRegModel>(&clf.params())) {
    out["weights"] = detail::encode_f32_hex(flatten_rows(lr->weights));
    out["bias"] = detail::encode_f32_hex(to_std(lr->bias));
    out["feature_mean"] = detail::encode_f32_hex(to_std(lr->feature_mean));
    out["feature_scale"] = detail::encode_f32_hex(to_std(lr->feature_scale));
  } else {
    const auto& svm = std::get<SvmModel>(clf.params());
    out["kernel"] = json{{"kind", to_string(svm.kernel.kind)}, {"gamma", svm.kernel.gamma}, {"c", svm.kernel.c}};
    json machines = json::array();
    for (const auto& m : svm.machines) {
      machines.push_back(json{{"n_sv", m.support_vectors.rows()},
                              {"support_vectors", detail::encode_f32_hex(flatten_rows(m.support_vectors))},
                              {"coef", detail::encode_f32_hex(to_std(m.coef))},
                              {"rho", m.rho},
                              {"platt_a", m.platt_a},
                              {"platt_b", m.platt_b}});
    }
    out["machines"] = machines;
  }
  return out;
}

ProbClassifier classifier_from(const json& j) {
  const std::string ctx = "classifier";
  const auto kind = need<std::string>(j, "kind", ctx);
  const int m = need<int>(j, "n_classes", ctx);
  const int k = need<int>(j, "n_features", ctx);
  if (m < 2 || k < 1) throw DataError("pipeline file: invalid classifier dimensions");
  TrainingInfo info;
  if (j.contains("training")) {
    const auto& t = j.at("training");
    info.iterations = need<long>(t, "iterations", "training");
    info.converged = need<bool>(t, "converged", "training");
    info.residual = need<double>(t, "residual", "training");
  }
  const auto mu = static_cast<std::size_t>(m);
  const auto ku = static_cast<std::size_t>(k);
  if (kind == "logreg") {
    LogRegModel lr;
    lr.weights = rows_to_matrix(decode_exact(j, "weights", mu * ku, ctx), m, k);
    lr.bias = to_vector(decode_exact(j, "bias", mu, ctx));
    lr.feature_mean = to_vector(decode_exact(j, "feature_mean", ku, ctx));
    lr.feature_scale = to_vector(decode_exact(j, "feature_scale", ku, ctx));
    return ProbClassifier(std::move(lr), m, k, info);
  }
  if (kind != "svm") throw DataError("pipeline file: unknown classifier kind '" + kind + "'");
  SvmModel svm;
  const auto& kj = need<json>(j, "kernel", ctx);
  const auto kk = need<std::string>(kj, "kind", "kernel");
  svm.kernel.kind = kk == "linear" ? KernelSpec::Kind::linear : KernelSpec::Kind::rbf;
  svm.kernel.gamma = need<double>(kj, "gamma", "kernel");
  svm.kernel.c = need<double>(kj, "c", "kernel");
  for (const auto& mj : need<json>(j, "machines", ctx)) {
    BinarySvm b;
    const auto n_sv = need<Index>(mj, "n_sv", "machine");
    const auto sv = decode_exact(mj, "support_vectors", static_cast<std::size_t>(n_sv) * ku, "machine");
    b.support_vectors = Eigen::Map<const RowMatrix>(sv.data(), n_sv, k);
    b.coef = to_vector(decode_exact(mj, "coef", static_cast<std::size_t>(n_sv), "machine"));
    b.rho = need<double>(mj, "rho", "machine");
    b.platt_a = need<double>(mj, "platt_a", "machine");
    b.platt_b = need<double>(mj, "platt_b", "machine");
    svm.machines.push_back(std::move(b));
  }
  const std::size_t expected = m == 2 ? 1 : mu;
  if (svm.machines.size() != expected) throw DataError("pipeline file: wrong number of SVM machines");
  return ProbClassifier(std::move(svm), m, k, info);
}

} // namespace

Trial preprocess_offline(const Trial& raw, const FilterCoeffs& filter) {
  return apply_offline(filter, detrend(raw), FilterMode::zero_phase);
}

std::vector<Trial> preprocess_offline(std::span<const Trial> raw, const FilterCoeffs& filter) {
  std::vector<Trial> out;
  out.reserve(raw.size());
  for (const auto& t : raw) out.push_back(preprocess_offline(t, filter));
  return out;
}

EaState reference_of(std::span<const Trial> preprocessed, Index n_samples) {
  if (preprocessed.empty()) throw DataError("reference_of: no trials");
  EaState state(preprocessed.front().channels());
  for (const auto& t : preprocessed) state.accumulate(crop_to_length(t, n_samples).data);
  state.finalize();
  return state;
}

std::vector<Trial> align_by_own_reference(std::span<const Trial> preprocessed, Index n_samples) {
  const EaState state = reference_of(preprocessed, n_samples);
  std::vector<Trial> out;
  out.reserve(preprocessed.size());
  for (const auto& t : preprocessed) out.push_back(align(t, state));
  return out;
}

FilterCoeffs design_filter(const PipelineSpec& spec, double fs) {
  return design_bandpass(spec.filter_order, spec.band_low_hz, spec.band_high_hz, fs);
}

Pipeline::Pipeline(PipelineSpec spec, FilterCoeffs filter, CspModel csp, ProbClassifier classifier, bool aligned,
                   int n_classes)
    : spec_(std::move(spec)), filter_(std::move(filter)), csp_(std::move(csp)), classifier_(std::move(classifier)),
      aligned_(aligned), n_classes_(n_classes) {}

Vector Pipeline::features(const Matrix& window) const { return extract_features(csp_, window); }

Prediction Pipeline::classify(const Matrix& window) const {
  if (window.cols() != spec_.n_samples) {
    throw DataError("Pipeline::classify: window has " + std::to_string(window.cols()) + " samples, N = " +
                    std::to_string(spec_.n_samples));
  }
  return classifier_.predict_proba(features(window));
}

Pipeline fit_pipeline(std::span<const Trial> preprocessed, const PipelineSpec& spec_in, int n_classes, bool aligned) {
  if (preprocessed.empty()) throw DataError("fit_pipeline: no training trials");
  PipelineSpec spec = spec_in;
  spec.augment.target_len = spec.n_samples;
  spec.augment.validate();
  const double fs = preprocessed.front().fs;
  const Index channels = preprocessed.front().channels();
  if (channels < 2) throw ConfigError("fit_pipeline: CSP needs at least two channels");

  const std::vector<Trial> windows = augment_all(preprocessed, spec.augment);
  CspModel csp;
  if (n_classes == 2) {
    const int usable = static_cast<int>(channels - channels % 2);
    csp = fit_csp_binary(windows, std::max(2, std::min(spec.csp_filters, usable)));
  } else {
    csp = fit_csp_ovr(windows, n_classes, std::min<int>(spec.csp_rows_per_class, static_cast<int>(channels)));
  }

  Matrix feats(static_cast<Index>(windows.size()), csp.n_features());
  std::vector<int> labels;
  labels.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    feats.row(static_cast<Index>(i)) = extract_features(csp, windows[i].data).transpose();
    labels.push_back(*windows[i].label);
  }
  ProbClassifier clf = spec.classifier.kind == ClassifierKind::logreg
                           ? train_logreg(feats, labels, n_classes, spec.classifier.logreg)
                           : train_svm(feats, labels, n_classes, spec.classifier.kernel, spec.classifier.svm);
  return Pipeline(spec, design_filter(spec, fs), std::move(csp), std::move(clf), aligned, n_classes);
}

std::string Pipeline::to_json() const {
  json j;
  j["format"] = "frdw-pipeline";
  j["format_version"] = kPipelineFormatVersion;
  j["spec"] = detail::to_json(spec_);
  j["fs"] = filter_.fs;
  j["aligned"] = aligned_;
  j["n_classes"] = n_classes_;
  j["n_channels"] = csp_.n_channels();
  j["csp"] = json{{"layout", to_string(csp_.layout)},
                  {"n_rows", csp_.filters.rows()},
                  {"n_cols", csp_.filters.cols()},
                  {"rows_per_class", csp_.rows_per_class},
                  {"filters", detail::encode_f32_hex(flatten_rows(csp_.filters))},
                  {"eigenvalues", detail::encode_f32_hex(to_std(csp_.eigenvalues))}};
  j["classifier"] = classifier_json(classifier_);
  return j.dump(2) + "\n";
}

Pipeline Pipeline::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("pipeline file: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "frdw-pipeline") throw DataError("pipeline file: not a pipeline");
  if (need<int>(j, "format_version", "pipeline") != kPipelineFormatVersion) {
    throw DataError("pipeline file: unsupported format_version");
  }
  PipelineSpec spec = detail::pipeline_spec_from_json(need<json>(j, "spec", "pipeline"));
  const double fs = need<double>(j, "fs", "pipeline");
  const auto& cj = need<json>(j, "csp", "pipeline");
  CspModel csp;
  csp.layout = csp_layout_from_string(need<std::string>(cj, "layout", "csp"));
  const auto rows = need<Index>(cj, "n_rows", "csp");
  const auto cols = need<Index>(cj, "n_cols", "csp");
  csp.rows_per_class = need<int>(cj, "rows_per_class", "csp");
  csp.n_classes = need<int>(j, "n_classes", "pipeline");
  csp.filters = rows_to_matrix(decode_exact(cj, "filters", static_cast<std::size_t>(rows * cols), "csp"), rows, cols);
  csp.eigenvalues = to_vector(decode_exact(cj, "eigenvalues", static_cast<std::size_t>(rows), "csp"));
  ProbClassifier clf = classifier_from(need<json>(j, "classifier", "pipeline"));
  if (clf.n_features() != rows) throw DataError("pipeline file: classifier/CSP dimension mismatch");
  const int n_classes = csp.n_classes;
  const bool aligned = need<bool>(j, "aligned", "pipeline");
  return Pipeline(spec, design_filter(spec, fs), std::move(csp), std::move(clf), aligned, n_classes);
}

void Pipeline::save(const std::filesystem::path& file) const {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + file.string());
  out << to_json();
}

Pipeline Pipeline::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open pipeline file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

} // namespace frdw
