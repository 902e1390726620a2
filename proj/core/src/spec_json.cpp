#include "spec_json.hpp"

namespace frdw::detail {

json to_json(const AugmentSpec& a) {
  return json{{"scheme", to_string(a.scheme)}, {"stride", a.stride}, {"fr_window", a.fr_window}};
}

AugmentSpec augment_from_json(const json& j, AugmentSpec a) {
  if (!j.is_object()) throw ConfigError("augment: expected an object");
  std::string scheme = to_string(a.scheme);
  read_field(j, "scheme", scheme);
  a.scheme = augment_scheme_from_string(scheme);
  read_field(j, "stride", a.stride);
  read_field(j, "fr_window", a.fr_window);
  return a;
}

json to_json(const ClassifierSpec& c) {
  return json{{"kind", to_string(c.kind)},
              {"l2", c.logreg.l2},
              {"max_iter", c.logreg.max_iter},
              {"grad_tol", c.logreg.grad_tol},
              {"kernel", to_string(c.kernel.kind)},
              {"gamma", c.kernel.gamma},
              {"c", c.kernel.c},
              {"svm_tol", c.svm.tol}};
}

ClassifierSpec classifier_from_json(const json& j, ClassifierSpec c) {
  if (!j.is_object()) throw ConfigError("classifier: expected an object");
  std::string kind = to_string(c.kind);
  read_field(j, "kind", kind);
  if (kind == "logreg") c.kind = ClassifierKind::logreg;
  else if (kind == "svm") c.kind = ClassifierKind::svm;
  else throw ConfigError("classifier.kind must be logreg|svm, got '" + kind + "'");
  read_field(j, "l2", c.logreg.l2);
  read_field(j, "max_iter", c.logreg.max_iter);
  read_field(j, "grad_tol", c.logreg.grad_tol);
  std::string kernel = to_string(c.kernel.kind);
  read_field(j, "kernel", kernel);
  if (kernel == "linear") c.kernel.kind = KernelSpec::Kind::linear;
  else if (kernel == "rbf") c.kernel.kind = KernelSpec::Kind::rbf;
  else throw ConfigError("classifier.kernel must be linear|rbf, got '" + kernel + "'");
  read_field(j, "gamma", c.kernel.gamma);
  read_field(j, "c", c.kernel.c);
  read_field(j, "svm_tol", c.svm.tol);
  if (c.logreg.l2 < 0.0) throw ConfigError("classifier.l2 must be >= 0");
  if (c.kernel.c <= 0.0) throw ConfigError("classifier.c must be > 0");
  return c;
}

json to_json(const PipelineSpec& p) {
  return json{{"filter_order", p.filter_order},
              {"band_low_hz", p.band_low_hz},
              {"band_high_hz", p.band_high_hz},
              {"n_samples", p.n_samples},
              {"augment", to_json(p.augment)},
              {"csp_filters", p.csp_filters},
              {"csp_rows_per_class", p.csp_rows_per_class},
              {"classifier", to_json(p.classifier)}};
}

PipelineSpec pipeline_spec_from_json(const json& j, PipelineSpec p) {
  if (!j.is_object()) throw ConfigError("pipeline: expected an object");
  read_field(j, "filter_order", p.filter_order);
  read_field(j, "band_low_hz", p.band_low_hz);
  read_field(j, "band_high_hz", p.band_high_hz);
  read_field(j, "n_samples", p.n_samples);
  if (j.contains("augment")) p.augment = augment_from_json(j.at("augment"), p.augment);
  read_field(j, "csp_filters", p.csp_filters);
  read_field(j, "csp_rows_per_class", p.csp_rows_per_class);
  if (j.contains("classifier")) p.classifier = classifier_from_json(j.at("classifier"), p.classifier);
  p.augment.target_len = p.n_samples;
  return p;
}

json to_json(const FrdwConfig& f) {
  return json{{"n_samples", f.n_samples}, {"chunk", f.chunk}, {"min_len", f.min_len},
              {"tau", f.tau},             {"n_ea", f.n_ea},   {"mode", to_string(f.mode)}};
}

FrdwConfig frdw_from_json(const json& j, FrdwConfig f) {
  if (!j.is_object()) throw ConfigError("frdw: expected an object");
  read_field(j, "n_samples", f.n_samples);
  read_field(j, "chunk", f.chunk);
  read_field(j, "min_len", f.min_len);
  read_field(j, "tau", f.tau);
  read_field(j, "n_ea", f.n_ea);
  std::string mode = to_string(f.mode);
  read_field(j, "mode", mode);
  f.mode = decode_mode_from_string(mode);
  return f;
}

} // namespace frdw::detail
