#pragma once

#include "frdw/augmentation.hpp"
#include "frdw/classifier.hpp"
#include "frdw/controller.hpp"
#include "frdw/csp.hpp"
#include "frdw/preproc.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace frdw {

struct ClassifierSpec {
  ClassifierKind kind{ClassifierKind::logreg};
  LogRegOptions logreg;
  KernelSpec kernel;
  SvmOptions svm;
};

struct PipelineSpec {
  int filter_order{5};
  double band_low_hz{8.0};
  double band_high_hz{26.0};
  Index n_samples{250};     // N
  AugmentSpec augment;      // target_len is forced to n_samples
  int csp_filters{6};       // binary problems; clamped to the channel count
  int csp_rows_per_class{4};
  ClassifierSpec classifier;
};

// Offline preprocessing of a recorded trial: detrend, then zero-phase bandpass.
Trial preprocess_offline(const Trial& raw, const FilterCoeffs& filter);
std::vector<Trial> preprocess_offline(std::span<const Trial> raw, const FilterCoeffs& filter);

// Reference of a trial set: R^{-1/2} over the first n_samples of every trial.
EaState reference_of(std::span<const Trial> preprocessed, Index n_samples);
// Aligns every trial of one subject by that subject's own reference.
std::vector<Trial> align_by_own_reference(std::span<const Trial> preprocessed, Index n_samples);

// CSP + probabilistic classifier over length-N windows, plus the filter used online.
class Pipeline : public TrialClassifier {
public:
  Pipeline() = default;
  Pipeline(PipelineSpec spec, FilterCoeffs filter, CspModel csp, ProbClassifier classifier, bool aligned,
           int n_classes);

  Prediction classify(const Matrix& window) const override;
  Vector features(const Matrix& window) const;

  const PipelineSpec& spec() const { return spec_; }
  const FilterCoeffs& filter() const { return filter_; }
  const CspModel& csp() const { return csp_; }
  const ProbClassifier& classifier() const { return classifier_; }
  bool aligned() const { return aligned_; }
  int n_classes() const { return n_classes_; }
  Index n_samples() const { return spec_.n_samples; }

  // JSON text; CSP rows and classifier arrays are hex-encoded little-endian binary32.
  std::string to_json() const;
  static Pipeline from_json(const std::string& text);
  void save(const std::filesystem::path& file) const;
  static Pipeline load(const std::filesystem::path& file);

private:
  PipelineSpec spec_;
  FilterCoeffs filter_;
  CspModel csp_;
  ProbClassifier classifier_;
  bool aligned_{false};
  int n_classes_{2};
};

FilterCoeffs design_filter(const PipelineSpec& spec, double fs);

// Fits CSP and the classifier on already preprocessed (and, for EA pipelines, aligned)
// full trials: crop/augment to N, CSP on the augmented set, features, classifier.
Pipeline fit_pipeline(std::span<const Trial> preprocessed, const PipelineSpec& spec, int n_classes, bool aligned);

} // namespace frdw
