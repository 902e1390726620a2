#pragma once

#include "frdw/types.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace frdw {

struct SubjectData {
  std::string id;
  std::vector<Trial> train_trials;
  std::vector<Trial> test_trials;
};

struct DatasetBundle {
  std::vector<SubjectData> subjects;
  int n_classes{0};
  std::vector<std::string> channel_names;
  double fs{250.0};
  // Free-form provenance notes carried through the manifest (e.g. converter choices).
  std::string notes;

  Index n_channels() const { return static_cast<Index>(channel_names.size()); }
  const SubjectData& subject(const std::string& id) const;
};

inline constexpr int kBundleFormatVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";

// Checks every bundle invariant. Within one split all trials must share a sample count,
// since the payload layout stores one n_samples per split.
void validate_bundle(const DatasetBundle& bundle);

// Bundle directory layout:
//   manifest.json               format_version, fs, n_channels, n_classes, channel_names,
//                               subjects[{id, train:{file,n_trials,n_samples,labels}, test:{...}}]
//   <payload>.f32               IEEE-754 binary32 little-endian, index t*C*S + c*S + s
DatasetBundle load_bundle(const std::filesystem::path& dir);
void write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);

// Validation hold-out policies.
struct LastKPerClass {
  int k{12};
};
struct LastFraction {
  double fraction{0.2};
};
using SplitPolicy = std::variant<LastKPerClass, LastFraction>;

// Splits subject.train_trials into (train, validation). Both keep the original order.
std::pair<std::vector<Trial>, std::vector<Trial>>
split_validation(const SubjectData& subject, const SplitPolicy& policy);

} // namespace frdw
