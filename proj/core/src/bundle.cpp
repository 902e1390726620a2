#include "frdw/bundle.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

namespace frdw {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

struct SplitHeader {
  std::string file;
  std::size_t n_trials{0};
  Index n_samples{0};
  std::vector<std::optional<int>> labels;
};

bool is_safe_file_name(const std::string& name) {
  if (name.empty() || name == "." || name == "..") return false;
  return name.find('/') == std::string::npos && name.find('\\') == std::string::npos;
}

template <typename T>
T require_number(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.contains(key)) throw DataError("corrupt manifest: " + ctx + " missing '" + key + "'");
  const json& v = obj.at(key);
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw DataError("corrupt manifest: " + ctx + "." + key + " must be an integer");
  } else {
    if (!v.is_number()) throw DataError("corrupt manifest: " + ctx + "." + key + " must be a number");
  }
  return v.get<T>();
}

SplitHeader parse_split(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw DataError("corrupt manifest: " + ctx + " must be an object");
  SplitHeader h;
  if (!j.contains("file") || !j.at("file").is_string())
    throw DataError("corrupt manifest: " + ctx + ".file missing");
  h.file = j.at("file").get<std::string>();
  if (!is_safe_file_name(h.file)) throw DataError("corrupt manifest: " + ctx + ".file must be a plain file name");
  const auto n = require_number<std::int64_t>(j, "n_trials", ctx);
  const auto s = require_number<std::int64_t>(j, "n_samples", ctx);
  if (n < 1) throw DataError("corrupt manifest: " + ctx + ".n_trials must be >= 1");
  if (s < 1) throw DataError("corrupt manifest: " + ctx + ".n_samples must be >= 1");
  h.n_trials = static_cast<std::size_t>(n);
  h.n_samples = static_cast<Index>(s);
  if (!j.contains("labels") || !j.at("labels").is_array())
    throw DataError("corrupt manifest: " + ctx + ".labels missing");
  for (const auto& l : j.at("labels")) {
    if (l.is_null()) {
      h.labels.emplace_back(std::nullopt);
    } else if (l.is_number_integer()) {
      h.labels.emplace_back(l.get<int>());
    } else {
      throw DataError("corrupt manifest: " + ctx + ".labels entries must be integers");
    }
  }
  if (h.labels.size() != h.n_trials) throw DataError("corrupt manifest: " + ctx + " has " +
                                                     std::to_string(h.labels.size()) + " labels for " +
                                                     std::to_string(h.n_trials) + " trials");
  return h;
}

std::vector<Trial> read_payload(const fs::path& file, const SplitHeader& h, Index channels, double fsample) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("missing payload file " + file.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t per_trial = static_cast<std::size_t>(channels * h.n_samples);
  const std::size_t expected = h.n_trials * per_trial * sizeof(float);
  if (bytes.size() != expected) {
    throw DataError("dimension mismatch: " + file.string() + " holds " + std::to_string(bytes.size()) +
                    " bytes, manifest implies " + std::to_string(expected));
  }
  std::vector<Trial> trials;
  trials.reserve(h.n_trials);
  std::size_t offset = 0;
  for (std::size_t t = 0; t < h.n_trials; ++t) {
    Trial trial;
    trial.fs = fsample;
    trial.label = h.labels[t];
    trial.data.resize(channels, h.n_samples);
    for (Index c = 0; c < channels; ++c) {
      for (Index s = 0; s < h.n_samples; ++s) {
        std::uint32_t raw;
        std::memcpy(&raw, bytes.data() + offset, sizeof raw);
        offset += sizeof raw;
        const float v = std::bit_cast<float>(to_little_endian(raw));
        if (!std::isfinite(v)) {
          throw DataError("non-finite sample in " + file.string() + " (trial " + std::to_string(t) +
                          ", channel " + std::to_string(c) + ", sample " + std::to_string(s) + ")");
        }
        trial.data(c, s) = static_cast<double>(v);
      }
    }
    trials.push_back(std::move(trial));
  }
  return trials;
}

void write_payload(const fs::path& file, const std::vector<Trial>& trials) {
  std::vector<char> bytes;
  for (const auto& t : trials) {
    for (Index c = 0; c < t.channels(); ++c) {
      for (Index s = 0; s < t.samples(); ++s) {
        const auto raw = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(t.data(c, s))));
        const char* p = reinterpret_cast<const char*>(&raw);
        bytes.insert(bytes.end(), p, p + sizeof raw);
      }
    }
  }
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + file.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + file.string());
}

json split_json(const std::string& file, const std::vector<Trial>& trials) {
  json labels = json::array();
  for (const auto& t : trials) {
    if (t.label) labels.push_back(*t.label);
    else labels.push_back(nullptr);
  }
  return json{{"file", file},
              {"n_trials", trials.size()},
              {"n_samples", trials.front().samples()},
              {"labels", labels}};
}

void validate_split(const std::vector<Trial>& trials, const DatasetBundle& b, const std::string& ctx) {
  if (trials.empty()) throw DataError(ctx + ": no trials");
  const Index s0 = trials.front().samples();
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    const std::string where = ctx + "[" + std::to_string(i) + "]";
    validate_trial(t, where);
    if (t.channels() != b.n_channels()) throw DataError(where + ": channel count differs from bundle");
    if (t.fs != b.fs) throw DataError(where + ": sampling rate differs from bundle");
    if (t.samples() != s0) throw DataError(where + ": trial length differs within split");
    if (t.label && (*t.label < 0 || *t.label >= b.n_classes)) {
      throw DataError(where + ": label " + std::to_string(*t.label) + " outside [0, " +
                      std::to_string(b.n_classes) + ")");
    }
  }
}

} // namespace

const SubjectData& DatasetBundle::subject(const std::string& id) const {
  for (const auto& s : subjects) {
    if (s.id == id) return s;
  }
  throw ConfigError("unknown subject '" + id + "'");
}

void validate_bundle(const DatasetBundle& b) {
  if (b.n_classes < 2) throw DataError("bundle: n_classes must be >= 2");
  if (b.channel_names.empty()) throw DataError("bundle: no channels");
  if (!(b.fs > 0.0)) throw DataError("bundle: fs must be positive");
  if (b.subjects.empty()) throw DataError("bundle: no subjects");
  std::set<std::string> ids;
  for (const auto& s : b.subjects) {
    if (!is_safe_file_name(s.id)) throw DataError("bundle: invalid subject id '" + s.id + "'");
    if (!ids.insert(s.id).second) throw DataError("bundle: duplicate subject id '" + s.id + "'");
    validate_split(s.train_trials, b, "subject " + s.id + " train");
    validate_split(s.test_trials, b, "subject " + s.id + " test");
  }
}

DatasetBundle load_bundle(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestName;
  if (!fs::exists(manifest_path)) throw DataError("missing manifest: " + manifest_path.string());
  std::ifstream in(manifest_path);
  if (!in) throw DataError("missing manifest: cannot open " + manifest_path.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt manifest: ") + e.what());
  }
  if (!m.is_object()) throw DataError("corrupt manifest: top level must be an object");

  const auto version = require_number<int>(m, "format_version", "manifest");
  if (version != kBundleFormatVersion) {
    throw DataError("corrupt manifest: unsupported format_version " + std::to_string(version));
  }
  DatasetBundle b;
  b.fs = require_number<double>(m, "fs", "manifest");
  const auto n_channels = require_number<std::int64_t>(m, "n_channels", "manifest");
  b.n_classes = require_number<int>(m, "n_classes", "manifest");
  if (!m.contains("channel_names") || !m.at("channel_names").is_array())
    throw DataError("corrupt manifest: channel_names missing");
  for (const auto& n : m.at("channel_names")) {
    if (!n.is_string()) throw DataError("corrupt manifest: channel_names entries must be strings");
    b.channel_names.push_back(n.get<std::string>());
  }
  if (static_cast<std::int64_t>(b.channel_names.size()) != n_channels) {
    throw DataError("dimension mismatch: n_channels=" + std::to_string(n_channels) + " but " +
                    std::to_string(b.channel_names.size()) + " channel names");
  }
  if (m.contains("notes") && m.at("notes").is_string()) b.notes = m.at("notes").get<std::string>();
  if (!m.contains("subjects") || !m.at("subjects").is_array())
    throw DataError("corrupt manifest: subjects missing");

  for (const auto& sj : m.at("subjects")) {
    SubjectData s;
    if (!sj.contains("id") || !sj.at("id").is_string()) throw DataError("corrupt manifest: subject id missing");
    s.id = sj.at("id").get<std::string>();
    for (const char* split : {"train", "test"}) {
      const std::string ctx = "subject " + s.id + "." + split;
      if (!sj.contains(split)) throw DataError("corrupt manifest: " + ctx + " missing");
      const SplitHeader h = parse_split(sj.at(split), ctx);
      auto trials = read_payload(dir / h.file, h, static_cast<Index>(n_channels), b.fs);
      (std::string(split) == "train" ? s.train_trials : s.test_trials) = std::move(trials);
    }
    b.subjects.push_back(std::move(s));
  }
  validate_bundle(b);
  return b;
}

void write_bundle(const DatasetBundle& bundle, const fs::path& dir) {
  validate_bundle(bundle);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

  json subjects = json::array();
  for (const auto& s : bundle.subjects) {
    const std::string train_file = s.id + "_train.f32";
    const std::string test_file = s.id + "_test.f32";
    write_payload(dir / train_file, s.train_trials);
    write_payload(dir / test_file, s.test_trials);
    subjects.push_back(json{{"id", s.id},
                            {"train", split_json(train_file, s.train_trials)},
                            {"test", split_json(test_file, s.test_trials)}});
  }
  json m{{"format_version", kBundleFormatVersion},
         {"fs", bundle.fs},
         {"n_channels", bundle.n_channels()},
         {"n_classes", bundle.n_classes},
         {"channel_names", bundle.channel_names},
         {"subjects", subjects}};
  if (!bundle.notes.empty()) m["notes"] = bundle.notes;
  std::ofstream out(dir / kManifestName, std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / kManifestName).string());
  out << m.dump(2) << '\n';
}

std::pair<std::vector<Trial>, std::vector<Trial>>
split_validation(const SubjectData& subject, const SplitPolicy& policy) {
  const auto& trials = subject.train_trials;
  std::vector<bool> held_out(trials.size(), false);

  if (const auto* k_policy = std::get_if<LastKPerClass>(&policy)) {
    if (k_policy->k < 0) throw ConfigError("split_validation: k must be >= 0");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < trials.size(); ++i) {
      if (!trials[i].label) throw DataError("split_validation: subject " + subject.id + " has unlabeled trials");
      by_class[*trials[i].label].push_back(i);
    }
    const auto k = static_cast<std::size_t>(k_policy->k);
    for (const auto& [cls, idx] : by_class) {
      if (k > idx.size()) {
        throw ConfigError("split_validation: k=" + std::to_string(k) + " exceeds the " +
                          std::to_string(idx.size()) + " trials of class " + std::to_string(cls) +
                          " for subject " + subject.id);
      }
      for (std::size_t j = idx.size() - k; j < idx.size(); ++j) held_out[idx[j]] = true;
    }
  } else {
    const double f = std::get<LastFraction>(policy).fraction;
    if (!(f >= 0.0 && f < 1.0)) throw ConfigError("split_validation: fraction must lie in [0, 1)");
    const auto n_val = static_cast<std::size_t>(std::llround(f * static_cast<double>(trials.size())));
    for (std::size_t i = trials.size() - n_val; i < trials.size(); ++i) held_out[i] = true;
  }

  std::pair<std::vector<Trial>, std::vector<Trial>> out;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    (held_out[i] ? out.second : out.first).push_back(trials[i]);
  }
  return out;
}

} // namespace frdw
