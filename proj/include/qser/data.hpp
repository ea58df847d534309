#pragma once

// Manifests, label mapping, seeded splits and the synthetic ridge corpus.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qser/error.hpp"
#include "qser/features.hpp"
#include "qser/io.hpp"
#include "qser/nn/tensor.hpp"
#include "qser/rng.hpp"

namespace qser {

namespace fs = std::filesystem;

inline constexpr const char* kFourClassNames[] = {"angry", "happy", "neutral", "sad"};
inline constexpr const char* kBinaryNames[] = {"low", "high"};

struct Example {
  fs::path feature_path;
  std::size_t label = 0;
  std::string raw_label;
};

enum class ValenceScheme { IEMOCAP, RECOLA };

inline ValenceScheme parse_valence_scheme(std::string_view s) {
  if (s == "iemocap") return ValenceScheme::IEMOCAP;
  if (s == "recola") return ValenceScheme::RECOLA;
  throw ConfigError("unknown valence scheme '" + std::string(s) + "' (iemocap|recola)");
}

/// Low = 0, High = 1. IEMOCAP: Low iff v < 3. RECOLA: Low iff v < 0; exactly
/// zero has no class and is rejected.
inline std::size_t binarize_valence(double value, ValenceScheme scheme) {
  if (!std::isfinite(value)) throw DataError("valence must be finite");
  if (scheme == ValenceScheme::IEMOCAP) return value < 3.0 ? 0 : 1;
  if (value == 0.0) throw DataError("RECOLA valence of exactly 0 is neither negative nor positive");
  return value < 0.0 ? 0 : 1;
}

/// Class names in label order for 2- and 4-class tasks.
inline std::vector<std::string> class_names(std::size_t n_classes) {
  if (n_classes == 2) return {kBinaryNames[0], kBinaryNames[1]};
  if (n_classes == 4) return {std::begin(kFourClassNames), std::end(kFourClassNames)};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_classes; ++i) names.push_back(std::to_string(i));
  return names;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Comma split with double-quote quoting ("" escapes a quote).
inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::optional<long long> parse_int(const std::string& s) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<double> parse_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<std::size_t> label_from_name(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (std::size_t i = 0; i < 4; ++i)
    if (name == kFourClassNames[i]) return i;
  for (std::size_t i = 0; i < 2; ++i)
    if (name == kBinaryNames[i]) return i;
  return std::nullopt;
}

}  // namespace detail

/// Reads `path,label` or `path,valence` CSV. Relative paths resolve against
/// the manifest's directory. Label cells accept class names (angry, happy,
/// neutral, sad / low, high) or non-negative integers.
inline std::vector<Example> load_manifest(const fs::path& manifest,
                                          ValenceScheme scheme = ValenceScheme::IEMOCAP) {
  std::ifstream in(manifest);
  if (!in) throw IngestionError("cannot open manifest '" + manifest.string() + "'");
  const fs::path base = manifest.parent_path();
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw IngestionError(manifest.string() + " line " + std::to_string(line_no) + ": " + msg);
  };

  bool valence = false;
  bool have_header = false;
  std::vector<Example> out;
  int vocab = -1;  // 0 = binary names, 1 = four-class names, 2 = integers
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv(line);
    if (!have_header) {
      if (cells.size() != 2 || cells[0] != "path" || (cells[1] != "label" && cells[1] != "valence"))
        fail("header must be 'path,label' or 'path,valence'");
      valence = cells[1] == "valence";
      have_header = true;
      continue;
    }
    if (cells.size() != 2 || cells[0].empty()) fail("expected 2 fields: path and label");
    Example ex;
    ex.raw_label = cells[1];
    ex.feature_path = fs::path(cells[0]).is_absolute() ? fs::path(cells[0]) : base / cells[0];
    if (!fs::exists(ex.feature_path))
      fail("feature file '" + ex.feature_path.string() + "' does not exist");
    int kind = 2;
    if (valence) {
      auto v = detail::parse_real(cells[1]);
      if (!v) fail("unparsable valence '" + cells[1] + "'");
      try {
        ex.label = binarize_valence(*v, scheme);
      } catch (const DataError& e) {
        fail(e.what());
      }
      kind = 0;
    } else if (auto i = detail::parse_int(cells[1])) {
      if (*i < 0) fail("negative label");
      ex.label = static_cast<std::size_t>(*i);
    } else if (auto n = detail::label_from_name(cells[1])) {
      ex.label = *n;
      std::string lower = cells[1];
      for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      kind = (lower == "low" || lower == "high") ? 0 : 1;
    } else {
      fail("unknown label '" + cells[1] + "'");
    }
    if (vocab >= 0 && vocab != kind) fail("label vocabulary changes mid-file");
    vocab = kind;
    out.push_back(std::move(ex));
  }
  if (!have_header) throw IngestionError(manifest.string() + ": empty manifest (no header)");
  return out;
}

inline std::size_t infer_class_count(const std::vector<Example>& examples) {
  std::size_t k = 0;
  for (const auto& e : examples) k = std::max(k, e.label + 1);
  return k;
}

struct SplitSpec {
  std::uint64_t seed = 0;
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  bool stratified = true;

  void validate() const {
    if (!(train > 0 && val > 0 && test > 0))
      throw ConfigError("data.split fractions must be positive");
    if (std::abs(train + val + test - 1.0) > 1e-9)
      throw ConfigError("data.split fractions must sum to 1");
  }
};

struct SplitResult {
  std::vector<Example> train, val, test;
};

/// Each group (a class when stratified, else everything) is shuffled with
/// the "split" stream, then cut at round(n*train) and round(n*val). Every
/// partition is returned in manifest order.
inline SplitResult split(const std::vector<Example>& examples, const SplitSpec& spec) {
  spec.validate();
  std::vector<std::vector<std::size_t>> groups;
  if (spec.stratified) {
    groups.resize(infer_class_count(examples));
    for (std::size_t i = 0; i < examples.size(); ++i) groups[examples[i].label].push_back(i);
    for (std::size_t k = 0; k < groups.size(); ++k)
      if (groups[k].empty())
        throw DataError("class " + std::to_string(k) + " has no examples; cannot stratify");
  } else {
    groups.emplace_back(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) groups[0][i] = i;
  }
  std::vector<int> part(examples.size(), 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& idx = groups[g];
    Rng rng(spec.seed, "split", g);
    rng.shuffle(idx);
    const std::size_t n = idx.size();
    const auto n_train = std::min<std::size_t>(n, std::llround(n * spec.train));
    const auto n_val = std::min<std::size_t>(n - n_train, std::llround(n * spec.val));
    for (std::size_t i = 0; i < n; ++i) part[idx[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
  }
  SplitResult r;
  for (std::size_t i = 0; i < examples.size(); ++i)
    (part[i] == 0 ? r.train : part[i] == 1 ? r.val : r.test).push_back(examples[i]);
  return r;
}

// ---------------------------------------------------------------- tensors

struct Dataset {
  std::vector<Tensor> inputs;  // [1, n_mels, n_frames]
  std::vector<std::size_t> labels;

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }
};

/// Loads every feature file as a single-channel image. All files must share
/// one shape.
inline Dataset load_dataset(const std::vector<Example>& examples) {
  Dataset d;
  for (const auto& e : examples) {
    Tensor t = read_features(e.feature_path);
    Tensor img = t.reshaped({1, t.dim(0), t.dim(1)});
    if (!d.inputs.empty() && img.shape() != d.inputs.front().shape())
      throw IngestionError("'" + e.feature_path.string() + "' has shape " +
                           shape_string(t.shape()) + ", expected " +
                           shape_string(d.inputs.front().shape()));
    d.inputs.push_back(std::move(img));
    d.labels.push_back(e.label);
  }
  return d;
}

// ---------------------------------------------------------------- synthetic

struct SynthConfig {
  std::size_t n_per_class = 100;
  std::size_t n_classes = 2;
  std::uint64_t seed = 7;
  double snr_db = 10.0;
  bool noise = true;
  std::size_t n_mels = 128;
  std::size_t n_frames = 126;

  void validate() const {
    if (n_classes != 2 && n_classes != 4) throw ConfigError("synth classes must be 2 or 4");
    if (n_per_class == 0) throw ConfigError("synth per-class count must be >= 1");
    if (n_mels < 16 || n_frames < 2) throw ConfigError("synth needs n_mels >= 16, n_frames >= 2");
    if (!std::isfinite(snr_db)) throw ConfigError("synth snr_db must be finite");
  }
};

/// One example of class k: a Gaussian ridge across mel bins whose centre sits
/// at band (k+1)/(K+1) of the axis, drifts over time with a slope whose sign
/// alternates by class, and is offset by a seeded per-example jitter. Gaussian
/// noise is scaled to the configured SNR against the ridge's mean power.
inline Tensor synth_example(const SynthConfig& cfg, std::size_t k, std::size_t index) {
  const auto M = static_cast<double>(cfg.n_mels);
  const std::size_t T = cfg.n_frames;
  Rng rng(cfg.seed, "synth", k * cfg.n_per_class + index);
  const double centre = M * static_cast<double>(k + 1) / static_cast<double>(cfg.n_classes + 1);
  const double drift = (k % 2 == 0 ? 1.0 : -1.0) * M / 16.0;
  const double width = M / 32.0;
  const double jitter = rng.uniform(-M / 64.0, M / 64.0);

  Tensor t({cfg.n_mels, T});
  double power = 0.0;
  for (std::size_t m = 0; m < cfg.n_mels; ++m)
    for (std::size_t f = 0; f < T; ++f) {
      const double c = centre + jitter + drift * (static_cast<double>(f) / (T - 1) - 0.5);
      const double d = (static_cast<double>(m) - c) / width;
      const double v = std::exp(-0.5 * d * d);
      t[m * T + f] = v;
      power += v * v;
    }
  if (cfg.noise) {
    power /= static_cast<double>(t.size());
    const double sigma = std::sqrt(power / std::pow(10.0, cfg.snr_db / 10.0));
    for (auto& v : t.data()) v += sigma * rng.normal();
  }
  return t;
}

/// Writes `<out>/<class>/<idx>.qft` plus `<out>/manifest.csv`; returns the
/// manifest path.
inline fs::path generate_synthetic(const SynthConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const auto names = class_names(cfg.n_classes);
  io::ensure_dir(out_dir);
  std::ostringstream manifest;
  manifest << "path,label\n";
  for (std::size_t k = 0; k < cfg.n_classes; ++k) {
    io::ensure_dir(out_dir / names[k]);
    for (std::size_t i = 0; i < cfg.n_per_class; ++i) {
      const std::string rel = names[k] + "/" + std::to_string(i) + ".qft";
      write_features(out_dir / rel, synth_example(cfg, k, i));
      manifest << rel << ',' << names[k] << '\n';
    }
  }
  const fs::path path = out_dir / "manifest.csv";
  io::write_text(path, manifest.str());
  return path;
}

}  // namespace qser
