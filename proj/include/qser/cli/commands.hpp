#pragma once

// Subcommand bodies for the qser binary. Each returns a process exit code:
// 0 success, 1 data failure, 2 configuration or model error, 3 numeric abort.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qser/data.hpp"
#include "qser/features.hpp"
#include "qser/io.hpp"
#include "qser/qgrad.hpp"
#include "qser/train/config.hpp"
#include "qser/train/grid.hpp"
#include "qser/train/model.hpp"
#include "qser/train/trainer.hpp"

namespace qser::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kDataFailure = 1, kConfigFailure = 2, kNumericAbort = 3 };

inline int exit_code_for(const Error& e) {
  if (dynamic_cast<const NumericError*>(&e)) return kNumericAbort;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const IngestionError*>(&e) ||
      dynamic_cast<const IoError*>(&e) || dynamic_cast<const EvaluationError*>(&e))
    return kDataFailure;
  return kConfigFailure;
}

/// Runs a command body and turns library errors into exit codes.
inline int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataFailure;
  }
}

// ---------------------------------------------------------------- features

struct FeaturesArgs {
  fs::path in;  // directory of WAVs (searched recursively) or a manifest CSV
  fs::path out;
  std::optional<fs::path> config;
  std::optional<std::size_t> n_mels;
  std::size_t workers = 1;
};

namespace detail {

struct FeatureJob {
  fs::path wav;
  fs::path qft;
  fs::path relative_qft;
  std::string label;  // manifest input only
  bool ok = false;
};

inline fs::path qft_name(fs::path rel) { return rel.replace_extension(".qft"); }

}  // namespace detail

/// One .qft per WAV, mirroring the input layout under `out`. With manifest
/// input, `out/manifest.csv` lists the extracted files with their labels.
inline int cmd_features(const FeaturesArgs& args, std::ostream& out, std::ostream& err) {
  MelConfig mel = args.config ? load_run_config(*args.config).features : MelConfig{};
  if (args.n_mels) mel.n_mels = *args.n_mels;
  mel.validate();

  std::vector<detail::FeatureJob> jobs;
  std::string label_header;
  if (fs::is_directory(args.in)) {
    std::vector<fs::path> wavs;
    for (const auto& entry : fs::recursive_directory_iterator(args.in)) {
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (entry.is_regular_file() && ext == ".wav") wavs.push_back(entry.path());
    }
    std::sort(wavs.begin(), wavs.end());
    for (const auto& w : wavs) {
      detail::FeatureJob j;
      j.wav = w;
      j.relative_qft = detail::qft_name(fs::relative(w, args.in));
      jobs.push_back(j);
    }
  } else {
    std::ifstream in(args.in);
    if (!in) throw IngestionError("cannot open input '" + args.in.string() + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (qser::detail::trim(line).empty()) continue;
      const auto cells = qser::detail::split_csv(line);
      if (label_header.empty()) {
        if (cells.size() != 2 || cells[0] != "path" || (cells[1] != "label" && cells[1] != "valence"))
          throw IngestionError(args.in.string() + " line " + std::to_string(line_no) +
                               ": header must be 'path,label' or 'path,valence'");
        label_header = cells[1];
        continue;
      }
      if (cells.size() != 2 || cells[0].empty())
        throw IngestionError(args.in.string() + " line " + std::to_string(line_no) +
                             ": expected 2 fields: path and label");
      detail::FeatureJob j;
      const fs::path p(cells[0]);
      j.wav = p.is_absolute() ? p : args.in.parent_path() / p;
      j.relative_qft = detail::qft_name(p.is_absolute() ? p.filename() : p.lexically_normal());
      j.label = cells[1];
      jobs.push_back(j);
    }
    if (label_header.empty()) throw IngestionError(args.in.string() + ": empty manifest (no header)");
  }

  io::ensure_dir(args.out);
  std::atomic<std::size_t> next{0};
  std::mutex log;
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      auto& j = jobs[i];
      j.qft = args.out / j.relative_qft;
      try {
        Tensor t = extract_features(j.wav, mel);
        io::ensure_dir(j.qft.parent_path());
        write_features(j.qft, t);
        j.ok = true;
      } catch (const Error& e) {
        std::lock_guard lock(log);
        err << "failed: " << j.wav.string() << ": " << e.what() << "\n";
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(args.workers, 1, std::max<std::size_t>(jobs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::size_t n_ok = 0;
  for (const auto& j : jobs) n_ok += j.ok;
  if (!label_header.empty()) {
    std::ostringstream m;
    m << "path," << label_header << "\n";
    for (const auto& j : jobs)
      if (j.ok) m << csv_field(j.relative_qft.generic_string()) << ',' << csv_field(j.label) << "\n";
    io::write_text(args.out / "manifest.csv", m.str());
  }
  out << "extracted " << n_ok << " of " << jobs.size() << " files, " << (jobs.size() - n_ok)
      << " failed\n";
  return n_ok == jobs.size() ? kOk : kDataFailure;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  SynthConfig config;
  fs::path out;
};

inline int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream&) {
  const fs::path manifest = generate_synthetic(args.config, args.out);
  out << "wrote " << args.config.n_classes * args.config.n_per_class << " examples ("
      << args.config.n_classes << " classes x " << args.config.n_per_class << ") to "
      << args.out.string() << "\nmanifest: " << manifest.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  fs::path config;
  fs::path manifest;
  fs::path out;
};

struct Splits {
  Dataset train, val, test;
  std::size_t n_classes = 0;
};

inline Splits load_splits(const RunConfig& cfg, const fs::path& manifest) {
  const auto examples = load_manifest(manifest, cfg.valence_scheme);
  if (examples.empty()) throw DataError(manifest.string() + ": no examples");
  const SplitResult parts = split(examples, cfg.split);
  Splits s;
  s.n_classes = infer_class_count(examples);
  if (s.n_classes < 2) throw DataError(manifest.string() + ": need at least 2 classes");
  s.train = load_dataset(parts.train);
  s.val = load_dataset(parts.val);
  s.test = load_dataset(parts.test);
  if (s.train.empty()) throw DataError("training split is empty");
  return s;
}

inline json report_json(const EvalReport& r) {
  json j;
  j["uar"] = r.uar;
  j["per_class_recall"] = r.per_class_recall;
  j["confusion"] = r.confusion;
  j["trainable_params"] = r.trainable_params;
  return j;
}

inline std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os << "epoch,train_loss,val_uar\n";
  for (const auto& h : history)
    os << h.epoch << ',' << format_real(h.train_loss) << ','
       << (h.val_uar ? format_real(*h.val_uar) : std::string()) << "\n";
  return os.str();
}

/// Trains one model and writes model.qsc, history.csv and report.json.
inline EvalReport train_and_save(const RunConfig& cfg, const Splits& data, const fs::path& out_dir,
                                 std::ostream& out) {
  Model model = build_model(cfg, data.train.inputs.front().shape(), data.n_classes);
  model.init(cfg.train.seed);
  const std::size_t params = model.param_count();
  out << (cfg.model == ModelKind::Hybrid ? "hybrid" : "classical") << " model, " << params
      << " trainable parameters, " << data.train.size() << " train / " << data.val.size() << " val / "
      << data.test.size() << " test\n";

  const auto history = train_model(model, data.train, data.val, cfg.train, [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " loss " << std::setprecision(6) << r.train_loss;
    if (r.val_uar) out << " val_uar " << *r.val_uar;
    out << "\n";
    return true;
  });

  io::ensure_dir(out_dir);
  save_checkpoint(model, out_dir / "model.qsc");
  io::write_text(out_dir / "history.csv", history_csv(history));

  json report;
  report["model"] = cfg.model == ModelKind::Hybrid ? "hybrid" : "classical";
  report["n_classes"] = data.n_classes;
  report["epochs_run"] = history.size();
  report["trainable_params"] = params;
  if (cfg.model == ModelKind::Hybrid) {
    const auto q = quantum_layer(cfg);
    report["quantum"] = {{"n_qubits", q.n_qubits},
                         {"embedding", embedding_name(q.embedding)},
                         {"circuit", circuit_name(q.circuit)},
                         {"measurement", measurement_name(q.measurement)}};
  }
  EvalReport final_report;
  final_report.trainable_params = params;
  std::string final_split = "none";
  if (!data.val.empty()) {
    final_report = evaluate(model, data.val);
    report["val"] = report_json(final_report);
    final_split = "val";
  }
  if (!data.test.empty()) {
    final_report = evaluate(model, data.test);
    report["test"] = report_json(final_report);
    final_split = "test";
  }
  report["final_split"] = final_split;
  report["final_uar"] = final_report.uar;
  io::write_text(out_dir / "report.json", report.dump(2) + "\n");

  out << std::setprecision(6) << "final UAR (" << final_split << "): " << final_report.uar << "\n"
      << "trainable_params: " << params << "\n";
  return final_report;
}

inline int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream&) {
  const RunConfig cfg = load_run_config(args.config);
  const Splits data = load_splits(cfg, args.manifest);
  train_and_save(cfg, data, args.out, out);
  return kOk;
}

// ---------------------------------------------------------------- grid

struct GridArgs {
  fs::path config;
  fs::path manifest;
  fs::path out;
  std::optional<std::size_t> workers;
};

inline int cmd_grid(const GridArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_run_config(args.config);
  if (args.workers) cfg.grid.workers = std::max<std::size_t>(*args.workers, 1);
  const Splits data = load_splits(cfg, args.manifest);
  if (data.val.empty()) throw DataError("grid search needs a non-empty validation split");

  const std::size_t total = cfg.grid.space.size();
  out << "grid: " << total << " points, " << cfg.grid.epochs << " epochs each, " << cfg.grid.workers
      << " worker(s)\n";
  std::size_t done = 0;
  auto results = run_grid(cfg, data.train, data.val, data.n_classes, cfg.grid.workers,
                          [&](const GridResult& r) {
                            ++done;
                            err << "[" << done << "/" << total << "] point " << r.point.index << ": "
                                << (r.ok() ? "val_uar " + format_real(r.val_uar) : r.status) << "\n";
                          });
  const auto ranked = rank_results(std::move(results));
  io::ensure_dir(args.out);
  {
    std::ostringstream os;
    write_grid_csv(os, ranked);
    io::write_text(args.out / "grid_results.csv", os.str());
  }
  const GridResult& best = ranked.front();
  if (!best.ok()) {
    err << "error: every grid point failed\n";
    return kConfigFailure;
  }
  out << "best point " << best.point.index << ": lr " << format_real(best.point.learning_rate) << ", "
      << optimizer_name(best.point.optimizer) << ", weight_decay " << format_real(best.point.weight_decay)
      << ", " << embedding_name(best.point.embedding) << ", " << best.point.circuit << ", "
      << measurement_name(best.point.measurement) << ", val_uar " << format_real(best.val_uar) << "\n";
  if (cfg.grid.final_epochs > 0) {
    RunConfig final_cfg = apply_point(cfg, best.point);
    final_cfg.train.epochs = cfg.grid.final_epochs;
    out << "retraining best point for " << final_cfg.train.epochs << " epochs\n";
    train_and_save(final_cfg, data, args.out / "best", out);
  }
  return kOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  fs::path checkpoint;
  fs::path manifest;
  std::optional<fs::path> config;
  std::optional<fs::path> out;
};

inline int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream&) {
  const ValenceScheme scheme = args.config ? load_run_config(*args.config).valence_scheme : ValenceScheme::IEMOCAP;
  Model model = load_checkpoint(args.checkpoint);
  const Dataset data = load_dataset(load_manifest(args.manifest, scheme));
  if (data.empty()) throw DataError(args.manifest.string() + ": no examples");
  const EvalReport r = evaluate(model, data);
  out << std::setprecision(6) << "UAR: " << r.uar << "\n";
  for (std::size_t k = 0; k < r.per_class_recall.size(); ++k)
    out << "recall[" << k << "]: " << r.per_class_recall[k] << "\n";
  out << "trainable_params: " << r.trainable_params << "\n";
  if (args.out) io::write_text(*args.out, report_json(r).dump(2) + "\n");
  return kOk;
}

// ---------------------------------------------------------------- inspect

struct InspectArgs {
  std::string embedding = "angle";
  std::string circuit = "strongly_entangling";
  std::size_t layers = 2;
  std::size_t qubits = 4;
  double ratio = 0.3;
  std::size_t rots = 0;
  std::uint64_t seed = 42;
  std::string measurement = "pauliz";
  std::string axis = "X";
  std::size_t repeats = 1;
};

inline int cmd_inspect(const InspectArgs& args, std::ostream& out, std::ostream&) {
  if (args.qubits < 1 || args.qubits > kMaxQubits)
    throw ConfigError("--qubits must lie in [1, " + std::to_string(kMaxQubits) + "]");
  if (args.layers < 1) throw ConfigError("--layers must be >= 1");
  if (args.repeats < 1) throw ConfigError("--repeats must be >= 1");
  if (!(args.ratio >= 0.0 && args.ratio <= 1.0)) throw ConfigError("--ratio must lie in [0, 1]");
  QuantumOptions q;
  q.n_qubits = args.qubits;
  q.layers = args.layers;
  q.imprimitive_ratio = args.ratio;
  q.rots_per_layer = args.rots;
  q.circuit_seed = args.seed;
  QuantumLayerConfig layer;
  layer.n_qubits = args.qubits;
  layer.embedding = make_embedding(args.embedding, parse_axis(args.axis), args.repeats);
  layer.circuit = make_circuit(qser::detail::canonical_circuit(args.circuit), q, args.seed);
  layer.measurement = parse_measurement(args.measurement);
  const QuantumPipeline p(layer);

  out << "# " << embedding_name(layer.embedding) << " embedding (" << p.input_width() << " inputs), "
      << circuit_name(layer.circuit) << ", " << args.qubits << " qubits, "
      << measurement_name(layer.measurement) << " (" << p.output_width() << " outputs)\n";
  out << render_circuit(p.circuit());
  out << p.param_count() << " trainable parameters\n";
  return kOk;
}

}  // namespace qser::cli
