#pragma once

// Exhaustive grid search. Point index decodes mixed-radix over
// (learning rate, optimizer, weight decay, embedding, circuit, measurement)
// with measurement varying fastest.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qser/train/config.hpp"

namespace qser {

struct GridPoint {
  std::size_t index = 0;
  double learning_rate = 0.0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double weight_decay = 0.0;
  EmbeddingKind embedding;
  std::string circuit;
  MeasurementKind measurement = MeasurementKind::PauliZ;
};

struct GridResult {
  GridPoint point;
  double val_uar = 0.0;
  std::size_t params = 0;
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
};

inline GridPoint grid_point(const GridSpace& space, std::size_t index) {
  if (index >= space.size())
    throw ConfigError("grid point " + std::to_string(index) + " out of range (size " +
                      std::to_string(space.size()) + ")");
  GridPoint p;
  p.index = index;
  std::size_t r = index;
  auto take = [&r](std::size_t radix) {
    const std::size_t d = r % radix;
    r /= radix;
    return d;
  };
  p.measurement = space.measurements[take(space.measurements.size())];
  p.circuit = space.circuits[take(space.circuits.size())];
  p.embedding = space.embeddings[take(space.embeddings.size())];
  p.weight_decay = space.weight_decays[take(space.weight_decays.size())];
  p.optimizer = space.optimizers[take(space.optimizers.size())];
  p.learning_rate = space.learning_rates[take(space.learning_rates.size())];
  return p;
}

/// The run configuration with one grid point substituted in.
inline RunConfig apply_point(RunConfig cfg, const GridPoint& p) {
  cfg.model = ModelKind::Hybrid;
  cfg.train.optimizer = OptimizerConfig::defaults(p.optimizer, p.learning_rate, p.weight_decay);
  cfg.quantum.embedding = embedding_name(p.embedding);
  if (const auto* a = std::get_if<AngleEmbedding>(&p.embedding)) cfg.quantum.axis = a->axis;
  if (const auto* i = std::get_if<IqpEmbedding>(&p.embedding)) cfg.quantum.iqp_repeats = i->repeats;
  cfg.quantum.circuit = p.circuit;
  cfg.quantum.measurement = p.measurement;
  return cfg;
}

inline GridResult run_grid_point(const RunConfig& base, const GridPoint& p, const Dataset& train,
                                 const Dataset& val, std::size_t n_classes) {
  GridResult r;
  r.point = p;
  try {
    RunConfig cfg = apply_point(base, p);
    cfg.train.epochs = base.grid.epochs;
    Model model = build_model(cfg, train.inputs.front().shape(), n_classes);
    r.params = model.param_count();
    model.init(cfg.train.seed);
    train_model(model, train, Dataset{}, cfg.train);
    r.val_uar = evaluate(model, val).uar;
  } catch (const NumericError& e) {
    r.status = std::string("numeric_error: ") + e.what();
  } catch (const Error& e) {
    r.status = std::string("failed: ") + e.what();
  }
  return r;
}

/// Results are indexed by point, whatever the worker count.
inline std::vector<GridResult> run_grid(const RunConfig& cfg, const Dataset& train, const Dataset& val,
                                        std::size_t n_classes, std::size_t workers,
                                        const std::function<void(const GridResult&)>& on_done = {}) {
  const GridSpace& space = cfg.grid.space;
  if (space.size() == 0) throw ConfigError("grid is empty");
  if (train.empty()) throw DataError("training set is empty");
  if (val.empty()) throw DataError("validation set is empty");
  std::vector<GridResult> results(space.size());
  std::atomic<std::size_t> next{0};
  std::mutex report;
  std::exception_ptr fatal;

  auto work = [&] {
    for (std::size_t i = next++; i < results.size(); i = next++) {
      try {
        results[i] = run_grid_point(cfg, grid_point(space, i), train, val, n_classes);
      } catch (...) {
        std::lock_guard lock(report);
        if (!fatal) fatal = std::current_exception();
        next = results.size();
        return;
      }
      if (on_done) {
        std::lock_guard lock(report);
        on_done(results[i]);
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, results.size());
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);
  return results;
}

/// Best first: higher UAR, then fewer params, then lower index. Failed points last.
inline std::vector<GridResult> rank_results(std::vector<GridResult> results) {
  std::stable_sort(results.begin(), results.end(), [](const GridResult& a, const GridResult& b) {
    if (a.ok() != b.ok()) return a.ok();
    if (a.ok() && a.val_uar != b.val_uar) return a.val_uar > b.val_uar;
    if (a.ok() && a.params != b.params) return a.params < b.params;
    return a.point.index < b.point.index;
  });
  return results;
}

/// Shortest text that parses back to the same double.
inline std::string format_real(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

inline void write_grid_csv(std::ostream& os, const std::vector<GridResult>& results) {
  os << "point_index,lr,optimizer,weight_decay,embedding,circuit,measurement,val_uar,params,status\n";
  for (const auto& r : results) {
    os << r.point.index << ',' << format_real(r.point.learning_rate) << ','
       << optimizer_name(r.point.optimizer) << ',' << format_real(r.point.weight_decay) << ','
       << embedding_name(r.point.embedding) << ',' << r.point.circuit << ','
       << measurement_name(r.point.measurement) << ',' << format_real(r.val_uar) << ',' << r.params
       << ',' << csv_field(r.status) << '\n';
  }
}

}  // namespace qser
