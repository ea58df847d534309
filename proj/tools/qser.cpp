#include <iostream>

#include <CLI11.hpp>

#include "qser/cli/commands.hpp"

using namespace qser::cli;

int main(int argc, char** argv) {
  CLI::App app{"qser: hybrid quantum-classical speech emotion recognition toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  FeaturesArgs features;
  auto* f = app.add_subcommand("features", "Extract log-mel features (.qft) from WAV files");
  f->add_option("--in", features.in, "Directory of WAVs or a path,label manifest of WAVs")->required();
  f->add_option("--out", features.out, "Output directory")->required();
  f->add_option("--mels", features.n_mels, "Number of mel bands");
  f->add_option("--config", features.config, "Run config (features section)");
  f->add_option("--workers", features.workers, "Parallel files")->check(CLI::PositiveNumber);

  SynthArgs synth;
  std::string synth_noise = "on";
  auto* s = app.add_subcommand("synth", "Generate a labelled synthetic feature corpus");
  s->add_option("--classes", synth.config.n_classes, "2 or 4")->check(CLI::IsMember({2, 4}));
  s->add_option("--per-class", synth.config.n_per_class, "Examples per class")->check(CLI::PositiveNumber);
  s->add_option("--seed", synth.config.seed, "Corpus seed");
  s->add_option("--snr", synth.config.snr_db, "Signal-to-noise ratio in dB");
  s->add_option("--noise", synth_noise, "on|off")->check(CLI::IsMember({"on", "off"}));
  s->add_option("--mels", synth.config.n_mels, "Mel bands")->check(CLI::PositiveNumber);
  s->add_option("--frames", synth.config.n_frames, "Frames")->check(CLI::PositiveNumber);
  s->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train one model and write checkpoint, history and report");
  t->add_option("--config", train.config, "Run config JSON")->required();
  t->add_option("--manifest", train.manifest, "Feature manifest CSV")->required();
  t->add_option("--out", train.out, "Output directory")->required();

  GridArgs grid;
  auto* g = app.add_subcommand("grid", "Grid search, then retrain the best point");
  g->add_option("--config", grid.config, "Run config JSON")->required();
  g->add_option("--manifest", grid.manifest, "Feature manifest CSV")->required();
  g->add_option("--out", grid.out, "Output directory")->required();
  g->add_option("--workers", grid.workers, "Parallel grid points")->check(CLI::PositiveNumber);

  EvaluateArgs eval;
  auto* e = app.add_subcommand("evaluate", "Score a checkpoint on a manifest");
  e->add_option("--checkpoint", eval.checkpoint, "Model checkpoint")->required();
  e->add_option("--manifest", eval.manifest, "Feature manifest CSV")->required();
  e->add_option("--config", eval.config, "Run config (valence scheme)");
  e->add_option("--out", eval.out, "Write the report as JSON");

  InspectArgs inspect;
  auto* i = app.add_subcommand("inspect", "Print a circuit's gates and trainable-parameter count");
  i->add_option("--embedding", inspect.embedding, "angle|amplitude|iqp");
  i->add_option("--circuit", inspect.circuit, "strongly_entangling|random_layers");
  i->add_option("--layers", inspect.layers, "Circuit layers");
  i->add_option("--qubits", inspect.qubits, "Qubit count");
  i->add_option("--ratio", inspect.ratio, "Random layers: CNOT probability");
  i->add_option("--rots", inspect.rots, "Random layers: slots per layer (0 = qubit count)");
  i->add_option("--seed", inspect.seed, "Random layers: seed");
  i->add_option("--measurement", inspect.measurement, "pauliz|paulix|zprob|z_plus_pauliz|probability");
  i->add_option("--axis", inspect.axis, "Angle embedding axis: X|Y|Z");
  i->add_option("--repeats", inspect.repeats, "IQP repeats");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kConfigFailure;
  }

  auto& out = std::cout;
  auto& err = std::cerr;
  if (*f) return guarded(err, [&] { return cmd_features(features, out, err); });
  if (*s) {
    synth.config.noise = synth_noise == "on";
    return guarded(err, [&] { return cmd_synth(synth, out, err); });
  }
  if (*t) return guarded(err, [&] { return cmd_train(train, out, err); });
  if (*g) return guarded(err, [&] { return cmd_grid(grid, out, err); });
  if (*e) return guarded(err, [&] { return cmd_evaluate(eval, out, err); });
  return guarded(err, [&] { return cmd_inspect(inspect, out, err); });
}
