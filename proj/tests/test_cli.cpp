#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <regex>
#include <sstream>

#include "qser/features.hpp"
#include "qser/io.hpp"
#include "qser/train/model.hpp"

namespace qser {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("qser_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Outcome run(const std::string& args) {
    const std::string cmd = std::string(QSER_BINARY) + " " + args + " > " + (dir_ / "stdout").string() +
                            " 2> " + (dir_ / "stderr").string();
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir_ / "stdout");
    r.err = slurp(dir_ / "stderr");
    return r;
  }

  void write(const fs::path& rel, const std::string& text) {
    fs::create_directories((dir_ / rel).parent_path());
    std::ofstream(dir_ / rel, std::ios::binary) << text;
  }

  void write_tone(const fs::path& rel, double hz) {
    std::vector<double> s(11025);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = 0.3 * std::sin(2 * std::numbers::pi * hz * i / 22050.0);
    const auto bytes = encode_wav_pcm16({s}, 22050);
    fs::create_directories((dir_ / rel).parent_path());
    io::write_file(dir_ / rel, bytes);
  }

  std::string p(const fs::path& rel) const { return (dir_ / rel).string(); }

  fs::path dir_;
};

std::size_t count_lines_starting(const std::string& text, const std::string& prefix) {
  std::istringstream is(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) n += line.rfind(prefix, 0) == 0;
  return n;
}

TEST_F(Cli, InspectStronglyEntanglingFourQubits) {
  Outcome r = run("inspect --circuit strongly_entangling --qubits 4 --layers 1");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(count_lines_starting(r.out, "ROT3"), 4u);
  EXPECT_EQ(count_lines_starting(r.out, "CNOT"), 4u);
  EXPECT_NE(r.out.find("\n12 trainable parameters\n"), std::string::npos);
}

TEST_F(Cli, InspectRandomLayersAllCnot) {
  Outcome r = run("inspect --circuit random_layers --ratio 1 --qubits 4 --layers 2");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\n0 trainable parameters\n"), std::string::npos);
}

TEST_F(Cli, InspectEightQubitsTwoLayers) {
  Outcome r = run("inspect --circuit strongly-entangling --qubits 8 --layers 2");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\n48 trainable parameters\n"), std::string::npos);
}

TEST_F(Cli, InspectInvalidComboExitsTwo) {
  EXPECT_EQ(run("inspect --circuit strongly_entangling --qubits 1").code, 2);
  EXPECT_EQ(run("inspect --embedding basis").code, 2);
  EXPECT_EQ(run("inspect --qubits 13").code, 2);
  EXPECT_EQ(run("inspect --circuit random_layers --ratio 1.5").code, 2);
  EXPECT_EQ(run("bogus").code, 2);
  EXPECT_EQ(run("train --config x.json").code, 2);
}

TEST_F(Cli, FeaturesEmptyDirectory) {
  fs::create_directories(dir_ / "wavs");
  Outcome r = run("features --in " + p("wavs") + " --out " + p("feats"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("extracted 0 of 0"), std::string::npos);
}

TEST_F(Cli, FeaturesThreeValidFiles) {
  write_tone("wavs/a.wav", 220);
  write_tone("wavs/b.wav", 440);
  write_tone("wavs/sub/c.wav", 880);
  Outcome r = run("features --in " + p("wavs") + " --out " + p("feats") + " --mels 32");
  EXPECT_EQ(r.code, 0) << r.err;
  for (const char* f : {"feats/a.qft", "feats/b.qft", "feats/sub/c.qft"}) {
    ASSERT_TRUE(fs::exists(dir_ / f)) << f;
    EXPECT_EQ(read_features(dir_ / f).shape(), (Shape{32, 126}));
  }
}

TEST_F(Cli, FeaturesCorruptFileIsReportedByName) {
  write_tone("wavs/a.wav", 220);
  write("wavs/broken.wav", "RIFF....WAVEjunk");
  write_tone("wavs/c.wav", 880);
  Outcome r = run("features --in " + p("wavs") + " --out " + p("feats"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("broken.wav"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "feats/a.qft"));
  EXPECT_TRUE(fs::exists(dir_ / "feats/c.qft"));
  EXPECT_FALSE(fs::exists(dir_ / "feats/broken.qft"));
  EXPECT_NE(r.out.find("extracted 2 of 3 files, 1 failed"), std::string::npos);
}

TEST_F(Cli, FeaturesFromManifestWritesFeatureManifest) {
  write_tone("wavs/a.wav", 220);
  write_tone("wavs/b.wav", 440);
  write("wavs/list.csv", "path,label\na.wav,happy\nb.wav,sad\nmissing.wav,sad\n");
  Outcome r = run("features --in " + p("wavs/list.csv") + " --out " + p("feats") + " --workers 2");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing.wav"), std::string::npos);
  EXPECT_EQ(slurp(dir_ / "feats/manifest.csv"), "path,label\na.qft,happy\nb.qft,sad\n");
}

TEST_F(Cli, SynthIsDeterministic) {
  Outcome a = run("synth --classes 4 --per-class 3 --seed 9 --out " + p("s1"));
  Outcome b = run("synth --classes 4 --per-class 3 --seed 9 --out " + p("s2"));
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir_ / "s1")) {
    if (!e.is_regular_file()) continue;
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(dir_ / "s2" / fs::relative(e.path(), dir_ / "s1"))) << e.path();
  }
  EXPECT_EQ(files, 13u);  // 12 features + manifest
  EXPECT_EQ(run("synth --classes 3 --out " + p("s3")).code, 2);
}

const char* kTinyConfig = R"({
  "model": {"arch": {"conv1_channels": 2, "conv1_kernel": 3, "conv2_channels": 3, "conv2_kernel": 2,
                     "surrogate_width": 6},
            "quantum": {"n_qubits": 3, "layers": 1}},
  "data": {"split": {"train": 0.6, "val": 0.2, "test": 0.2}},
  "train": {"epochs": EPOCHS, "batch_size": 4, "seed": 5, "learning_rate": LR, "optimizer": "OPT"},
  "grid": {"learning_rates": [0.05, 0.01], "optimizers": ["adam", "sgd"], "weight_decays": [0],
           "embeddings": ["angle"], "circuits": ["strongly_entangling"], "measurements": ["pauliz"],
           "epochs": 2, "final_epochs": 1}
})";

std::string tiny_config(int epochs, const std::string& lr = "0.05", const std::string& opt = "adam") {
  std::string s = kTinyConfig;
  s = std::regex_replace(s, std::regex("EPOCHS"), std::to_string(epochs));
  s = std::regex_replace(s, std::regex("LR"), lr);
  return std::regex_replace(s, std::regex("OPT"), opt);
}

class CliTrain : public Cli {
 protected:
  void SetUp() override {
    Cli::SetUp();
    ASSERT_EQ(run("synth --classes 2 --per-class 10 --seed 1 --snr 20 --mels 16 --frames 12 --out " + p("syn")).code, 0);
  }
};

TEST_F(CliTrain, WritesArtifactsAndIsReproducible) {
  write("run.json", tiny_config(3));
  Outcome a = run("train --config " + p("run.json") + " --manifest " + p("syn/manifest.csv") + " --out " + p("t1"));
  Outcome b = run("train --config " + p("run.json") + " --manifest " + p("syn/manifest.csv") + " --out " + p("t2"));
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0);
  EXPECT_NE(a.out.find("final UAR"), std::string::npos);
  EXPECT_NE(a.out.find("trainable_params: "), std::string::npos);
  for (const char* f : {"history.csv", "report.json", "model.qsc"})
    EXPECT_EQ(slurp(dir_ / "t1" / f), slurp(dir_ / "t2" / f)) << f;
  EXPECT_EQ(count_lines_starting(slurp(dir_ / "t1/history.csv"), ""), 4u);

  Outcome e = run("evaluate --checkpoint " + p("t1/model.qsc") + " --manifest " + p("syn/manifest.csv") +
              " --out " + p("eval.json"));
  EXPECT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("UAR: "), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "eval.json"));
}

TEST_F(CliTrain, ZeroEpochsLeavesInitialParameters) {
  write("run.json", tiny_config(0));
  Outcome r = run("train --config " + p("run.json") + " --manifest " + p("syn/manifest.csv") + " --out " + p("t"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "t/report.json"));
  EXPECT_EQ(slurp(dir_ / "t/history.csv"), "epoch,train_loss,val_uar\n");

  QuantumLayerConfig q;
  q.n_qubits = 3;
  q.circuit = StronglyEntangling{1};
  ArchConfig arch;
  arch.conv1_channels = 2;
  arch.conv1_kernel = 3;
  arch.conv2_channels = 3;
  arch.conv2_kernel = 2;
  arch.surrogate_width = 6;
  Model fresh = build_hybrid(q, arch, {1, 16, 12}, 2);
  fresh.init(5);
  EXPECT_EQ(load_checkpoint(dir_ / "t/model.qsc").flat_params(), fresh.flat_params());
}

TEST_F(CliTrain, ConfigErrorsExitTwoWithFieldPath) {
  write("bad.json", R"({"train": {"epochs": 1, "learning_rat": 0.1}})");
  Outcome r = run("train --config " + p("bad.json") + " --manifest " + p("syn/manifest.csv") + " --out " + p("t"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("train.learning_rat"), std::string::npos);
}

TEST_F(CliTrain, NumericDivergenceExitsThree) {
  write("run.json", tiny_config(2, "1e300", "sgd"));
  Outcome r = run("train --config " + p("run.json") + " --manifest " + p("syn/manifest.csv") + " --out " + p("t"));
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST_F(CliTrain, MissingManifestExitsOne) {
  write("run.json", tiny_config(1));
  EXPECT_EQ(run("train --config " + p("run.json") + " --manifest " + p("nope.csv") + " --out " + p("t")).code, 1);
}

TEST_F(CliTrain, GridIsIdenticalAcrossWorkerCounts) {
  write("run.json", tiny_config(1));
  Outcome a = run("grid --config " + p("run.json") + " --manifest " + p("syn/manifest.csv") + " --out " + p("g1") +
              " --workers 1");
  Outcome b = run("grid --config " + p("run.json") + " --manifest " + p("syn/manifest.csv") + " --out " + p("g2") +
              " --workers 3");
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const std::string csv = slurp(dir_ / "g1/grid_results.csv");
  EXPECT_EQ(csv, slurp(dir_ / "g2/grid_results.csv"));
  EXPECT_EQ(count_lines_starting(csv, ""), 5u);
  EXPECT_TRUE(fs::exists(dir_ / "g1/best/model.qsc"));
  EXPECT_EQ(slurp(dir_ / "g1/best/history.csv"), slurp(dir_ / "g2/best/history.csv"));
}

TEST_F(CliTrain, OnePointGrid) {
  std::string cfg = tiny_config(1);
  cfg = std::regex_replace(cfg, std::regex(R"("learning_rates": \[0.05, 0.01\])"), R"("learning_rates": [0.05])");
  cfg = std::regex_replace(cfg, std::regex(R"("optimizers": \["adam", "sgd"\])"), R"("optimizers": ["adam"])");
  write("run.json", cfg);
  Outcome r = run("grid --config " + p("run.json") + " --manifest " + p("syn/manifest.csv") + " --out " + p("g"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines_starting(slurp(dir_ / "g/grid_results.csv"), "0,0.05,adam,0,angle,strongly_entangling,pauliz,"),
            1u);
  EXPECT_NE(r.out.find("best point 0"), std::string::npos);
}

std::size_t printed_params(const std::string& out) {
  std::smatch m;
  if (!std::regex_search(out, m, std::regex(R"(trainable_params: (\d+))"))) return 0;
  return std::stoull(m[1]);
}

TEST_F(Cli, ReferenceHybridHasUnderFiftyFivePercentOfClassicalParams) {
  ASSERT_EQ(run("synth --classes 4 --per-class 10 --seed 7 --out " + p("syn")).code, 0);
  write("hybrid.json", R"({"model": {"kind": "hybrid"}, "train": {"epochs": 0, "seed": 3}})");
  write("classical.json", R"({"model": {"kind": "classical"}, "train": {"epochs": 0, "seed": 3}})");
  Outcome h = run("train --config " + p("hybrid.json") + " --manifest " + p("syn/manifest.csv") + " --out " + p("h"));
  Outcome c = run("train --config " + p("classical.json") + " --manifest " + p("syn/manifest.csv") + " --out " + p("c"));
  ASSERT_EQ(h.code, 0) << h.err;
  ASSERT_EQ(c.code, 0) << c.err;
  const double hp = static_cast<double>(printed_params(h.out));
  const double cp = static_cast<double>(printed_params(c.out));
  ASSERT_GT(cp, 0.0);
  EXPECT_LE(hp / cp, 0.55);
}

}  // namespace
}  // namespace qser
