#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "qser/data.hpp"

namespace qser {
namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("qser_data_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void touch(const fs::path& p) { io::write_text(p, "x"); }

std::vector<Example> labelled(std::size_t n_classes, std::size_t per_class) {
  std::vector<Example> v;
  for (std::size_t k = 0; k < n_classes; ++k)
    for (std::size_t i = 0; i < per_class; ++i)
      v.push_back({"f" + std::to_string(k) + "_" + std::to_string(i), k, ""});
  return v;
}

TEST(Manifest, HeaderOnlyIsEmpty) {
  TempDir d("hdr");
  io::write_text(d.path() / "m.csv", "path,label\n");
  EXPECT_TRUE(load_manifest(d.path() / "m.csv").empty());
}

TEST(Manifest, RowsInFileOrder) {
  TempDir d("rows");
  for (auto n : {"a.qft", "b.qft", "c.qft"}) touch(d.path() / n);
  io::write_text(d.path() / "m.csv", "path,label\nc.qft,sad\na.qft,angry\nb.qft,Neutral\n");
  auto ex = load_manifest(d.path() / "m.csv");
  ASSERT_EQ(ex.size(), 3u);
  EXPECT_EQ(ex[0].feature_path, d.path() / "c.qft");
  EXPECT_EQ(ex[0].label, 3u);
  EXPECT_EQ(ex[1].label, 0u);
  EXPECT_EQ(ex[2].label, 2u);
  EXPECT_EQ(ex[0].raw_label, "sad");
  io::write_text(d.path() / "n.csv", "path,label\na.qft,1\nb.qft,0\n");
  EXPECT_EQ(load_manifest(d.path() / "n.csv")[0].label, 1u);
  io::write_text(d.path() / "mix.csv", "path,label\na.qft,sad\nb.qft,2\n");
  EXPECT_THROW(load_manifest(d.path() / "mix.csv"), IngestionError);
}

TEST(Manifest, MissingPathNamesTheRow) {
  TempDir d("missing");
  touch(d.path() / "a.qft");
  io::write_text(d.path() / "m.csv", "path,label\na.qft,low\nnope.qft,high\n");
  try {
    load_manifest(d.path() / "m.csv");
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("nope.qft"), std::string::npos);
  }
}

TEST(Manifest, ValenceColumnIsBinarized) {
  TempDir d("val");
  touch(d.path() / "a.qft");
  io::write_text(d.path() / "m.csv", "path,valence\na.qft,2.9\na.qft,3.0\na.qft,-0.5\n");
  auto ex = load_manifest(d.path() / "m.csv");
  EXPECT_EQ(ex[0].label, 0u);
  EXPECT_EQ(ex[1].label, 1u);
  auto rec = load_manifest(d.path() / "m.csv", ValenceScheme::RECOLA);
  EXPECT_EQ(rec[0].label, 1u);
  EXPECT_EQ(rec[2].label, 0u);
  io::write_text(d.path() / "z.csv", "path,valence\na.qft,0\n");
  EXPECT_THROW(load_manifest(d.path() / "z.csv", ValenceScheme::RECOLA), IngestionError);
}

TEST(Manifest, BadRowsAreIngestionErrors) {
  TempDir d("bad");
  touch(d.path() / "a.qft");
  io::write_text(d.path() / "h.csv", "file,label\n");
  EXPECT_THROW(load_manifest(d.path() / "h.csv"), IngestionError);
  io::write_text(d.path() / "u.csv", "path,label\na.qft,furious\n");
  EXPECT_THROW(load_manifest(d.path() / "u.csv"), IngestionError);
  io::write_text(d.path() / "f.csv", "path,label\na.qft\n");
  EXPECT_THROW(load_manifest(d.path() / "f.csv"), IngestionError);
  io::write_text(d.path() / "v.csv", "path,valence\na.qft,abc\n");
  EXPECT_THROW(load_manifest(d.path() / "v.csv"), IngestionError);
  EXPECT_THROW(load_manifest(d.path() / "none.csv"), IngestionError);
}

TEST(Valence, SchemeThresholds) {
  EXPECT_EQ(binarize_valence(2.9, ValenceScheme::IEMOCAP), 0u);
  EXPECT_EQ(binarize_valence(3.0, ValenceScheme::IEMOCAP), 1u);
  EXPECT_EQ(binarize_valence(-0.1, ValenceScheme::RECOLA), 0u);
  EXPECT_EQ(binarize_valence(0.1, ValenceScheme::RECOLA), 1u);
  EXPECT_THROW(binarize_valence(0.0, ValenceScheme::RECOLA), DataError);
  EXPECT_THROW(binarize_valence(NAN, ValenceScheme::IEMOCAP), DataError);
}

TEST(Valence, Monotone) {
  Rng rng(2);
  for (auto scheme : {ValenceScheme::IEMOCAP, ValenceScheme::RECOLA}) {
    for (int i = 0; i < 500; ++i) {
      double a = rng.uniform(-5, 7), b = rng.uniform(-5, 7);
      if (a > b) std::swap(a, b);
      if (scheme == ValenceScheme::RECOLA && (a == 0.0 || b == 0.0)) continue;
      EXPECT_LE(binarize_valence(a, scheme), binarize_valence(b, scheme));
    }
  }
}

TEST(Split, SingleClassSizes) {
  auto r = split(labelled(1, 10), SplitSpec{1, 0.8, 0.1, 0.1, true});
  EXPECT_EQ(r.train.size(), 8u);
  EXPECT_EQ(r.val.size(), 1u);
  EXPECT_EQ(r.test.size(), 1u);
}

TEST(Split, SameSeedSameSplit) {
  auto ex = labelled(3, 17);
  auto a = split(ex, SplitSpec{5}), b = split(ex, SplitSpec{5}), c = split(ex, SplitSpec{6});
  auto paths = [](const std::vector<Example>& v) {
    std::vector<std::string> p;
    for (auto& e : v) p.push_back(e.feature_path.string());
    return p;
  };
  EXPECT_EQ(paths(a.train), paths(b.train));
  EXPECT_EQ(paths(a.test), paths(b.test));
  EXPECT_NE(paths(a.train), paths(c.train));
}

TEST(Split, StratifiedBalance) {
  auto r = split(labelled(2, 50), SplitSpec{9, 0.5, 0.25, 0.25, true});
  std::size_t c0 = 0, c1 = 0;
  for (auto& e : r.train) (e.label ? c1 : c0)++;
  EXPECT_EQ(c0, 25u);
  EXPECT_EQ(c1, 25u);
}

TEST(Split, DisjointAndExhaustive) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto ex = labelled(1 + rng.uniform_index(4), 3 + rng.uniform_index(30));
    for (bool strat : {true, false}) {
      auto r = split(ex, SplitSpec{rng.next(), 0.6, 0.2, 0.2, strat});
      std::multiset<std::string> seen;
      for (auto* part : {&r.train, &r.val, &r.test})
        for (auto& e : *part) seen.insert(e.feature_path.string());
      EXPECT_EQ(seen.size(), ex.size());
      EXPECT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), ex.size());
    }
  }
}

TEST(Split, EmptyClassUnderStratification) {
  std::vector<Example> ex{{"a", 0, ""}, {"b", 2, ""}};
  EXPECT_THROW(split(ex, SplitSpec{}), DataError);
  EXPECT_THROW(split(ex, SplitSpec{0, 0.5, 0.5, 0.5}), ConfigError);
}

TEST(Synth, CountsAndLayout) {
  TempDir d("count");
  SynthConfig cfg;
  cfg.n_per_class = 10;
  cfg.n_classes = 2;
  cfg.seed = 3;
  auto manifest = generate_synthetic(cfg, d.path());
  auto ex = load_manifest(manifest);
  ASSERT_EQ(ex.size(), 20u);
  std::size_t per[2] = {0, 0};
  for (auto& e : ex) per[e.label]++;
  EXPECT_EQ(per[0], 10u);
  EXPECT_EQ(per[1], 10u);
  EXPECT_TRUE(fs::exists(d.path() / "low" / "0.qft"));
  EXPECT_TRUE(fs::exists(d.path() / "high" / "9.qft"));
  EXPECT_EQ(read_features(d.path() / "low" / "0.qft").shape(), (Shape{128, 126}));
}

TEST(Synth, ByteIdenticalAcrossRuns) {
  TempDir a("detA"), b("detB");
  SynthConfig cfg;
  cfg.n_per_class = 3;
  cfg.n_classes = 4;
  cfg.seed = 11;
  generate_synthetic(cfg, a.path());
  generate_synthetic(cfg, b.path());
  for (auto& entry : fs::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    auto rel = fs::relative(entry.path(), a.path());
    EXPECT_EQ(io::read_file(entry.path()), io::read_file(b.path() / rel)) << rel;
  }
}

double l2(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

TEST(Synth, NoiselessInterBeatsIntra) {
  for (std::size_t K : {2u, 4u}) {
    SynthConfig cfg;
    cfg.n_per_class = 8;
    cfg.n_classes = K;
    cfg.noise = false;
    std::vector<std::vector<Tensor>> ex(K);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < cfg.n_per_class; ++i) ex[k].push_back(synth_example(cfg, k, i));
    double max_intra = 0, min_inter = 1e300;
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < ex[k].size(); ++i) {
        for (std::size_t j = i + 1; j < ex[k].size(); ++j)
          max_intra = std::max(max_intra, l2(ex[k][i], ex[k][j]));
        for (std::size_t k2 = k + 1; k2 < K; ++k2)
          for (auto& other : ex[k2]) min_inter = std::min(min_inter, l2(ex[k][i], other));
      }
    EXPECT_GT(min_inter, max_intra) << K << " classes";
  }
}

// Nearest-centroid on flattened features: fit on half, score the rest.
TEST(Synth, NearestCentroidSeparatesAt20dB) {
  for (std::size_t K : {2u, 4u}) {
    SynthConfig cfg;
    cfg.n_per_class = 20;
    cfg.n_classes = K;
    cfg.snr_db = 20.0;
    std::vector<Tensor> centroid(K, Tensor({cfg.n_mels, cfg.n_frames}));
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < 10; ++i) {
        Tensor t = synth_example(cfg, k, i);
        for (std::size_t j = 0; j < t.size(); ++j) centroid[k][j] += t[j] / 10.0;
      }
    double recall_sum = 0;
    for (std::size_t k = 0; k < K; ++k) {
      std::size_t hit = 0;
      for (std::size_t i = 10; i < 20; ++i) {
        Tensor t = synth_example(cfg, k, i);
        std::size_t best = 0;
        for (std::size_t c = 1; c < K; ++c)
          if (l2(t, centroid[c]) < l2(t, centroid[best])) best = c;
        hit += best == k;
      }
      recall_sum += hit / 10.0;
    }
    EXPECT_GE(recall_sum / K, 0.95) << K << " classes";
  }
}

TEST(Synth, RejectsBadClassCount) {
  TempDir d("bad");
  SynthConfig cfg;
  cfg.n_classes = 3;
  EXPECT_THROW(generate_synthetic(cfg, d.path()), ConfigError);
}

TEST(Synth, UnwritableDirectoryIsIoError) {
  SynthConfig cfg;
  cfg.n_per_class = 1;
  TempDir d("ro");
  touch(d.path() / "file");
  EXPECT_THROW(generate_synthetic(cfg, d.path() / "file" / "sub"), IoError);
}

TEST(Dataset, LoadsImagesAndChecksShape) {
  TempDir d("ds");
  write_features(d.path() / "a.qft", Tensor({4, 6}, 1.0));
  write_features(d.path() / "b.qft", Tensor({4, 5}, 1.0));
  auto ds = load_dataset({{d.path() / "a.qft", 1, ""}});
  EXPECT_EQ(ds.inputs[0].shape(), (Shape{1, 4, 6}));
  EXPECT_EQ(ds.labels[0], 1u);
  EXPECT_THROW(load_dataset({{d.path() / "a.qft", 0, ""}, {d.path() / "b.qft", 0, ""}}),
               IngestionError);
}

}  // namespace
}  // namespace qser
