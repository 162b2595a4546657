#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "fraclab/data.hpp"
#include "fraclab/rng.hpp"
#include "fraclab/trainer.hpp"

using namespace fraclab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("fraclab_data_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// independent byte-level IDX writer used as the reference for load_idx
void write_idx_fixture(const fs::path& images, const fs::path& labels,
                       const std::vector<std::vector<unsigned char>>& pixels,
                       const std::vector<unsigned char>& labs, int side,
                       uint32_t images_magic = 0x00000803,
                       uint32_t labels_magic = 0x00000801,
                       bool truncate_images = false) {
  auto be32 = [](std::ofstream& f, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<char*>(b), 4);
  };
  std::ofstream fi(images, std::ios::binary);
  be32(fi, images_magic);
  be32(fi, static_cast<uint32_t>(pixels.size()));
  be32(fi, static_cast<uint32_t>(side));
  be32(fi, static_cast<uint32_t>(side));
  for (size_t i = 0; i < pixels.size(); ++i) {
    size_t n = pixels[i].size();
    if (truncate_images && i + 1 == pixels.size()) {
      n /= 2;
    }
    fi.write(reinterpret_cast<const char*>(pixels[i].data()),
             static_cast<std::streamsize>(n));
  }
  std::ofstream fl(labels, std::ios::binary);
  be32(fl, labels_magic);
  be32(fl, static_cast<uint32_t>(labs.size()));
  fl.write(reinterpret_cast<const char*>(labs.data()),
           static_cast<std::streamsize>(labs.size()));
}

std::vector<std::vector<unsigned char>> fixture_pixels(int n, int side) {
  std::vector<std::vector<unsigned char>> out;
  for (int i = 0; i < n; ++i) {
    std::vector<unsigned char> img(static_cast<size_t>(side) * side);
    for (size_t p = 0; p < img.size(); ++p) {
      img[p] = static_cast<unsigned char>((i * 37 + p * 11) % 256);
    }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace

TEST_CASE("load_idx reads a 4-image fixture") {
  TempDir td;
  const auto images = td.path / "img.idx";
  const auto labels = td.path / "lab.idx";
  const auto pix = fixture_pixels(4, 28);
  write_idx_fixture(images, labels, pix, {0, 1, 2, 3}, 28);

  const Dataset ds = load_idx(images.string(), labels.string());
  CHECK(ds.size() == 4);
  CHECK(ds.input_dim == 784);
  CHECK(ds.labels == std::vector<int32_t>{0, 1, 2, 3});

  // checksum of the first image vs the reference bytes
  double want = 0.0;
  for (unsigned char c : pix[0]) {
    want += c / 255.0;
  }
  double got = 0.0;
  for (int p = 0; p < 784; ++p) {
    got += ds.features[static_cast<size_t>(p)];
  }
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
  // pixels scaled to [0,1]
  for (double v : ds.features) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("load_idx rejects bad magic, truncation, count mismatch, bad label") {
  TempDir td;
  const auto images = td.path / "img.idx";
  const auto labels = td.path / "lab.idx";
  const auto pix = fixture_pixels(3, 4);

  write_idx_fixture(images, labels, pix, {0, 1, 2}, 4, 0xdeadbeef);
  CHECK_THROWS_WITH_AS(load_idx(images.string(), labels.string()),
                       doctest::Contains("magic"), DataError);

  write_idx_fixture(images, labels, pix, {0, 1, 2}, 4, 0x00000803, 0x00000777);
  CHECK_THROWS_WITH_AS(load_idx(images.string(), labels.string()),
                       doctest::Contains("magic"), DataError);

  write_idx_fixture(images, labels, pix, {0, 1}, 4);
  CHECK_THROWS_WITH_AS(load_idx(images.string(), labels.string()),
                       doctest::Contains("mismatch"), DataError);

  write_idx_fixture(images, labels, pix, {0, 1, 2}, 4, 0x00000803, 0x00000801,
                    /*truncate_images=*/true);
  CHECK_THROWS_WITH_AS(load_idx(images.string(), labels.string()),
                       doctest::Contains("truncated"), DataError);

  write_idx_fixture(images, labels, pix, {0, 1, 10}, 4);
  CHECK_THROWS_WITH_AS(load_idx(images.string(), labels.string()),
                       doctest::Contains("range"), DataError);

  CHECK_THROWS_AS(load_idx((td.path / "missing.idx").string(), labels.string()),
                  DataError);
}

TEST_CASE("idx round-trip") {
  TempDir td;
  Dataset ds = synth_blobs(3, 16, 5, 0.2, 4);
  // blob features are not in [0,1]; squash them for the byte format
  for (double& v : ds.features) {
    v = 0.5 + 0.25 * std::tanh(v);
    v = std::round(v * 255.0) / 255.0;  // byte-exact values round-trip
  }
  const auto images = td.path / "rt.img";
  const auto labels = td.path / "rt.lab";
  write_idx(ds, images.string(), labels.string());
  const Dataset back = load_idx(images.string(), labels.string());
  CHECK(back.size() == ds.size());
  CHECK(back.labels == ds.labels);
  for (size_t i = 0; i < ds.features.size(); ++i) {
    CHECK(back.features[i] == doctest::Approx(ds.features[i]).epsilon(1e-12));
  }
}

TEST_CASE("synth_blobs is deterministic and separable at tiny spread") {
  const Dataset a = synth_blobs(2, 3, 50, 1e-4, 7);
  const Dataset b = synth_blobs(2, 3, 50, 1e-4, 7);
  CHECK(a.features == b.features);  // bitwise
  CHECK(a.labels == b.labels);

  // nearest-center rule (a linear classifier for two centers) is perfect
  int correct = 0;
  for (int i = 0; i < a.size(); ++i) {
    const double x0 = a.features[static_cast<size_t>(i) * 3];
    const int32_t pred = x0 > 0.0 ? 0 : 1;
    correct += pred == a.labels[static_cast<size_t>(i)];
  }
  CHECK(correct == a.size());
}

TEST_CASE("blobs with sigma 0.1: trained MLP reaches sub-1% test error") {
  // centers +-e0 at distance 2 vs sigma 0.1: Bayes error ~ Q(10) < 1e-6
  const Dataset full = synth_blobs(2, 2, 300, 0.1, 11);
  SplitSpec spec;
  spec.train_fraction = 0.5;
  spec.seed = 3;
  auto [train, test] = split(full, spec);

  RunConfig cfg;
  cfg.arch = Architecture{{2, 8, 2}, Activation::kRelu, false};
  cfg.opt.kind = OptimizerKind::kSgd;
  cfg.opt.learning_rate = 0.05;
  cfg.opt.batch_size = 32;
  cfg.epochs = 40;
  cfg.seed = 5;
  cfg.telemetry_every = 100;
  cfg.llc_every = 0;
  const TrajectoryLog log = train_run(cfg, train, test);
  REQUIRE(!log.failed);
  CHECK(log.gen_error.back() < 0.01);
}

TEST_CASE("split determinism, disjointness, exhaustiveness") {
  const Dataset ds = synth_blobs(2, 4, 5, 0.3, 1);  // 10 samples
  SplitSpec spec;
  spec.train_fraction = 0.5;
  spec.seed = 9;
  auto [tr1, te1] = split(ds, spec);
  auto [tr2, te2] = split(ds, spec);
  CHECK(tr1.features == tr2.features);
  CHECK(te1.labels == te2.labels);
  CHECK(tr1.size() == 5);
  CHECK(te1.size() == 5);

  // disjoint + exhaustive: every original row appears exactly once
  auto row_key = [&](const Dataset& d, int i) {
    std::vector<double> key(d.features.begin() + i * d.input_dim,
                            d.features.begin() + (i + 1) * d.input_dim);
    return key;
  };
  std::set<std::vector<double>> seen;
  for (int i = 0; i < tr1.size(); ++i) {
    seen.insert(row_key(tr1, i));
  }
  for (int i = 0; i < te1.size(); ++i) {
    seen.insert(row_key(te1, i));
  }
  CHECK(seen.size() == 10);
}

TEST_CASE("batches partition the dataset each epoch and keep the short tail") {
  const Dataset ds = synth_blobs(2, 2, 11, 0.3, 2);  // 22 samples
  const auto bs = batches(ds, 8, 77);
  REQUIRE(bs.size() == 3);
  CHECK(bs[0].size() == 8);
  CHECK(bs[2].size() == 6);
  std::set<int> all;
  for (const auto& b : bs) {
    for (int i : b) {
      all.insert(i);
    }
  }
  CHECK(all.size() == 22);
  CHECK(*all.begin() == 0);
  CHECK(*all.rbegin() == 21);

  // single-batch case when batch_size exceeds the dataset
  const auto big = batches(ds, 100, 1);
  REQUIRE(big.size() == 1);
  CHECK(big[0].size() == 22);
}

TEST_CASE("epoch shuffles are position-uniform (chi-squared)") {
  const Dataset ds = synth_blobs(2, 2, 8, 0.3, 3);  // 16 samples
  const int n = ds.size();
  const int epochs = 1000;
  // counts[i][p]: how often sample i lands at position p
  std::vector<std::vector<int>> counts(static_cast<size_t>(n),
                                       std::vector<int>(static_cast<size_t>(n), 0));
  for (int e = 0; e < epochs; ++e) {
    const auto bs = batches(ds, n, derive_seed(123, {static_cast<uint64_t>(e)}));
    REQUIRE(bs.size() == 1);
    for (int p = 0; p < n; ++p) {
      counts[static_cast<size_t>(bs[0][static_cast<size_t>(p)])]
            [static_cast<size_t>(p)]++;
    }
  }
  // chi^2 over all n*n cells, expected epochs/n per cell
  const double expected = static_cast<double>(epochs) / n;
  double chi2 = 0.0;
  for (const auto& row : counts) {
    for (int c : row) {
      chi2 += (c - expected) * (c - expected) / expected;
    }
  }
  // dof = n*(n-1) = 240; p > 0.01 needs chi2 below roughly dof + 3.1*sqrt(2*dof)
  const double dof = static_cast<double>(n) * (n - 1);
  CHECK(chi2 < dof + 3.1 * std::sqrt(2.0 * dof));
  CHECK(chi2 > dof - 3.1 * std::sqrt(2.0 * dof));
}

TEST_CASE("balanced subset selection") {
  const Dataset ds = synth_blobs(4, 2, 100, 0.3, 5);
  SplitSpec spec;
  spec.train_fraction = 0.5;
  spec.seed = 1;
  spec.subset_size = 80;
  auto [train, test] = split(ds, spec);
  CHECK(train.size() + test.size() == 80);
  std::vector<int> class_counts(4, 0);
  for (int i = 0; i < train.size(); ++i) {
    class_counts[static_cast<size_t>(train.labels[static_cast<size_t>(i)])]++;
  }
  for (int i = 0; i < test.size(); ++i) {
    class_counts[static_cast<size_t>(test.labels[static_cast<size_t>(i)])]++;
  }
  for (int c : class_counts) {
    CHECK(c == 20);
  }
}

TEST_CASE("corrupt_labels flips the requested fraction") {
  Dataset ds = synth_blobs(3, 2, 100, 0.3, 6);
  const Dataset orig = ds;
  corrupt_labels(ds, 0.1, 99);
  int flips = 0;
  for (size_t i = 0; i < ds.labels.size(); ++i) {
    if (ds.labels[i] != orig.labels[i]) {
      flips++;
    }
    CHECK(ds.labels[i] >= 0);
    CHECK(ds.labels[i] < 3);
  }
  CHECK(flips == 30);
}

TEST_CASE("per-image standardization flag") {
  TempDir td;
  const auto images = td.path / "img.idx";
  const auto labels = td.path / "lab.idx";
  write_idx_fixture(images, labels, fixture_pixels(3, 8), {0, 1, 2}, 8);
  IdxOptions opts;
  opts.standardize = true;
  const Dataset ds = load_idx(images.string(), labels.string(), opts);
  for (int i = 0; i < ds.size(); ++i) {
    const double* row = ds.features.data() + static_cast<size_t>(i) * 64;
    double mu = 0.0, var = 0.0;
    for (int p = 0; p < 64; ++p) {
      mu += row[p];
    }
    mu /= 64.0;
    for (int p = 0; p < 64; ++p) {
      var += (row[p] - mu) * (row[p] - mu);
    }
    var /= 64.0;
    CHECK(std::abs(mu) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("csv export writes one row per sample") {
  TempDir td;
  const Dataset ds = synth_blobs(2, 3, 4, 0.2, 8);
  const auto path = td.path / "blobs.csv";
  export_csv(ds, path.string());
  std::ifstream f(path);
  std::string line;
  int lines = 0;
  while (std::getline(f, line)) {
    lines++;
  }
  CHECK(lines == 1 + ds.size());
}
