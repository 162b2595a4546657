#include "fraclab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "fraclab/rng.hpp"

namespace fraclab {

namespace {

constexpr uint32_t kImagesMagic = 0x00000803;
constexpr uint32_t kLabelsMagic = 0x00000801;

uint32_t read_be32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) {
    throw DataError("truncated IDX file while reading " + what);
  }
  return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
         (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

void write_be32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

Batch Dataset::row_batch(const std::vector<int>& rows, std::vector<double>& fbuf,
                         std::vector<int32_t>& lbuf) const {
  fbuf.resize(rows.size() * static_cast<size_t>(input_dim));
  lbuf.resize(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    const double* src = features.data() +
                        static_cast<size_t>(rows[i]) * static_cast<size_t>(input_dim);
    std::copy(src, src + input_dim,
              fbuf.data() + i * static_cast<size_t>(input_dim));
    lbuf[i] = labels[static_cast<size_t>(rows[i])];
  }
  return Batch{fbuf.data(), lbuf.data(), static_cast<int>(rows.size()),
               input_dim, classes};
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const IdxOptions& opts) {
  std::ifstream fi(images_path, std::ios::binary);
  if (!fi) {
    throw DataError("cannot open IDX images file: " + images_path);
  }
  std::ifstream fl(labels_path, std::ios::binary);
  if (!fl) {
    throw DataError("cannot open IDX labels file: " + labels_path);
  }

  const uint32_t im = read_be32(fi, "images magic");
  if (im != kImagesMagic) {
    throw DataError("bad IDX images magic number in " + images_path);
  }
  const uint32_t n_images = read_be32(fi, "image count");
  const uint32_t rows = read_be32(fi, "rows");
  const uint32_t cols = read_be32(fi, "cols");

  const uint32_t lm = read_be32(fl, "labels magic");
  if (lm != kLabelsMagic) {
    throw DataError("bad IDX labels magic number in " + labels_path);
  }
  const uint32_t n_labels = read_be32(fl, "label count");
  if (n_images != n_labels) {
    throw DataError("IDX image/label count mismatch: " +
                    std::to_string(n_images) + " vs " + std::to_string(n_labels));
  }

  const size_t dim = static_cast<size_t>(rows) * cols;
  Dataset ds;
  ds.input_dim = static_cast<int>(dim);
  ds.features.resize(static_cast<size_t>(n_images) * dim);
  ds.labels.resize(n_images);

  std::vector<unsigned char> buf(dim);
  for (uint32_t i = 0; i < n_images; ++i) {
    fi.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim));
    if (!fi) {
      throw DataError("truncated IDX images file: " + images_path);
    }
    double* dst = ds.features.data() + static_cast<size_t>(i) * dim;
    for (size_t p = 0; p < dim; ++p) {
      dst[p] = buf[p] / 255.0;
    }
    if (opts.standardize) {
      double mu = 0.0;
      for (size_t p = 0; p < dim; ++p) {
        mu += dst[p];
      }
      mu /= static_cast<double>(dim);
      double var = 0.0;
      for (size_t p = 0; p < dim; ++p) {
        var += (dst[p] - mu) * (dst[p] - mu);
      }
      var /= static_cast<double>(dim);
      const double inv = 1.0 / std::sqrt(var + 1e-8);
      for (size_t p = 0; p < dim; ++p) {
        dst[p] = (dst[p] - mu) * inv;
      }
    }
  }

  int max_label = 0;
  for (uint32_t i = 0; i < n_labels; ++i) {
    unsigned char c;
    fl.read(reinterpret_cast<char*>(&c), 1);
    if (!fl) {
      throw DataError("truncated IDX labels file: " + labels_path);
    }
    if (c > 9) {
      throw DataError("IDX label out of range [0,9]: " + std::to_string(int(c)));
    }
    ds.labels[i] = c;
    max_label = std::max(max_label, int(c));
  }
  ds.classes = max_label + 1;
  return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path) {
  const int side = static_cast<int>(std::lround(std::sqrt(double(ds.input_dim))));
  if (side * side != ds.input_dim) {
    throw DataError("write_idx: input_dim must be a perfect square");
  }
  std::ofstream fi(images_path, std::ios::binary);
  std::ofstream fl(labels_path, std::ios::binary);
  if (!fi || !fl) {
    throw DataError("write_idx: cannot open output files");
  }
  write_be32(fi, kImagesMagic);
  write_be32(fi, static_cast<uint32_t>(ds.size()));
  write_be32(fi, static_cast<uint32_t>(side));
  write_be32(fi, static_cast<uint32_t>(side));
  for (size_t i = 0; i < ds.features.size(); ++i) {
    const double v = std::clamp(ds.features[i], 0.0, 1.0);
    const unsigned char c = static_cast<unsigned char>(std::lround(v * 255.0));
    fi.write(reinterpret_cast<const char*>(&c), 1);
  }
  write_be32(fl, kLabelsMagic);
  write_be32(fl, static_cast<uint32_t>(ds.size()));
  for (int32_t l : ds.labels) {
    const unsigned char c = static_cast<unsigned char>(l);
    fl.write(reinterpret_cast<const char*>(&c), 1);
  }
}

Dataset synth_blobs(int classes, int dim, int per_class, double spread,
                    uint64_t seed) {
  if (classes < 1 || dim < 1 || per_class < 1) {
    throw ConfigError("synth_blobs: classes, dim, per_class must be >= 1");
  }
  if (spread <= 0.0) {
    throw ConfigError("synth_blobs: spread must be positive");
  }
  Dataset ds;
  ds.input_dim = dim;
  ds.classes = classes;
  const int n = classes * per_class;
  ds.features.resize(static_cast<size_t>(n) * dim);
  ds.labels.resize(static_cast<size_t>(n));
  Rng rng(derive_seed(seed, {0x626c6f62ULL}));
  int row = 0;
  for (int c = 0; c < classes; ++c) {
    const int axis = (c / 2) % dim;
    const double sign = (c % 2 == 0) ? 1.0 : -1.0;
    for (int i = 0; i < per_class; ++i, ++row) {
      double* x = ds.features.data() + static_cast<size_t>(row) * dim;
      for (int d = 0; d < dim; ++d) {
        x[d] = spread * rng.normal();
      }
      x[axis] += sign;
      ds.labels[static_cast<size_t>(row)] = c;
    }
  }
  return ds;
}

void corrupt_labels(Dataset& ds, double fraction, uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) {
    throw ConfigError("corrupt_labels: fraction must be in [0,1]");
  }
  if (ds.classes < 2 || fraction == 0.0) {
    return;
  }
  Rng rng(derive_seed(seed, {0x666c6970ULL}));
  const int n_flip = static_cast<int>(std::lround(fraction * ds.size()));
  std::vector<int> idx(static_cast<size_t>(ds.size()));
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  for (int i = 0; i < n_flip; ++i) {
    const int row = idx[static_cast<size_t>(i)];
    const int32_t old = ds.labels[static_cast<size_t>(row)];
    int32_t neu =
        static_cast<int32_t>(rng.below(static_cast<uint64_t>(ds.classes - 1)));
    if (neu >= old) {
      neu += 1;
    }
    ds.labels[static_cast<size_t>(row)] = neu;
  }
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0) {
    throw ConfigError("split: train_fraction must be in (0,1)");
  }
  Rng rng(derive_seed(spec.seed, {0x73706c69ULL}));

  std::vector<int> pool(static_cast<size_t>(ds.size()));
  std::iota(pool.begin(), pool.end(), 0);

  if (spec.subset_size) {
    const int want = *spec.subset_size;
    if (want < 2 || want > ds.size()) {
      throw ConfigError("split: subset_size out of range");
    }
    if (spec.balanced) {
      std::vector<std::vector<int>> by_class(static_cast<size_t>(ds.classes));
      for (int i = 0; i < ds.size(); ++i) {
        by_class[static_cast<size_t>(ds.labels[static_cast<size_t>(i)])].push_back(i);
      }
      for (auto& v : by_class) {
        rng.shuffle(v);
      }
      std::vector<int> chosen;
      const int per = want / ds.classes;
      for (auto& v : by_class) {
        for (int i = 0; i < per && i < static_cast<int>(v.size()); ++i) {
          chosen.push_back(v[static_cast<size_t>(i)]);
        }
      }
      // fill any remainder from the global shuffled pool
      rng.shuffle(pool);
      for (int i : pool) {
        if (static_cast<int>(chosen.size()) >= want) {
          break;
        }
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
          chosen.push_back(i);
        }
      }
      pool = std::move(chosen);
    } else {
      rng.shuffle(pool);
      pool.resize(static_cast<size_t>(want));
    }
  }

  rng.shuffle(pool);
  const int n_train =
      static_cast<int>(std::lround(spec.train_fraction * pool.size()));
  if (n_train < 1 || n_train >= static_cast<int>(pool.size())) {
    throw ConfigError("split: resulting split is empty on one side");
  }

  auto gather = [&](int lo, int hi) {
    Dataset out;
    out.input_dim = ds.input_dim;
    out.classes = ds.classes;
    out.features.resize(static_cast<size_t>(hi - lo) *
                        static_cast<size_t>(ds.input_dim));
    out.labels.resize(static_cast<size_t>(hi - lo));
    for (int i = lo; i < hi; ++i) {
      const int row = pool[static_cast<size_t>(i)];
      const double* src = ds.features.data() +
                          static_cast<size_t>(row) * ds.input_dim;
      std::copy(src, src + ds.input_dim,
                out.features.data() +
                    static_cast<size_t>(i - lo) * ds.input_dim);
      out.labels[static_cast<size_t>(i - lo)] = ds.labels[static_cast<size_t>(row)];
    }
    return out;
  };
  return {gather(0, n_train), gather(n_train, static_cast<int>(pool.size()))};
}

std::vector<std::vector<int>> batches(const Dataset& ds, int batch_size,
                                      uint64_t epoch_seed) {
  if (batch_size < 1) {
    throw ConfigError("batches: batch_size must be positive");
  }
  std::vector<int> order(static_cast<size_t>(ds.size()));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(epoch_seed, {0x62617463ULL}));
  rng.shuffle(order);
  std::vector<std::vector<int>> out;
  for (size_t i = 0; i < order.size(); i += static_cast<size_t>(batch_size)) {
    const size_t hi = std::min(order.size(), i + static_cast<size_t>(batch_size));
    out.emplace_back(order.begin() + static_cast<long>(i),
                     order.begin() + static_cast<long>(hi));
  }
  return out;
}

void export_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) {
    throw DataError("export_csv: cannot open " + path);
  }
  f << "label";
  for (int d = 0; d < ds.input_dim; ++d) {
    f << ",x" << d;
  }
  f << "\n";
  char buf[32];
  for (int i = 0; i < ds.size(); ++i) {
    f << ds.labels[static_cast<size_t>(i)];
    const double* row = ds.features.data() + static_cast<size_t>(i) * ds.input_dim;
    for (int d = 0; d < ds.input_dim; ++d) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[d]);
      f << ',' << buf;
    }
    f << "\n";
  }
}

}  // namespace fraclab
