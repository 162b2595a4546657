#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fraclab/nn.hpp"

namespace fraclab {

struct Dataset {
  std::vector<double> features;  // row-major, samples x input_dim
  std::vector<int32_t> labels;
  int input_dim = 0;
  int classes = 0;

  int size() const { return static_cast<int>(labels.size()); }
  Batch as_batch() const {
    return Batch{features.data(), labels.data(), size(), input_dim, classes};
  }
  Batch row_batch(const std::vector<int>& rows, std::vector<double>& fbuf,
                  std::vector<int32_t>& lbuf) const;
};

struct SplitSpec {
  double train_fraction = 0.5;
  uint64_t seed = 0;
  std::optional<int> subset_size;
  bool balanced = true;  // class-balanced subset selection
};

struct IdxOptions {
  bool standardize = false;  // per-image mean0/std1 after the [0,1] scaling
};

// IDX (big-endian) reader; pixels scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const IdxOptions& opts = {});
// Fixture/export writer, round-trips through load_idx.
void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path);

// Gaussian class blobs at fixed deterministic centers. Center of class c is
// +/- e_{c/2 mod dim} (sign alternates with c), so k=2 gives +e0 / -e0.
Dataset synth_blobs(int classes, int dim, int per_class, double spread,
                    uint64_t seed);

// Flip a fraction of train labels to a different uniform class. Used to put
// architecture sweeps into the memorization regime.
void corrupt_labels(Dataset& ds, double fraction, uint64_t seed);

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

// One epoch worth of minibatch index lists: a reshuffled partition of the
// dataset. Short final batch is kept.
std::vector<std::vector<int>> batches(const Dataset& ds, int batch_size,
                                      uint64_t epoch_seed);

void export_csv(const Dataset& ds, const std::string& path);

}  // namespace fraclab
