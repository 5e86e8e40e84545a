#pragma once

#include "alpl/nn.hpp"
#include "alpl/partial_labels.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace alpl::data {

using nn::Matrix;

/// One partition of a dataset: features (n x d), true labels and, for datasets that
/// ship their own annotations, the stored candidate set of every row.
struct Split {
  Matrix features;
  std::vector<std::size_t> labels;
  std::vector<std::optional<CandidateSet>> candidate_sets;  // empty when none were stored

  std::size_t size() const { return labels.size(); }
  bool has_candidate_sets() const { return !candidate_sets.empty(); }
};

struct DatasetBundle {
  std::size_t num_classes = 0;
  std::size_t num_features = 0;
  Split train;
  Split test;
  std::size_t dropped_rows = 0;  ///< rows rejected while loading (candidate set invalid or missing y)
};

/// Parses one IDX image file (magic 0x00000803) and one IDX label file (0x00000801).
/// Pixels are scaled to [0, 1] and flattened row-major. Labels must be < num_classes.
Split load_idx(const std::string& images_path, const std::string& labels_path, std::size_t num_classes = 10);

struct CsvTable {
  Split split;
  std::size_t num_classes = 0;
  std::size_t num_features = 0;
  std::size_t dropped_rows = 0;
};

/// Reads a header-led CSV with columns f0..f{d-1}, true_label and optionally
/// candidate_labels ("2|5|7"). num_classes == 0 infers k from the largest class seen.
/// Rows whose candidate set is invalid, full, or misses the true label are dropped.
CsvTable load_csv(const std::string& path, std::size_t num_classes = 0);

/// Writes a split in the format read by load_csv.
void write_csv(const std::string& path, const Split& split);

struct BlobsSpec {
  std::size_t num_classes = 5;
  std::size_t num_features = 20;
  std::size_t per_class = 200;
  std::size_t test_per_class = 200;
  double spread = 1.0;
  std::uint64_t seed = 0;
};

/// Isotropic Gaussian clusters. Class means are at least 4 * max(spread, 1) apart.
DatasetBundle make_blobs(const BlobsSpec& spec);

/// Deterministically moves a fraction of the training rows into the test split.
void split_off_test(DatasetBundle& bundle, double test_fraction, std::uint64_t seed);

/// Standardises every feature to zero mean and unit variance using training statistics.
void standardize(DatasetBundle& bundle);

}  // namespace alpl::data
