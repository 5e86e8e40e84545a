#pragma once

#include "alpl/dataset.hpp"
#include "alpl/loop.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace alpl {

/// Everything needed to reproduce an experiment. Serialised as a flat "key = value"
/// document; every key is also a command-line flag of the same name.
struct ExperimentConfig {
  std::string format = "blobs";  // blobs | csv | idx
  std::string train_path;
  std::string test_path;
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  double test_fraction = 0.2;
  std::size_t num_classes = 0;  // 0 = infer (csv) or 10 (idx)
  std::uint64_t data_seed = 0;
  std::string standardize = "auto";  // auto | true | false
  data::BlobsSpec blobs;

  loop::AlplConfig alpl;
  std::optional<std::size_t> budget;  // unset = b * T

  std::vector<std::uint64_t> seeds = {0};
  std::size_t workers = 0;  // 0 = available parallelism
  std::string output_dir = "results";
  bool record_timings = false;

  /// Budget actually used by the loop.
  std::size_t effective_budget() const;

  /// Throws ConfigError when an invariant is broken.
  void validate() const;
};

using KeyValues = std::map<std::string, std::string>;

/// Names of every accepted key, in serialisation order.
const std::vector<std::string>& config_keys();

/// One-line description of a key, for --help output.
std::string describe_key(const std::string& key);

/// Parses "key = value" lines. '#' starts a comment. Unknown keys are rejected.
KeyValues parse_key_values(const std::string& text);

/// Applies key/value pairs on top of an existing config.
void apply_overrides(ExperimentConfig& config, const KeyValues& values);

KeyValues to_key_values(const ExperimentConfig& config);

std::string serialize(const ExperimentConfig& config);
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

}  // namespace alpl
