#pragma once

#include "alpl/config.hpp"
#include "alpl/dataset.hpp"
#include "alpl/loop.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace alpl {

/// Loads (or synthesises) the dataset named by the config, applying standardisation.
data::DatasetBundle load_dataset(const ExperimentConfig& config);

/// Run seed of repetition rep: independent of how many repetitions follow it.
std::uint64_t derive_run_seed(std::uint64_t seed, std::size_t rep);

/// A RoundRecord tagged with the repetition it came from.
struct RunRecord {
  std::size_t repetition = 0;
  std::string selector;
  loop::RoundRecord round;
};

std::string to_jsonl_line(const RunRecord& record, bool include_timing);
RunRecord parse_jsonl_line(const std::string& line);
std::vector<RunRecord> read_jsonl(const std::string& path);

struct SummaryRow {
  std::size_t round = 0;
  std::size_t labeled_count = 0;
  std::size_t runs = 0;
  double plain_mean = 0.0;
  double plain_std = 0.0;
  double wp_mean = 0.0;
  double wp_std = 0.0;
};

/// Mean and sample standard deviation of test accuracy per round across repetitions.
std::vector<SummaryRow> summarize(std::span<const RunRecord> records);
void write_summary_csv(const std::string& path, std::span<const SummaryRow> rows);

struct ExperimentResult {
  std::string output_dir;
  std::vector<RunRecord> records;
  std::vector<SummaryRow> summary;
  std::vector<std::string> failures;
};

/// Resolves config.output_dir against $ALPL_OUTPUT_ROOT when that is set and the
/// directory is relative.
std::string resolve_output_dir(const ExperimentConfig& config);

/// Runs every seed (in parallel up to config.workers), appends records to
/// rounds.jsonl in seed order and writes summary.csv and config.txt.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

}  // namespace alpl
