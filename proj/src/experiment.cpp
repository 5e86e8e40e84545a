#include "alpl/experiment.hpp"

#include "alpl/error.hpp"
#include "alpl/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

namespace alpl {

namespace fs = std::filesystem;
using nlohmann::json;

data::DatasetBundle load_dataset(const ExperimentConfig& config) {
  config.validate();
  data::DatasetBundle bundle;
  if (config.format == "blobs") {
    data::BlobsSpec spec = config.blobs;
    spec.seed = config.data_seed;
    bundle = data::make_blobs(spec);
  } else if (config.format == "idx") {
    const std::size_t k = config.num_classes == 0 ? 10 : config.num_classes;
    bundle.num_classes = k;
    bundle.train = data::load_idx(config.train_images, config.train_labels, k);
    bundle.test = data::load_idx(config.test_images, config.test_labels, k);
    bundle.num_features = static_cast<std::size_t>(bundle.train.features.cols());
    if (bundle.test.features.cols() != bundle.train.features.cols()) {
      throw FormatError("train and test images differ in size");
    }
  } else {
    auto train = data::load_csv(config.train_path, config.num_classes);
    bundle.num_classes = train.num_classes;
    bundle.num_features = train.num_features;
    bundle.dropped_rows = train.dropped_rows;
    bundle.train = std::move(train.split);
    if (!config.test_path.empty()) {
      auto test = data::load_csv(config.test_path, bundle.num_classes);
      if (test.num_features != bundle.num_features) throw FormatError("train and test CSVs differ in width");
      bundle.dropped_rows += test.dropped_rows;
      bundle.test = std::move(test.split);
    } else {
      data::split_off_test(bundle, config.test_fraction, config.data_seed);
    }
  }
  const bool standardize = config.standardize == "true" || (config.standardize == "auto" && config.format == "csv");
  if (standardize) data::standardize(bundle);
  if (config.alpl.generation == GenerationMode::kGiven && !bundle.train.has_candidate_sets()) {
    throw DataError("generation = given needs a dataset with a candidate_labels column");
  }
  return bundle;
}

std::uint64_t derive_run_seed(std::uint64_t seed, std::size_t rep) { return mix_seed(seed, rep); }

std::string to_jsonl_line(const RunRecord& record, bool include_timing) {
  const auto& r = record.round;
  json j = {
      {"repetition", record.repetition},
      {"seed", r.seed},
      {"selector", record.selector},
      {"round", r.round},
      {"labeled", r.labeled_count},
      {"budget_remaining", r.budget_remaining},
      {"test_acc_plain", r.test_accuracy_plain},
      {"test_acc_wp", r.test_accuracy_wp},
      {"val_acc_plain", r.val_accuracy_plain},
      {"val_acc_wp", r.val_accuracy_wp},
  };
  if (include_timing) j["selector_seconds"] = r.selector_seconds;
  return j.dump();
}

RunRecord parse_jsonl_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    RunRecord rec;
    rec.repetition = j.at("repetition").get<std::size_t>();
    rec.selector = j.at("selector").get<std::string>();
    auto& r = rec.round;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.round = j.at("round").get<std::size_t>();
    r.labeled_count = j.at("labeled").get<std::size_t>();
    r.budget_remaining = j.at("budget_remaining").get<std::size_t>();
    r.test_accuracy_plain = j.at("test_acc_plain").get<double>();
    r.test_accuracy_wp = j.at("test_acc_wp").get<double>();
    r.val_accuracy_plain = j.at("val_acc_plain").get<double>();
    r.val_accuracy_wp = j.at("val_acc_wp").get<double>();
    r.selector_seconds = j.value("selector_seconds", 0.0);
    for (double a : {r.test_accuracy_plain, r.test_accuracy_wp, r.val_accuracy_plain, r.val_accuracy_wp}) {
      if (!(a >= 0.0 && a <= 1.0)) throw FormatError("accuracy outside [0, 1]");
    }
    return rec;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad record: ") + e.what());
  }
}

std::vector<RunRecord> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<RunRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_jsonl_line(line));
  }
  return out;
}

std::vector<SummaryRow> summarize(std::span<const RunRecord> records) {
  std::map<std::size_t, std::vector<const loop::RoundRecord*>> by_round;
  for (const auto& r : records) by_round[r.round.round].push_back(&r.round);

  auto mean_std = [](const std::vector<double>& xs) {
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    const double sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
    return std::pair{m, sd};
  };

  std::vector<SummaryRow> out;
  for (const auto& [round, rs] : by_round) {
    std::vector<double> plain, wp;
    SummaryRow row;
    row.round = round;
    row.runs = rs.size();
    row.labeled_count = rs.front()->labeled_count;
    for (const auto* r : rs) {
      plain.push_back(r->test_accuracy_plain);
      wp.push_back(r->test_accuracy_wp);
    }
    std::tie(row.plain_mean, row.plain_std) = mean_std(plain);
    std::tie(row.wp_mean, row.wp_std) = mean_std(wp);
    out.push_back(row);
  }
  return out;
}

void write_summary_csv(const std::string& path, std::span<const SummaryRow> rows) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "round,labeled,runs,plain_mean,plain_std,wp_mean,wp_std\n";
  out.precision(6);
  out << std::fixed;
  for (const auto& r : rows) {
    out << r.round << ',' << r.labeled_count << ',' << r.runs << ',' << r.plain_mean << ',' << r.plain_std << ','
        << r.wp_mean << ',' << r.wp_std << '\n';
  }
}

std::string resolve_output_dir(const ExperimentConfig& config) {
  fs::path dir(config.output_dir);
  if (const char* root = std::getenv("ALPL_OUTPUT_ROOT"); root != nullptr && *root != '\0' && dir.is_relative()) {
    dir = fs::path(root) / dir;
  }
  return dir.string();
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  const data::DatasetBundle dataset = load_dataset(config);

  loop::AlplConfig alpl = config.alpl;
  alpl.budget = config.effective_budget();

  ExperimentResult result;
  result.output_dir = resolve_output_dir(config);
  fs::create_directories(result.output_dir);
  {
    std::ofstream cfg(fs::path(result.output_dir) / "config.txt");
    cfg << serialize(config);
  }
  std::ofstream jsonl(fs::path(result.output_dir) / "rounds.jsonl", std::ios::trunc);
  if (!jsonl) throw FormatError("cannot write rounds.jsonl in " + result.output_dir);

  const std::size_t reps = config.seeds.size();
  std::size_t workers = config.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.workers;
  workers = std::min(workers, reps);

  struct Outcome {
    std::vector<loop::RoundRecord> records;
    std::string error;
  };
  std::vector<std::optional<Outcome>> outcomes(reps);
  std::mutex mu;
  std::condition_variable done;
  std::size_t next = 0;

  auto worker = [&] {
    for (;;) {
      std::size_t rep;
      {
        std::lock_guard lock(mu);
        if (next >= reps) return;
        rep = next++;
      }
      Outcome o;
      try {
        o.records = loop::run_alpl(alpl, dataset, derive_run_seed(config.seeds[rep], rep));
      } catch (const std::exception& e) {
        o.error = e.what();
      }
      {
        std::lock_guard lock(mu);
        outcomes[rep] = std::move(o);
      }
      done.notify_all();
    }
  };
  std::vector<std::jthread> pool;
  for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);

  // Single appender: records land in repetition order regardless of completion order.
  const std::string selector = select::to_string(config.alpl.selector);
  for (std::size_t rep = 0; rep < reps; ++rep) {
    Outcome o;
    {
      std::unique_lock lock(mu);
      done.wait(lock, [&] { return outcomes[rep].has_value(); });
      o = std::move(*outcomes[rep]);
    }
    if (!o.error.empty()) {
      result.failures.push_back("seed " + std::to_string(config.seeds[rep]) + ": " + o.error);
      if (log) *log << "repetition " << rep << " failed: " << o.error << '\n';
      continue;
    }
    for (const auto& r : o.records) {
      RunRecord rec{rep, selector, r};
      jsonl << to_jsonl_line(rec, config.record_timings) << '\n';
      result.records.push_back(rec);
    }
    jsonl.flush();
    if (log && !o.records.empty()) {
      const auto& last = o.records.back();
      *log << "repetition " << rep << " (seed " << config.seeds[rep] << "): final plain "
           << last.test_accuracy_plain << ", WP " << last.test_accuracy_wp << '\n';
    }
  }
  pool.clear();

  result.summary = summarize(result.records);
  write_summary_csv((fs::path(result.output_dir) / "summary.csv").string(), result.summary);
  return result;
}

}  // namespace alpl
