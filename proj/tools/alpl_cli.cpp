// Command-line front end: run, gen-data, validate, summarize.

#include "alpl/config.hpp"
#include "alpl/error.hpp"
#include "alpl/experiment.hpp"
#include "alpl/partial_labels.hpp"
#include "alpl/rng.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>

namespace {

// Registers one --key flag per config key; only flags given on the command line are kept.
void add_config_flags(CLI::App* cmd, std::map<std::string, std::string>& overrides) {
  for (const auto& key : alpl::config_keys()) {
    cmd->add_option_function<std::string>(
        "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; }, alpl::describe_key(key));
  }
}

alpl::ExperimentConfig resolve(const std::string& config_path, const std::map<std::string, std::string>& overrides) {
  alpl::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = alpl::load_config_file(config_path);
  alpl::apply_overrides(cfg, overrides);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active learning with partial labels: predictor, WorseNet and query strategies"};
  app.require_subcommand(1);

  std::string config_path;
  std::map<std::string, std::string> overrides;

  auto* run = app.add_subcommand("run", "run an experiment (config file plus flag overrides)");
  run->add_option("-c,--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  add_config_flags(run, overrides);
  bool print_config = false;
  run->add_flag("--print-config", print_config, "print the resolved config and exit");

  auto* gen = app.add_subcommand("gen-data", "write a Gaussian-blobs dataset as train/test CSV");
  std::string out_train = "blobs_train.csv", out_test = "blobs_test.csv", with_candidates;
  gen->add_option("-c,--config", config_path, "config file supplying blobs_* keys")->check(CLI::ExistingFile);
  gen->add_option("--out-train", out_train, "training CSV path");
  gen->add_option("--out-test", out_test, "test CSV path");
  gen->add_option("--with-candidates", with_candidates, "also store candidate sets drawn by uss or fps");
  add_config_flags(gen, overrides);

  auto* validate = app.add_subcommand("validate", "load the dataset named by the config and report its shape");
  validate->add_option("-c,--config", config_path, "config file")->check(CLI::ExistingFile);
  add_config_flags(validate, overrides);

  auto* summarize = app.add_subcommand("summarize", "recompute summary.csv from rounds.jsonl");
  std::string in_jsonl, out_csv;
  summarize->add_option("input", in_jsonl, "rounds.jsonl")->required()->check(CLI::ExistingFile);
  summarize->add_option("-o,--output", out_csv, "summary CSV (default: next to the input)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto cfg = resolve(config_path, overrides);
      if (print_config) {
        std::cout << alpl::serialize(cfg);
        return 0;
      }
      const auto result = alpl::run_experiment(cfg, &std::cerr);
      for (const auto& row : result.summary) {
        std::cout << "round " << row.round << "  |L|=" << row.labeled_count << "  plain " << row.plain_mean
                  << " +- " << row.plain_std << "  WP " << row.wp_mean << " +- " << row.wp_std << '\n';
      }
      std::cout << "outputs in " << result.output_dir << '\n';
      return result.failures.empty() ? 0 : 1;
    }
    if (*gen) {
      auto cfg = resolve(config_path, overrides);
      cfg.format = "blobs";
      auto bundle = alpl::load_dataset(cfg);
      if (!with_candidates.empty()) {
        const auto mode = alpl::parse_generation_mode(with_candidates);
        alpl::Rng rng(alpl::mix_seed(cfg.data_seed, 99));
        for (auto* split : {&bundle.train, &bundle.test}) {
          split->candidate_sets.clear();
          for (auto y : split->labels) {
            split->candidate_sets.emplace_back(
                mode == alpl::GenerationMode::kUss
                    ? alpl::generate_uss(y, bundle.num_classes, rng)
                    : alpl::generate_fps(y, bundle.num_classes, cfg.alpl.flip_prob, rng));
          }
        }
      }
      alpl::data::write_csv(out_train, bundle.train);
      alpl::data::write_csv(out_test, bundle.test);
      std::cout << "wrote " << bundle.train.size() << " training rows to " << out_train << " and "
                << bundle.test.size() << " test rows to " << out_test << '\n';
      return 0;
    }
    if (*validate) {
      const auto cfg = resolve(config_path, overrides);
      const auto bundle = alpl::load_dataset(cfg);
      std::cout << "train n=" << bundle.train.size() << " test n=" << bundle.test.size()
                << " d=" << bundle.num_features << " k=" << bundle.num_classes
                << " candidate_sets=" << (bundle.train.has_candidate_sets() ? "yes" : "no")
                << " dropped_rows=" << bundle.dropped_rows << '\n';
      if (bundle.dropped_rows > 0) {
        std::cerr << "warning: " << bundle.dropped_rows
                  << " rows dropped (candidate set empty, full, or missing the true label)\n";
      }
      return 0;
    }
    if (*summarize) {
      const auto records = alpl::read_jsonl(in_jsonl);
      if (out_csv.empty()) out_csv = (std::filesystem::path(in_jsonl).parent_path() / "summary.csv").string();
      alpl::write_summary_csv(out_csv, alpl::summarize(records));
      std::cout << "summarised " << records.size() << " records into " << out_csv << '\n';
      return 0;
    }
  } catch (const alpl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
