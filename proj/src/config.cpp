#include "alpl/config.hpp"

#include "alpl/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace alpl {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string real_str(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string bool_str(bool v) { return v ? "true" : "false"; }

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (const auto& x : xs) {
    if (!out.empty()) out += ',';
    out += std::to_string(x);
  }
  return out;
}

template <typename T>
std::vector<T> split_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int<T>(key, trim(item)));
  return out;
}

struct KeySpec {
  std::string name;
  std::string help;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

const std::vector<KeySpec>& key_specs() {
  using C = ExperimentConfig;
  using S = const std::string&;
  static const std::vector<KeySpec> specs = {
      {"format", "dataset format: blobs, csv or idx", [](const C& c) { return c.format; },
       [](C& c, S v) { c.format = v; }},
      {"train_path", "training CSV (csv format)", [](const C& c) { return c.train_path; },
       [](C& c, S v) { c.train_path = v; }},
      {"test_path", "test CSV; empty splits test_fraction off the training file",
       [](const C& c) { return c.test_path; }, [](C& c, S v) { c.test_path = v; }},
      {"train_images", "IDX training images", [](const C& c) { return c.train_images; },
       [](C& c, S v) { c.train_images = v; }},
      {"train_labels", "IDX training labels", [](const C& c) { return c.train_labels; },
       [](C& c, S v) { c.train_labels = v; }},
      {"test_images", "IDX test images", [](const C& c) { return c.test_images; },
       [](C& c, S v) { c.test_images = v; }},
      {"test_labels", "IDX test labels", [](const C& c) { return c.test_labels; },
       [](C& c, S v) { c.test_labels = v; }},
      {"test_fraction", "fraction held out as test when no test file is given",
       [](const C& c) { return real_str(c.test_fraction); },
       [](C& c, S v) { c.test_fraction = parse_real("test_fraction", v); }},
      {"num_classes", "class count; 0 infers it (csv) or uses 10 (idx)",
       [](const C& c) { return std::to_string(c.num_classes); },
       [](C& c, S v) { c.num_classes = parse_int<std::size_t>("num_classes", v); }},
      {"data_seed", "seed for synthetic data and train/test splitting",
       [](const C& c) { return std::to_string(c.data_seed); },
       [](C& c, S v) { c.data_seed = parse_int<std::uint64_t>("data_seed", v); }},
      {"standardize", "auto, true or false (auto standardises csv data only)",
       [](const C& c) { return c.standardize; }, [](C& c, S v) { c.standardize = v; }},
      {"blobs_k", "blobs: class count", [](const C& c) { return std::to_string(c.blobs.num_classes); },
       [](C& c, S v) { c.blobs.num_classes = parse_int<std::size_t>("blobs_k", v); }},
      {"blobs_d", "blobs: feature count", [](const C& c) { return std::to_string(c.blobs.num_features); },
       [](C& c, S v) { c.blobs.num_features = parse_int<std::size_t>("blobs_d", v); }},
      {"blobs_per_class", "blobs: training samples per class",
       [](const C& c) { return std::to_string(c.blobs.per_class); },
       [](C& c, S v) { c.blobs.per_class = parse_int<std::size_t>("blobs_per_class", v); }},
      {"blobs_test_per_class", "blobs: test samples per class",
       [](const C& c) { return std::to_string(c.blobs.test_per_class); },
       [](C& c, S v) { c.blobs.test_per_class = parse_int<std::size_t>("blobs_test_per_class", v); }},
      {"blobs_spread", "blobs: per-class standard deviation", [](const C& c) { return real_str(c.blobs.spread); },
       [](C& c, S v) { c.blobs.spread = parse_real("blobs_spread", v); }},
      {"generation", "partial-label oracle: uss, fps or given",
       [](const C& c) { return to_string(c.alpl.generation); },
       [](C& c, S v) { c.alpl.generation = parse_generation_mode(v); }},
      {"flip_prob", "fps flip probability q in [0, 1)", [](const C& c) { return real_str(c.alpl.flip_prob); },
       [](C& c, S v) { c.alpl.flip_prob = parse_real("flip_prob", v); }},
      {"selector", "RANDOM, MCU, MMU, EU, WS_MCU, WS_MMU, WS_EU or CORESET",
       [](const C& c) { return select::to_string(c.alpl.selector); },
       [](C& c, S v) { c.alpl.selector = select::parse_selector(v); }},
      {"b0", "initial labeled size", [](const C& c) { return std::to_string(c.alpl.initial_size); },
       [](C& c, S v) { c.alpl.initial_size = parse_int<std::size_t>("b0", v); }},
      {"b", "query size per round", [](const C& c) { return std::to_string(c.alpl.query_size); },
       [](C& c, S v) { c.alpl.query_size = parse_int<std::size_t>("b", v); }},
      {"rounds", "number of query rounds T", [](const C& c) { return std::to_string(c.alpl.rounds); },
       [](C& c, S v) { c.alpl.rounds = parse_int<std::size_t>("rounds", v); }},
      {"budget", "total query budget B, or auto for b * rounds",
       [](const C& c) { return c.budget ? std::to_string(*c.budget) : std::string("auto"); },
       [](C& c, S v) {
         if (v == "auto") c.budget.reset();
         else c.budget = parse_int<std::size_t>("budget", v);
       }},
      {"val_size", "validation samples drawn from the training split",
       [](const C& c) { return std::to_string(c.alpl.validation_size); },
       [](C& c, S v) { c.alpl.validation_size = parse_int<std::size_t>("val_size", v); }},
      {"hidden", "comma-separated hidden layer widths", [](const C& c) { return join(c.alpl.hidden); },
       [](C& c, S v) { c.alpl.hidden = split_list<std::size_t>("hidden", v); }},
      {"epochs", "training epochs per round", [](const C& c) { return std::to_string(c.alpl.schedule.epochs); },
       [](C& c, S v) { c.alpl.schedule.epochs = parse_int<std::size_t>("epochs", v); }},
      {"batch_size", "mini-batch size", [](const C& c) { return std::to_string(c.alpl.schedule.batch_size); },
       [](C& c, S v) { c.alpl.schedule.batch_size = parse_int<std::size_t>("batch_size", v); }},
      {"lr", "Adam learning rate", [](const C& c) { return real_str(c.alpl.schedule.lr); },
       [](C& c, S v) { c.alpl.schedule.lr = parse_real("lr", v); }},
      {"alpha", "weight of the KLD term in the WorseNet loss",
       [](const C& c) { return real_str(c.alpl.schedule.alpha); },
       [](C& c, S v) { c.alpl.schedule.alpha = parse_real("alpha", v); }},
      {"reinit", "re-initialise both networks every round",
       [](const C& c) { return bool_str(c.alpl.schedule.reinit_per_round); },
       [](C& c, S v) { c.alpl.schedule.reinit_per_round = parse_bool("reinit", v); }},
      {"flow_through_weights", "let gradients flow through RC/IRC weights (ablation)",
       [](const C& c) { return bool_str(c.alpl.schedule.weight_gradient == losses::WeightGradient::kFlowThrough); },
       [](C& c, S v) {
         c.alpl.schedule.weight_gradient = parse_bool("flow_through_weights", v)
                                               ? losses::WeightGradient::kFlowThrough
                                               : losses::WeightGradient::kDetached;
       }},
      {"ws_renormalize", "renormalise p over S' in WS selectors (ablation)",
       [](const C& c) { return bool_str(c.alpl.ws.renormalize); },
       [](C& c, S v) { c.alpl.ws.renormalize = parse_bool("ws_renormalize", v); }},
      {"seeds", "comma-separated run seeds, one repetition each", [](const C& c) { return join(c.seeds); },
       [](C& c, S v) { c.seeds = split_list<std::uint64_t>("seeds", v); }},
      {"workers", "parallel repetitions; 0 uses available parallelism",
       [](const C& c) { return std::to_string(c.workers); },
       [](C& c, S v) { c.workers = parse_int<std::size_t>("workers", v); }},
      {"output_dir", "directory for rounds.jsonl and summary.csv", [](const C& c) { return c.output_dir; },
       [](C& c, S v) { c.output_dir = v; }},
      {"record_timings", "include selector wall time in rounds.jsonl",
       [](const C& c) { return bool_str(c.record_timings); },
       [](C& c, S v) { c.record_timings = parse_bool("record_timings", v); }},
  };
  return specs;
}

const KeySpec& find_key(const std::string& key) {
  for (const auto& s : key_specs()) {
    if (s.name == key) return s;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

std::size_t ExperimentConfig::effective_budget() const {
  return budget ? *budget : alpl.query_size * alpl.rounds;
}

void ExperimentConfig::validate() const {
  if (format != "blobs" && format != "csv" && format != "idx") {
    throw ConfigError("format must be blobs, csv or idx, got '" + format + "'");
  }
  if (format == "csv" && train_path.empty()) throw ConfigError("csv format needs train_path");
  if (format == "idx" && (train_images.empty() || train_labels.empty() || test_images.empty() || test_labels.empty())) {
    throw ConfigError("idx format needs train_images, train_labels, test_images and test_labels");
  }
  if (standardize != "auto" && standardize != "true" && standardize != "false") {
    throw ConfigError("standardize must be auto, true or false");
  }
  if (alpl.initial_size < 1) throw ConfigError("b0 must be at least 1");
  if (alpl.query_size < 1) throw ConfigError("b must be at least 1");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (alpl.generation == GenerationMode::kFps && !(alpl.flip_prob >= 0.0 && alpl.flip_prob < 1.0)) {
    throw ConfigError("flip_prob must lie in [0, 1)");
  }
  if (alpl.hidden.empty()) throw ConfigError("at least one hidden layer is required");
  if (std::find(alpl.hidden.begin(), alpl.hidden.end(), std::size_t{0}) != alpl.hidden.end()) {
    throw ConfigError("hidden widths must be positive");
  }
  const auto& s = alpl.schedule;
  if (s.epochs == 0 || s.batch_size == 0 || !(s.lr > 0.0) || !(s.alpha >= 0.0)) {
    throw ConfigError("epochs, batch_size and lr must be positive and alpha nonnegative");
  }
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& s : key_specs()) out.push_back(s.name);
    return out;
  }();
  return keys;
}

std::string describe_key(const std::string& key) { return find_key(key).help; }

KeyValues parse_key_values(const std::string& text) {
  KeyValues out;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    find_key(key);
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_overrides(ExperimentConfig& config, const KeyValues& values) {
  for (const auto& [k, v] : values) find_key(k).set(config, v);
}

KeyValues to_key_values(const ExperimentConfig& config) {
  KeyValues out;
  for (const auto& s : key_specs()) out[s.name] = s.get(config);
  return out;
}

std::string serialize(const ExperimentConfig& config) {
  std::string out;
  for (const auto& s : key_specs()) out += s.name + " = " + s.get(config) + "\n";
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  apply_overrides(c, parse_key_values(text));
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace alpl
