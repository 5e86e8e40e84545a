#include "alpl/loop.hpp"

#include "alpl/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

namespace alpl::loop {

namespace {

// Rng stream tags.
constexpr std::uint64_t kPoolStream = 1;
constexpr std::uint64_t kOracleStream = 2;
constexpr std::uint64_t kInitStream = 3;
constexpr std::uint64_t kTrainStream = 4;
constexpr std::uint64_t kSelectStream = 5;

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

std::vector<std::size_t> gather_labels(const std::vector<std::size_t>& labels, std::span<const std::size_t> rows) {
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(labels[r]);
  return out;
}

template <typename SetT>
std::vector<SetT> gather_sets(const std::vector<SetT>& sets, std::span<const std::size_t> positions) {
  std::vector<SetT> out;
  out.reserve(positions.size());
  for (auto p : positions) out.push_back(sets[p]);
  return out;
}

void check_schedule(const TrainSchedule& s) {
  if (s.epochs == 0 || s.batch_size == 0 || !(s.lr > 0.0)) {
    throw ConfigError("epochs, batch size and learning rate must be positive");
  }
  if (!(s.alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
}

// Shared epoch loop. batch_loss returns the loss report for the given training positions
// and cached forward pass; validate scores the current net.
template <typename BatchLoss, typename Validate>
ModelSnapshot fit(nn::DenseNet net, const Matrix& inputs, const TrainSchedule& schedule, Rng& rng,
                  BatchLoss batch_loss, Validate validate, bool has_validation, LossTrace* trace, const char* who) {
  check_schedule(schedule);
  const std::size_t n = static_cast<std::size_t>(inputs.rows());
  if (n == 0) throw ConfigError(std::string(who) + ": nothing to train on");

  nn::AdamState adam = nn::AdamState::for_net(net, nn::AdamConfig{.lr = schedule.lr});
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::optional<ModelSnapshot> best;
  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += schedule.batch_size) {
      const std::size_t len = std::min(schedule.batch_size, n - start);
      std::span<const std::size_t> positions(order.data() + start, len);
      const nn::BatchOutput out = nn::forward(net, gather_rows(inputs, positions));
      const losses::LossReport loss = batch_loss(positions, out);
      if (!std::isfinite(loss.value)) {
        throw NumericError(std::string(who) + ": non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss.value * static_cast<double>(len);
      nn::adam_step(net, adam, nn::backward(net, out, loss.grad_wrt_logits));
    }
    if (trace) trace->push_back(epoch_loss / static_cast<double>(n));

    const double acc = has_validation ? validate(net) : 0.0;
    const bool improved = !best || (has_validation ? acc > best->val_accuracy : true);
    if (improved) best = ModelSnapshot{net, acc, epoch};
  }
  return std::move(*best);
}

}  // namespace

PoolState init_pools(std::size_t num_train, std::size_t initial_size, std::size_t validation_size,
                     std::size_t budget, Rng& rng, Oracle& oracle) {
  if (initial_size == 0) throw ConfigError("initial labeled size b0 must be at least 1");
  if (initial_size + validation_size > num_train) {
    throw ConfigError("b0 + validation size (" + std::to_string(initial_size + validation_size) +
                      ") exceeds the training set (" + std::to_string(num_train) + ")");
  }
  std::vector<std::size_t> order(num_train);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));

  PoolState s;
  s.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(validation_size));
  s.labeled.assign(order.begin() + static_cast<std::ptrdiff_t>(validation_size),
                   order.begin() + static_cast<std::ptrdiff_t>(validation_size + initial_size));
  s.unlabeled.assign(order.begin() + static_cast<std::ptrdiff_t>(validation_size + initial_size), order.end());
  std::sort(s.unlabeled.begin(), s.unlabeled.end());

  s.validation_sets = oracle.annotate(s.validation);
  s.labeled_sets = oracle.annotate(s.labeled);
  s.counter_examples = s.labeled;
  for (const auto& set : s.labeled_sets) s.inverse_sets.push_back(invert(set));
  s.budget_remaining = budget;
  return s;
}

void absorb_queries(PoolState& state, std::span<const std::size_t> queried, std::span<const CandidateSet> sets) {
  if (queried.size() != sets.size()) throw ConfigError("one candidate set per queried sample is required");
  std::vector<std::size_t> sorted(queried.begin(), queried.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw RequestError("duplicate sample in a query batch");
  }
  if (!std::includes(state.unlabeled.begin(), state.unlabeled.end(), sorted.begin(), sorted.end())) {
    throw RequestError("queried sample is not in the unlabeled pool");
  }
  std::vector<std::size_t> rest;
  rest.reserve(state.unlabeled.size() - sorted.size());
  std::set_difference(state.unlabeled.begin(), state.unlabeled.end(), sorted.begin(), sorted.end(),
                      std::back_inserter(rest));
  state.unlabeled = std::move(rest);
  for (std::size_t i = 0; i < queried.size(); ++i) {
    state.labeled.push_back(queried[i]);
    state.labeled_sets.push_back(sets[i]);
    state.counter_examples.push_back(queried[i]);
    state.inverse_sets.push_back(invert(sets[i]));
  }
}

void check_invariants(const PoolState& state, std::size_t num_train) {
  std::vector<int> seen(num_train, 0);
  auto mark = [&](const std::vector<std::size_t>& ids, const char* name) {
    for (auto i : ids) {
      if (i >= num_train) throw DataError(std::string(name) + " holds out-of-range index " + std::to_string(i));
      ++seen[i];
    }
  };
  mark(state.labeled, "labeled pool");
  mark(state.unlabeled, "unlabeled pool");
  mark(state.validation, "validation split");
  for (std::size_t i = 0; i < num_train; ++i) {
    if (seen[i] != 1) throw DataError("sample " + std::to_string(i) + " is not in exactly one pool");
  }
  if (state.labeled_sets.size() != state.labeled.size()) throw DataError("labeled pool lacks candidate sets");
  if (state.counter_examples != state.labeled) throw DataError("counter-examples do not mirror the labeled pool");
  if (state.inverse_sets.size() != state.labeled_sets.size()) throw DataError("inverse sets out of step");
  for (std::size_t i = 0; i < state.labeled_sets.size(); ++i) {
    if (!(state.inverse_sets[i].mask() == state.labeled_sets[i].mask().complement())) {
      throw DataError("inverse set is not the complement of its candidate set");
    }
  }
}

ModelSnapshot train_predictor(const PoolState& state, const data::Split& train, nn::DenseNet net,
                              const TrainSchedule& schedule, Rng& rng, LossTrace* trace) {
  if (state.labeled.empty()) throw ConfigError("train_predictor: the labeled pool is empty");
  const Matrix inputs = gather_rows(train.features, state.labeled);
  const Matrix val_x = gather_rows(train.features, state.validation);
  const auto val_y = gather_labels(train.labels, state.validation);

  auto batch_loss = [&](std::span<const std::size_t> positions, const nn::BatchOutput& out) {
    const auto sets = gather_sets(state.labeled_sets, positions);
    return losses::rc_loss(out.probabilities, sets, schedule.weight_gradient);
  };
  auto validate = [&](const nn::DenseNet& f) {
    return accuracy(predict_plain(nn::predict_proba(f, val_x)), val_y);
  };
  return fit(std::move(net), inputs, schedule, rng, batch_loss, validate, !val_y.empty(), trace, "train_predictor");
}

ModelSnapshot train_worsenet(const PoolState& state, const data::Split& train, nn::DenseNet net,
                             const nn::DenseNet& frozen_predictor, const TrainSchedule& schedule, Rng& rng,
                             LossTrace* trace) {
  if (state.counter_examples.empty()) throw ConfigError("train_worsenet: no counter-examples");
  const Matrix inputs = gather_rows(train.features, state.counter_examples);
  const Matrix p_train = nn::predict_proba(frozen_predictor, inputs);
  const Matrix val_x = gather_rows(train.features, state.validation);
  const Matrix p_val = nn::predict_proba(frozen_predictor, val_x);
  const auto val_y = gather_labels(train.labels, state.validation);
  const losses::WorseLossConfig cfg{schedule.alpha};

  auto batch_loss = [&](std::span<const std::size_t> positions, const nn::BatchOutput& out) {
    const auto sets = gather_sets(state.inverse_sets, positions);
    const Matrix p = gather_rows(p_train, positions);
    return losses::worse_loss(out.probabilities, p, sets, cfg, schedule.weight_gradient);
  };
  auto validate = [&](const nn::DenseNet& w) {
    return accuracy(predict_wp(p_val, nn::predict_proba(w, val_x)), val_y);
  };
  return fit(std::move(net), inputs, schedule, rng, batch_loss, validate, !val_y.empty(), trace, "train_worsenet");
}

std::size_t predict_plain(std::span<const double> p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::size_t predict_wp(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw ConfigError("predict_wp: p and q differ in length");
  std::size_t best = 0;
  double best_score = p[0] + (1.0 - q[0]);
  for (std::size_t j = 1; j < p.size(); ++j) {
    const double s = p[j] + (1.0 - q[j]);
    if (s > best_score) {
      best_score = s;
      best = j;
    }
  }
  return best;
}

std::vector<std::size_t> predict_plain(const Matrix& p) {
  std::vector<std::size_t> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index arg = 0;
    p.row(i).maxCoeff(&arg);  // first maximum
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arg);
  }
  return out;
}

std::vector<std::size_t> predict_wp(const Matrix& p, const Matrix& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) throw ConfigError("predict_wp: shape mismatch");
  return predict_plain(Matrix((p.array() + (1.0 - q.array())).matrix()));
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  if (predicted.size() != truth.size()) throw ConfigError("accuracy: length mismatch");
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

AlplRun::AlplRun(const AlplConfig& config, const data::DatasetBundle& dataset, std::uint64_t seed)
    : config_(config),
      data_(dataset),
      seed_(seed),
      pool_rng_(Rng(seed).fork(kPoolStream)),
      train_rng_(Rng(seed).fork(kTrainStream)),
      select_rng_(Rng(seed).fork(kSelectStream)),
      oracle_(OracleSpec{config.generation, config.flip_prob, Rng(seed).fork(kOracleStream).seed()},
              dataset.num_classes, dataset.train.labels,
              dataset.train.has_candidate_sets() ? &dataset.train.candidate_sets : nullptr) {
  if (config_.query_size == 0) throw ConfigError("query size b must be positive");
  if (dataset.num_classes < 2) throw ConfigError("dataset needs at least two classes");
  if (static_cast<std::size_t>(dataset.train.features.cols()) != dataset.num_features) {
    throw ConfigError("dataset feature count does not match its declaration");
  }
  dims_.push_back(dataset.num_features);
  dims_.insert(dims_.end(), config_.hidden.begin(), config_.hidden.end());
  dims_.push_back(dataset.num_classes);
}

nn::DenseNet AlplRun::fresh_net(std::uint64_t tag) const {
  return nn::init_net(dims_, mix_seed(Rng(seed_).fork(kInitStream).seed(), tag));
}

void AlplRun::train_both() {
  const std::uint64_t round_tag = 2 * state_.round;
  nn::DenseNet f0 = (config_.schedule.reinit_per_round || !predictor_) ? fresh_net(round_tag) : predictor_->net;
  nn::DenseNet w0 = (config_.schedule.reinit_per_round || !worsenet_) ? fresh_net(round_tag + 1) : worsenet_->net;
  predictor_ = train_predictor(state_, data_.train, std::move(f0), config_.schedule, train_rng_);
  worsenet_ = train_worsenet(state_, data_.train, std::move(w0), predictor_->net, config_.schedule, train_rng_);
}

RoundRecord AlplRun::record(double selector_seconds) const {
  RoundRecord r;
  r.round = state_.round;
  r.labeled_count = state_.labeled.size();
  r.budget_remaining = state_.budget_remaining;
  r.val_accuracy_plain = predictor_->val_accuracy;
  r.val_accuracy_wp = worsenet_->val_accuracy;
  r.selector_seconds = selector_seconds;
  r.seed = seed_;
  if (data_.test.size() > 0) {
    const Matrix p = nn::predict_proba(predictor_->net, data_.test.features);
    const Matrix q = nn::predict_proba(worsenet_->net, data_.test.features);
    r.test_accuracy_plain = accuracy(predict_plain(p), data_.test.labels);
    r.test_accuracy_wp = accuracy(predict_wp(p, q), data_.test.labels);
  }
  return r;
}

RoundRecord AlplRun::initialize() {
  if (initialized_) throw RequestError("run already initialized");
  state_ = init_pools(data_.train.size(), config_.initial_size, config_.validation_size, config_.budget, pool_rng_,
                      oracle_);
  train_both();
  initialized_ = true;
  return record(0.0);
}

std::vector<std::size_t> AlplRun::select_queries() {
  using select::SelectorKind;
  const std::size_t b = config_.query_size;
  const auto kind = config_.selector;
  if (kind == SelectorKind::kRandom) {
    std::vector<std::size_t> pool = state_.unlabeled;
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t j = i + select_rng_.below(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(b);
    return pool;
  }
  const Matrix pool_x = gather_rows(data_.train.features, state_.unlabeled);
  if (kind == SelectorKind::kCoreset) {
    const Matrix pool_e = nn::embed(predictor_->net, pool_x);
    const Matrix lab_e = nn::embed(predictor_->net, gather_rows(data_.train.features, state_.labeled));
    std::vector<std::size_t> out;
    for (auto pos : select::coreset_select(pool_e, lab_e, b)) out.push_back(state_.unlabeled[pos]);
    return out;
  }
  const Matrix p = nn::predict_proba(predictor_->net, pool_x);
  const Matrix q = select::needs_worsenet(kind) ? nn::predict_proba(worsenet_->net, pool_x) : Matrix();
  return select::select_top_b(select::score_pool(kind, state_.unlabeled, p, q, config_.ws), b);
}

std::optional<RoundRecord> AlplRun::step() {
  if (!initialized_) throw RequestError("initialize() must run before step()");
  const std::size_t b = config_.query_size;
  if (state_.budget_remaining < b || state_.unlabeled.size() < b) return std::nullopt;

  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::size_t> queried = select_queries();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::vector<CandidateSet> sets = oracle_.annotate(queried);
  absorb_queries(state_, queried, sets);
  state_.budget_remaining -= b;
  state_.round += 1;
  train_both();
  return record(seconds);
}

std::vector<RoundRecord> run_alpl(const AlplConfig& config, const data::DatasetBundle& dataset, std::uint64_t seed) {
  AlplRun run(config, dataset, seed);
  std::vector<RoundRecord> records;
  records.push_back(run.initialize());
  while (run.pools().round < config.rounds && run.pools().budget_remaining > 0) {
    auto r = run.step();
    if (!r) break;
    records.push_back(*r);
  }
  return records;
}

}  // namespace alpl::loop
