#pragma once

#include "alpl/dataset.hpp"
#include "alpl/losses.hpp"
#include "alpl/nn.hpp"
#include "alpl/partial_labels.hpp"
#include "alpl/rng.hpp"
#include "alpl/selectors.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace alpl::loop {

using nn::Matrix;

struct TrainSchedule {
  std::size_t epochs = 200;
  std::size_t batch_size = 256;
  double lr = 1e-3;
  bool reinit_per_round = true;
  double alpha = 1.0;
  losses::WeightGradient weight_gradient = losses::WeightGradient::kDetached;
};

/// Parameters at the epoch with the best validation accuracy (first such epoch).
struct ModelSnapshot {
  nn::DenseNet net;
  double val_accuracy = 0.0;
  std::size_t best_epoch = 0;
};

/// Index bookkeeping of the query loop. Indices refer to rows of the training split.
/// counter_examples always mirrors labeled, with complementary masks.
struct PoolState {
  std::vector<std::size_t> labeled;
  std::vector<CandidateSet> labeled_sets;
  std::vector<std::size_t> unlabeled;  // kept sorted
  std::vector<std::size_t> counter_examples;
  std::vector<InverseCandidateSet> inverse_sets;
  std::vector<std::size_t> validation;
  std::vector<CandidateSet> validation_sets;
  std::size_t budget_remaining = 0;
  std::size_t round = 0;
};

/// Draws the validation split and the b0 initial samples uniformly at random and has the
/// oracle annotate both. Everything else becomes the unlabeled pool.
PoolState init_pools(std::size_t num_train, std::size_t initial_size, std::size_t validation_size,
                     std::size_t budget, Rng& rng, Oracle& oracle);

/// Moves queried ids from the unlabeled pool into labeled and counter-example pools.
void absorb_queries(PoolState& state, std::span<const std::size_t> queried, std::span<const CandidateSet> sets);

/// Throws DataError if the partition, mirroring or budget invariants are broken.
void check_invariants(const PoolState& state, std::size_t num_train);

/// Optional per-epoch mean training loss trace.
using LossTrace = std::vector<double>;

/// Trains the predictor with the RC loss on the labeled pool, keeping the snapshot with
/// the best plain validation accuracy.
ModelSnapshot train_predictor(const PoolState& state, const data::Split& train, nn::DenseNet net,
                              const TrainSchedule& schedule, Rng& rng, LossTrace* trace = nullptr);

/// Trains WorseNet with the Worse loss on the counter-examples. The predictor's
/// probabilities enter the KLD term as constants; the snapshot maximises the validation
/// accuracy of the combined argmax P + (1 - Q).
ModelSnapshot train_worsenet(const PoolState& state, const data::Split& train, nn::DenseNet net,
                             const nn::DenseNet& frozen_predictor, const TrainSchedule& schedule, Rng& rng,
                             LossTrace* trace = nullptr);

/// argmax_j p_j, lowest index on ties.
std::size_t predict_plain(std::span<const double> p);

/// argmax_j p_j + (1 - q_j), lowest index on ties.
std::size_t predict_wp(std::span<const double> p, std::span<const double> q);

std::vector<std::size_t> predict_plain(const Matrix& p);
std::vector<std::size_t> predict_wp(const Matrix& p, const Matrix& q);

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

struct RoundRecord {
  std::size_t round = 0;
  std::size_t labeled_count = 0;
  std::size_t budget_remaining = 0;
  double test_accuracy_plain = 0.0;
  double test_accuracy_wp = 0.0;
  double val_accuracy_plain = 0.0;
  double val_accuracy_wp = 0.0;
  double selector_seconds = 0.0;
  std::uint64_t seed = 0;
};

struct AlplConfig {
  GenerationMode generation = GenerationMode::kFps;
  double flip_prob = 0.3;
  select::SelectorKind selector = select::SelectorKind::kRandom;
  std::size_t initial_size = 20;
  std::size_t query_size = 100;
  std::size_t rounds = 10;
  std::size_t budget = 1000;
  std::size_t validation_size = 100;
  std::vector<std::size_t> hidden = {300, 300, 300};
  TrainSchedule schedule;
  select::WsOptions ws;
};

/// One seeded run of the query loop over a dataset.
class AlplRun {
 public:
  AlplRun(const AlplConfig& config, const data::DatasetBundle& dataset, std::uint64_t seed);

  /// Initial annotation and training. Must be called once before step().
  RoundRecord initialize();

  /// One query round. Returns nullopt when the budget or the pool cannot cover b.
  std::optional<RoundRecord> step();

  const PoolState& pools() const { return state_; }
  const ModelSnapshot& predictor() const { return *predictor_; }
  const ModelSnapshot& worsenet() const { return *worsenet_; }

 private:
  void train_both();
  RoundRecord record(double selector_seconds) const;
  std::vector<std::size_t> select_queries();
  nn::DenseNet fresh_net(std::uint64_t tag) const;

  AlplConfig config_;
  const data::DatasetBundle& data_;
  std::uint64_t seed_;
  std::vector<std::size_t> dims_;
  Rng pool_rng_;
  Rng train_rng_;
  Rng select_rng_;
  Oracle oracle_;
  PoolState state_;
  std::optional<ModelSnapshot> predictor_;
  std::optional<ModelSnapshot> worsenet_;
  bool initialized_ = false;
};

/// Initial training plus up to config.rounds query rounds.
std::vector<RoundRecord> run_alpl(const AlplConfig& config, const data::DatasetBundle& dataset, std::uint64_t seed);

}  // namespace alpl::loop
