#pragma once

#include "alpl/nn.hpp"
#include "alpl/partial_labels.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace alpl::select {

using nn::Matrix;

enum class SelectorKind { kRandom, kMcu, kMmu, kEu, kWsMcu, kWsMmu, kWsEu, kCoreset };

std::string to_string(SelectorKind kind);
SelectorKind parse_selector(const std::string& text);

/// True for the selectors that consult WorseNet.
bool needs_worsenet(SelectorKind kind);

/// Candidate sample ids with their preference scores; larger scores are queried first.
struct ScoredPool {
  std::vector<std::size_t> indices;
  std::vector<double> scores;
};

/// 1 - max_j p_j.
double mcu_score(std::span<const double> p);

/// Margin between the largest and second largest probability. Smaller is more uncertain.
double mmu_score(std::span<const double> p);

/// Shannon entropy -sum_j p_j log p_j, with 0 log 0 = 0.
double eu_score(std::span<const double> p);

/// S' = { z : p_z - q_z >= 0 }. Never empty since the differences sum to zero.
LabelMask pseudo_candidate_set(std::span<const double> p, std::span<const double> q);

struct WsOptions {
  /// Divide p by its mass on S' before scoring. Off by default.
  bool renormalize = false;
};

/// Base score of kind (WS_MCU, WS_MMU or WS_EU) with every max and sum restricted to S'.
/// For WS_MMU the margin is returned; with |S'| = 1 the runner-up is taken over the
/// remaining classes.
double ws_score(SelectorKind kind, std::span<const double> p, std::span<const double> q, WsOptions opts = {});

/// Preference score for one sample (margins negated so that larger means "query first").
double preference(SelectorKind kind, std::span<const double> p, std::span<const double> q, WsOptions opts = {});

/// Scores every row. q may be empty for selectors that do not use WorseNet.
ScoredPool score_pool(SelectorKind kind, std::span<const std::size_t> ids, const Matrix& p, const Matrix& q,
                      WsOptions opts = {});

/// Ids of the b highest scores; ties go to the lowest sample id.
std::vector<std::size_t> select_top_b(const ScoredPool& scored, std::size_t b);

/// k-center greedy. Returns row positions in pool_embeddings, in selection order.
/// Ties go to the lowest row. With no labeled points the first pick is row 0.
std::vector<std::size_t> coreset_select(const Matrix& pool_embeddings, const Matrix& labeled_embeddings,
                                        std::size_t b);

}  // namespace alpl::select
