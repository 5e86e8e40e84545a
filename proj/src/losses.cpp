#include "alpl/losses.hpp"

#include "alpl/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace alpl::losses {

namespace {

double clamp_prob(double p) { return std::max(p, kProbFloor); }

template <typename SetT>
void check_shapes(const Matrix& probs, std::span<const SetT> sets) {
  if (static_cast<std::size_t>(probs.rows()) != sets.size()) {
    throw ConfigError("batch has " + std::to_string(probs.rows()) + " rows but " + std::to_string(sets.size()) +
                      " label sets");
  }
  for (const auto& s : sets) {
    if (s.num_classes() != static_cast<std::size_t>(probs.cols())) {
      throw ConfigError("label set width does not match the class count");
    }
  }
  if (!probs.allFinite()) throw NumericError("non-finite probabilities");
}

// Shared by RC and IRC: confidence-weighted cross entropy restricted to a set.
template <typename SetT>
LossReport weighted_set_loss(const Matrix& probs, std::span<const SetT> sets, WeightGradient mode) {
  check_shapes(probs, sets);
  const Eigen::Index n = probs.rows();
  const Eigen::Index k = probs.cols();
  LossReport r;
  r.grad_wrt_logits = Matrix::Zero(n, k);
  r.weight_snapshot = Matrix::Zero(n, k);
  if (n == 0) return r;

  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& mask = sets[static_cast<std::size_t>(i)].mask();
    double denom = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (mask.contains(static_cast<std::size_t>(j))) denom += clamp_prob(probs(i, j));
    }
    double sample_loss = 0.0;
    double weight_sum = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!mask.contains(static_cast<std::size_t>(j))) continue;
      const double pj = clamp_prob(probs(i, j));
      const double w = pj / denom;
      r.weight_snapshot(i, j) = w;
      weight_sum += w;
      sample_loss -= w * std::log(pj);
    }
    total += sample_loss;

    // d/dz_a of sum_j w_j * (-log p_j) with w held fixed is p_a * sum(w) - w_a.
    for (Eigen::Index a = 0; a < k; ++a) {
      double g = probs(i, a) * weight_sum - r.weight_snapshot(i, a);
      if (mode == WeightGradient::kFlowThrough && mask.contains(static_cast<std::size_t>(a))) {
        // The weights are a softmax over the set, so they add w_a (sum_j w_j log p_j - log p_a).
        g -= r.weight_snapshot(i, a) * (std::log(clamp_prob(probs(i, a))) + sample_loss);
      }
      r.grad_wrt_logits(i, a) = g * inv_n;
    }
  }
  r.value = total * inv_n;
  return r;
}

}  // namespace

LossReport rc_loss(const Matrix& probs, std::span<const CandidateSet> sets, WeightGradient mode) {
  return weighted_set_loss(probs, sets, mode);
}

LossReport irc_loss(const Matrix& probs, std::span<const InverseCandidateSet> inv_sets, WeightGradient mode) {
  return weighted_set_loss(probs, inv_sets, mode);
}

LossReport kld_term(const Matrix& p_detached, const Matrix& q, std::span<const InverseCandidateSet> inv_sets) {
  check_shapes(q, inv_sets);
  if (p_detached.rows() != q.rows() || p_detached.cols() != q.cols()) {
    throw ConfigError("predictor and WorseNet probabilities differ in shape");
  }
  if (!p_detached.allFinite()) throw NumericError("non-finite predictor probabilities");

  const Eigen::Index n = q.rows();
  const Eigen::Index k = q.cols();
  LossReport r;
  r.grad_wrt_logits = Matrix::Zero(n, k);
  r.weight_snapshot = Matrix::Zero(n, k);
  if (n == 0) return r;

  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& mask = inv_sets[static_cast<std::size_t>(i)].mask();
    double p_mass = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!mask.contains(static_cast<std::size_t>(j))) continue;
      const double pj = clamp_prob(p_detached(i, j));
      const double qj = clamp_prob(q(i, j));
      r.weight_snapshot(i, j) = pj;
      p_mass += pj;
      total += pj * (std::log(pj) - std::log(qj));
    }
    // Only -p_j log q_j depends on q's logits: gradient p_mass * q_a - p_a [a in set].
    for (Eigen::Index a = 0; a < k; ++a) {
      r.grad_wrt_logits(i, a) = (q(i, a) * p_mass - r.weight_snapshot(i, a)) * inv_n;
    }
  }
  r.value = total * inv_n;
  return r;
}

LossReport worse_loss(const Matrix& q, const Matrix& p_detached, std::span<const InverseCandidateSet> inv_sets,
                      WorseLossConfig cfg, WeightGradient mode) {
  if (!(cfg.alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
  LossReport r = irc_loss(q, inv_sets, mode);
  if (cfg.alpha == 0.0) return r;
  const LossReport kld = kld_term(p_detached, q, inv_sets);
  r.value += cfg.alpha * kld.value;
  r.grad_wrt_logits += cfg.alpha * kld.grad_wrt_logits;
  return r;
}

double entropy_weight(double q_j, double q_sum) { return (q_j + (1.0 - q_j) * q_sum) / q_sum; }

WorseLossDecomposition decompose_worse_loss(std::span<const double> q, const InverseCandidateSet& inv_set) {
  const auto k = static_cast<Eigen::Index>(q.size());
  if (inv_set.num_classes() != q.size()) throw ConfigError("inverse set width does not match q");

  Matrix q_row(1, k);
  Matrix p_row = Matrix::Zero(1, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    q_row(0, j) = q[static_cast<std::size_t>(j)];
    if (inv_set.contains(static_cast<std::size_t>(j))) p_row(0, j) = 1.0 - q_row(0, j);
  }

  WorseLossDecomposition d;
  const InverseCandidateSet sets[] = {inv_set};
  d.lhs = worse_loss(q_row, p_row, sets, WorseLossConfig{1.0}).value;

  double q_sum = 0.0;
  for (auto j : inv_set.mask().indices()) q_sum += clamp_prob(q[j]);
  for (auto j : inv_set.mask().indices()) {
    const double qj = clamp_prob(q[j]);
    const double pj = clamp_prob(p_row(0, static_cast<Eigen::Index>(j)));
    d.rhs -= entropy_weight(qj, q_sum) * std::log(qj);
    d.constant += pj * std::log(pj);
  }
  return d;
}

}  // namespace alpl::losses
