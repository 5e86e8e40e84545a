#pragma once

#include "alpl/nn.hpp"
#include "alpl/partial_labels.hpp"

#include <span>

namespace alpl::losses {

using nn::Matrix;

/// Probabilities are clamped to this floor before any division or logarithm.
inline constexpr double kProbFloor = 1e-12;

/// Scalar batch-mean loss with its gradient w.r.t. the logits that produced the
/// probabilities. weight_snapshot holds the detached per-class weights actually used
/// (zero outside the relevant label set).
struct LossReport {
  double value = 0.0;
  Matrix grad_wrt_logits;
  Matrix weight_snapshot;
};

/// Whether gradients flow through the confidence-based weights of the RC/IRC losses.
/// Detached is the default; flow-through exists for ablations.
enum class WeightGradient { kDetached, kFlowThrough };

struct WorseLossConfig {
  double alpha = 1.0;
};

/// Risk-consistent loss: per sample, sum over j in S of w_j * (-log p_j) with
/// w_j = p_j / sum_{z in S} p_z.
LossReport rc_loss(const Matrix& probs, std::span<const CandidateSet> sets,
                   WeightGradient mode = WeightGradient::kDetached);

/// The same weighted cross entropy over the inverse sets, for WorseNet's probabilities.
LossReport irc_loss(const Matrix& probs, std::span<const InverseCandidateSet> inv_sets,
                    WeightGradient mode = WeightGradient::kDetached);

/// Per sample, sum over j in the inverse set of p_j log(p_j / q_j). p is treated as a
/// constant: the gradient is w.r.t. the logits of q only. The value may be negative.
LossReport kld_term(const Matrix& p_detached, const Matrix& q, std::span<const InverseCandidateSet> inv_sets);

/// IRC plus alpha times the KLD term, both w.r.t. WorseNet's logits.
LossReport worse_loss(const Matrix& q, const Matrix& p_detached, std::span<const InverseCandidateSet> inv_sets,
                      WorseLossConfig cfg = {}, WeightGradient mode = WeightGradient::kDetached);

/// Entropy weight of the closed form: [q_j + (1 - q_j) * q_sum] / q_sum.
double entropy_weight(double q_j, double q_sum);

struct WorseLossDecomposition {
  double lhs = 0.0;       ///< Worse loss (alpha = 1) with p_j := 1 - q_j on the inverse set.
  double rhs = 0.0;       ///< sum over the inverse set of -n(q_j) log q_j.
  double constant = 0.0;  ///< sum over the inverse set of p_j log p_j.
};

/// Evaluates both sides of the closed form of the Worse loss under the complementary
/// assumption P + Q = 1 on the inverse set. lhs == rhs + constant up to rounding.
WorseLossDecomposition decompose_worse_loss(std::span<const double> q, const InverseCandidateSet& inv_set);

}  // namespace alpl::losses
