#pragma once
// Reference implementations used only by the tests. Deliberately written with plain
// loops and std::vector so they share no code path with the library under test.

#include "alpl/nn.hpp"
#include "alpl/partial_labels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

using Row = std::vector<double>;
using Rows = std::vector<Row>;

inline Row softmax(const Row& z) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : z) m = std::max(m, v);
  Row e(z.size());
  double s = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) s += (e[j] = std::exp(z[j] - m));
  for (double& v : e) v /= s;
  return e;
}

inline double floor_p(double p) { return std::max(p, 1e-12); }

/// Confidence weights p_j / sum_S p over a mask, computed at a fixed point.
inline Row set_weights(const Row& p, const alpl::LabelMask& mask) {
  double denom = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (mask.contains(j)) denom += floor_p(p[j]);
  }
  Row w(p.size(), 0.0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (mask.contains(j)) w[j] = floor_p(p[j]) / denom;
  }
  return w;
}

/// Mean weighted cross entropy with externally frozen weights.
inline double frozen_weighted_ce(const Rows& logits, const Rows& weights) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const Row p = softmax(logits[i]);
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (weights[i][j] != 0.0) total -= weights[i][j] * std::log(floor_p(p[j]));
    }
  }
  return total / static_cast<double>(logits.size());
}

/// Mean weighted cross entropy with weights recomputed from the logits themselves.
inline double live_weighted_ce(const Rows& logits, const std::vector<alpl::LabelMask>& masks) {
  Rows w;
  for (std::size_t i = 0; i < logits.size(); ++i) w.push_back(set_weights(softmax(logits[i]), masks[i]));
  return frozen_weighted_ce(logits, w);
}

/// Mean restricted KL sum over the mask of p log(p / q(logits)), p fixed.
inline double restricted_kld(const Rows& p, const Rows& q_logits, const std::vector<alpl::LabelMask>& masks) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Row q = softmax(q_logits[i]);
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (!masks[i].contains(j)) continue;
      const double pj = floor_p(p[i][j]);
      total += pj * std::log(pj / floor_p(q[j]));
    }
  }
  return total / static_cast<double>(p.size());
}

/// Central finite differences of f over every entry of x.
inline Rows central_difference(const std::function<double(const Rows&)>& f, Rows x, double h) {
  Rows g(x.size(), Row(x.empty() ? 0 : x[0].size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x[i].size(); ++j) {
      const double orig = x[i][j];
      x[i][j] = orig + h;
      const double up = f(x);
      x[i][j] = orig - h;
      const double down = f(x);
      x[i][j] = orig;
      g[i][j] = (up - down) / (2.0 * h);
    }
  }
  return g;
}

/// Plain-loop forward pass returning logits and, per hidden unit, its pre-activation.
struct NaiveForward {
  Rows logits;
  std::vector<std::vector<double>> preacts;  // per sample, all hidden pre-activations concatenated
};

inline NaiveForward naive_forward(const alpl::nn::DenseNet& net, const Rows& inputs) {
  NaiveForward out;
  const auto& p = net.params();
  for (const auto& x : inputs) {
    Row a = x;
    std::vector<double> pre_all;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      const auto& w = p.weights[l];
      Row z(static_cast<std::size_t>(w.rows()));
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        double s = p.biases[l](r);
        for (Eigen::Index c = 0; c < w.cols(); ++c) s += w(r, c) * a[static_cast<std::size_t>(c)];
        z[static_cast<std::size_t>(r)] = s;
      }
      if (l + 1 < net.num_layers()) {
        pre_all.insert(pre_all.end(), z.begin(), z.end());
        for (double& v : z) v = std::max(v, 0.0);
      }
      a = z;
    }
    out.logits.push_back(a);
    out.preacts.push_back(pre_all);
  }
  return out;
}

inline Rows to_rows(const alpl::nn::Matrix& m) {
  Rows out(static_cast<std::size_t>(m.rows()), Row(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  }
  return out;
}

inline alpl::nn::Matrix to_matrix(const Rows& rows) {
  alpl::nn::Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

/// Relative error with a small absolute floor on the denominator.
inline double rel_err(double a, double b, double floor = 1e-4) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// ---- selectors ------------------------------------------------------------

inline Row sorted_desc(Row v) {
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

inline double brute_mcu(const Row& p) { return 1.0 - sorted_desc(p)[0]; }
inline double brute_margin(const Row& p) {
  const Row s = sorted_desc(p);
  return s[0] - s[1];
}
inline double brute_entropy(const Row& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

inline std::vector<std::size_t> brute_pseudo_set(const Row& p, const Row& q) {
  std::vector<std::size_t> s;
  for (std::size_t z = 0; z < p.size(); ++z) {
    if (p[z] >= q[z]) s.push_back(z);
  }
  return s;
}

/// WS scores straight from the definition: restrict, then score.
inline double brute_ws(int kind, const Row& p, const Row& q) {
  const auto s = brute_pseudo_set(p, q);
  Row restricted;
  for (auto z : s) restricted.push_back(p[z]);
  if (kind == 0) return 1.0 - sorted_desc(restricted)[0];
  if (kind == 2) return brute_entropy(restricted);
  if (restricted.size() >= 2) return brute_margin(restricted);
  // Singleton: runner-up over the other classes.
  const std::size_t top = s[0];
  double second = -1.0;
  for (std::size_t z = 0; z < p.size(); ++z) {
    if (z != top) second = std::max(second, p[z]);
  }
  return p[top] - second;
}

/// Full sort by (score desc, id asc), then the first b.
inline std::vector<std::size_t> brute_top_b(const std::vector<std::size_t>& ids, const Row& scores, std::size_t b) {
  std::vector<std::pair<double, std::size_t>> v;
  for (std::size_t i = 0; i < ids.size(); ++i) v.emplace_back(-scores[i], ids[i]);
  std::sort(v.begin(), v.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < b; ++i) out.push_back(v[i].second);
  return out;
}

/// Greedy k-center recomputing every distance from scratch at every step.
inline std::vector<std::size_t> brute_coreset(const Rows& pool, const Rows& labeled, std::size_t b) {
  auto dist = [](const Row& a, const Row& c) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - c[j]) * (a[j] - c[j]);
    return std::sqrt(s);
  };
  std::vector<std::size_t> chosen;
  for (std::size_t step = 0; step < b; ++step) {
    std::size_t best = pool.size();
    double best_d = -1.0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      double d = std::numeric_limits<double>::infinity();
      for (const auto& c : labeled) d = std::min(d, dist(pool[i], c));
      for (auto c : chosen) d = std::min(d, dist(pool[i], pool[c]));
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

// ---- generators -------------------------------------------------------------

/// Every admissible candidate set for true label y: subsets containing y, minus the full set.
inline std::vector<alpl::LabelMask> admissible_sets(std::size_t y, std::size_t k) {
  std::vector<alpl::LabelMask> out;
  for (std::size_t bits = 0; bits < (std::size_t{1} << k); ++bits) {
    if (!((bits >> y) & 1u)) continue;
    if (bits == (std::size_t{1} << k) - 1) continue;
    alpl::LabelMask m(k);
    for (std::size_t c = 0; c < k; ++c) {
      if ((bits >> c) & 1u) m.set(c);
    }
    out.push_back(m);
  }
  return out;
}

/// Expected |S| under FPS with rejection of the full set.
inline double fps_expected_size(std::size_t k, double q) {
  const double m = static_cast<double>(k - 1);
  const double all = std::pow(q, m);
  return 1.0 + (m * q - m * all) / (1.0 - all);
}

}  // namespace oracle
