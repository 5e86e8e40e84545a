#include "alpl/selectors.hpp"

#include "alpl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace alpl::select {

namespace {

double plogp(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

struct TopTwo {
  double first = -std::numeric_limits<double>::infinity();
  double second = -std::numeric_limits<double>::infinity();
  std::size_t first_index = 0;
};

template <typename Pred>
TopTwo top_two(std::span<const double> p, Pred include) {
  TopTwo t;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!include(j)) continue;
    if (p[j] > t.first) {
      t.second = t.first;
      t.first = p[j];
      t.first_index = j;
    } else if (p[j] > t.second) {
      t.second = p[j];
    }
  }
  return t;
}

void check_pair(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ConfigError("p and q have different class counts");
}

}  // namespace

std::string to_string(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::kRandom: return "RANDOM";
    case SelectorKind::kMcu: return "MCU";
    case SelectorKind::kMmu: return "MMU";
    case SelectorKind::kEu: return "EU";
    case SelectorKind::kWsMcu: return "WS_MCU";
    case SelectorKind::kWsMmu: return "WS_MMU";
    case SelectorKind::kWsEu: return "WS_EU";
    case SelectorKind::kCoreset: return "CORESET";
  }
  return "?";
}

SelectorKind parse_selector(const std::string& text) {
  std::string t;
  for (char c : text) t += (c == '-') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (t == "RANDOM" || t == "RS") return SelectorKind::kRandom;
  if (t == "MCU") return SelectorKind::kMcu;
  if (t == "MMU") return SelectorKind::kMmu;
  if (t == "EU") return SelectorKind::kEu;
  if (t == "WS_MCU") return SelectorKind::kWsMcu;
  if (t == "WS_MMU") return SelectorKind::kWsMmu;
  if (t == "WS_EU") return SelectorKind::kWsEu;
  if (t == "CORESET") return SelectorKind::kCoreset;
  throw ConfigError("unknown selector '" + text + "'");
}

bool needs_worsenet(SelectorKind kind) {
  return kind == SelectorKind::kWsMcu || kind == SelectorKind::kWsMmu || kind == SelectorKind::kWsEu;
}

double mcu_score(std::span<const double> p) { return 1.0 - *std::max_element(p.begin(), p.end()); }

double mmu_score(std::span<const double> p) {
  if (p.size() < 2) throw ConfigError("margin needs at least two classes");
  const TopTwo t = top_two(p, [](std::size_t) { return true; });
  return t.first - t.second;
}

double eu_score(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) h -= plogp(v);
  return h;
}

LabelMask pseudo_candidate_set(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q);
  LabelMask s(p.size());
  for (std::size_t z = 0; z < p.size(); ++z) {
    if (p[z] - q[z] >= 0.0) s.set(z);
  }
  if (s.empty()) {
    // Only reachable when rounding makes every difference negative; fall back to the max.
    std::size_t best = 0;
    for (std::size_t z = 1; z < p.size(); ++z) {
      if (p[z] - q[z] > p[best] - q[best]) best = z;
    }
    s.set(best);
  }
  return s;
}

double ws_score(SelectorKind kind, std::span<const double> p, std::span<const double> q, WsOptions opts) {
  const LabelMask s = pseudo_candidate_set(p, q);
  std::vector<double> pr(p.begin(), p.end());
  if (opts.renormalize) {
    double mass = 0.0;
    for (auto z : s.indices()) mass += p[z];
    if (mass > 0.0) {
      for (auto z : s.indices()) pr[z] = p[z] / mass;
    }
  }
  auto in_s = [&](std::size_t j) { return s.contains(j); };
  switch (kind) {
    case SelectorKind::kWsMcu: return 1.0 - top_two(pr, in_s).first;
    case SelectorKind::kWsMmu: {
      if (p.size() < 2) throw ConfigError("margin needs at least two classes");
      const TopTwo t = top_two(pr, in_s);
      if (s.count() >= 2) return t.first - t.second;
      const TopTwo rest = top_two(pr, [&](std::size_t j) { return j != t.first_index; });
      return t.first - rest.first;
    }
    case SelectorKind::kWsEu: {
      double h = 0.0;
      for (auto z : s.indices()) h -= plogp(pr[z]);
      return h;
    }
    default: throw ConfigError("ws_score needs a WS_* selector, got " + to_string(kind));
  }
}

double preference(SelectorKind kind, std::span<const double> p, std::span<const double> q, WsOptions opts) {
  switch (kind) {
    case SelectorKind::kMcu: return mcu_score(p);
    case SelectorKind::kMmu: return -mmu_score(p);
    case SelectorKind::kEu: return eu_score(p);
    case SelectorKind::kWsMcu:
    case SelectorKind::kWsEu: return ws_score(kind, p, q, opts);
    case SelectorKind::kWsMmu: return -ws_score(kind, p, q, opts);
    default: throw ConfigError(to_string(kind) + " is not a score-based selector");
  }
}

ScoredPool score_pool(SelectorKind kind, std::span<const std::size_t> ids, const Matrix& p, const Matrix& q,
                      WsOptions opts) {
  if (static_cast<std::size_t>(p.rows()) != ids.size()) throw ConfigError("score_pool: id/row count mismatch");
  const bool ws = needs_worsenet(kind);
  if (ws && (q.rows() != p.rows() || q.cols() != p.cols())) {
    throw ConfigError(to_string(kind) + " needs WorseNet probabilities for every pool row");
  }
  ScoredPool out;
  out.indices.assign(ids.begin(), ids.end());
  out.scores.resize(ids.size());
  std::vector<double> prow(static_cast<std::size_t>(p.cols()));
  std::vector<double> qrow(ws ? prow.size() : 0);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      prow[static_cast<std::size_t>(j)] = p(i, j);
      if (ws) qrow[static_cast<std::size_t>(j)] = q(i, j);
    }
    out.scores[static_cast<std::size_t>(i)] = preference(kind, prow, qrow, opts);
  }
  return out;
}

std::vector<std::size_t> select_top_b(const ScoredPool& scored, std::size_t b) {
  if (scored.indices.size() != scored.scores.size()) throw ConfigError("scored pool is inconsistent");
  if (b > scored.indices.size()) {
    throw RequestError("cannot select " + std::to_string(b) + " from a pool of " +
                       std::to_string(scored.indices.size()));
  }
  for (double s : scored.scores) {
    if (!std::isfinite(s)) throw NumericError("non-finite selection score");
  }
  std::vector<std::size_t> order(scored.indices.size());
  std::iota(order.begin(), order.end(), 0);
  auto better = [&](std::size_t a, std::size_t c) {
    if (scored.scores[a] != scored.scores[c]) return scored.scores[a] > scored.scores[c];
    return scored.indices[a] < scored.indices[c];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(b), order.end(), better);
  std::vector<std::size_t> out;
  out.reserve(b);
  for (std::size_t i = 0; i < b; ++i) out.push_back(scored.indices[order[i]]);
  return out;
}

std::vector<std::size_t> coreset_select(const Matrix& pool_embeddings, const Matrix& labeled_embeddings,
                                        std::size_t b) {
  const auto n = static_cast<std::size_t>(pool_embeddings.rows());
  if (b > n) throw RequestError("cannot select " + std::to_string(b) + " from a pool of " + std::to_string(n));
  if (pool_embeddings.cols() == 0) throw ConfigError("embeddings must have positive width");
  if (labeled_embeddings.rows() > 0 && labeled_embeddings.cols() != pool_embeddings.cols()) {
    throw ConfigError("labeled and pool embeddings differ in width");
  }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> nearest(n, inf);
  std::vector<bool> taken(n, false);
  auto absorb = [&](const auto& center) {
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (pool_embeddings.row(static_cast<Eigen::Index>(i)) - center).squaredNorm();
      nearest[i] = std::min(nearest[i], d);
    }
  };
  for (Eigen::Index l = 0; l < labeled_embeddings.rows(); ++l) absorb(labeled_embeddings.row(l));

  std::vector<std::size_t> picked;
  picked.reserve(b);
  while (picked.size() < b) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (best == n || nearest[i] > nearest[best]) best = i;
    }
    taken[best] = true;
    picked.push_back(best);
    absorb(pool_embeddings.row(static_cast<Eigen::Index>(best)));
  }
  return picked;
}

}  // namespace alpl::select
