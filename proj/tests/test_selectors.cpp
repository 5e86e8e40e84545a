#include "alpl/error.hpp"
#include "alpl/rng.hpp"
#include "alpl/selectors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

namespace sel = alpl::select;
using sel::SelectorKind;

namespace {

std::vector<double> random_simplex(alpl::Rng& rng, std::size_t k) {
  std::vector<double> v(k);
  double s = 0.0;
  for (double& x : v) s += (x = -std::log(1.0 - rng.uniform()));
  for (double& x : v) x /= s;
  return v;
}

}  // namespace

TEST_CASE("selector names round trip") {
  for (auto kind : {SelectorKind::kRandom, SelectorKind::kMcu, SelectorKind::kMmu, SelectorKind::kEu,
                    SelectorKind::kWsMcu, SelectorKind::kWsMmu, SelectorKind::kWsEu, SelectorKind::kCoreset}) {
    CHECK(sel::parse_selector(sel::to_string(kind)) == kind);
  }
  CHECK(sel::parse_selector("ws-mmu") == SelectorKind::kWsMmu);
  CHECK(sel::parse_selector("RS") == SelectorKind::kRandom);
  CHECK_THROWS_AS(sel::parse_selector("BALD"), alpl::ConfigError);
  CHECK(sel::needs_worsenet(SelectorKind::kWsEu));
  CHECK_FALSE(sel::needs_worsenet(SelectorKind::kCoreset));
}

TEST_CASE("base uncertainty scores") {
  const std::vector<double> p = {0.5, 0.3, 0.2};
  const std::vector<double> one_hot = {0.0, 1.0, 0.0, 0.0};
  const std::vector<double> u10(10, 0.1), u4(4, 0.25);
  CHECK(sel::mcu_score(p) == doctest::Approx(0.5));
  CHECK(sel::mcu_score(one_hot) == 0.0);
  CHECK(sel::mcu_score(u10) == doctest::Approx(0.9));
  CHECK(sel::mmu_score(p) == doctest::Approx(0.2));
  CHECK(sel::mmu_score(u4) == 0.0);
  CHECK(sel::mmu_score(one_hot) == 1.0);
  CHECK(sel::eu_score(one_hot) == 0.0);
  CHECK(sel::eu_score(u4) == doctest::Approx(std::log(4.0)));
  CHECK(sel::eu_score(std::vector<double>{0.5, 0.5, 0.0, 0.0}) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("pseudo candidate set") {
  const std::vector<double> p = {0.5, 0.3, 0.2}, q = {0.1, 0.6, 0.3};
  CHECK(sel::pseudo_candidate_set(p, q).indices() == std::vector<std::size_t>{0});
  CHECK(sel::pseudo_candidate_set(p, p).is_full());
}

TEST_CASE("ws scores on hand examples") {
  const std::vector<double> p = {0.5, 0.3, 0.2}, q = {0.1, 0.6, 0.3};
  CHECK(sel::ws_score(SelectorKind::kWsEu, p, q) == doctest::Approx(-0.5 * std::log(0.5)));
  CHECK(sel::ws_score(SelectorKind::kWsEu, p, q) == doctest::Approx(0.3466).epsilon(1e-4));
  CHECK(sel::ws_score(SelectorKind::kWsMcu, p, q) == doctest::Approx(0.5));
  CHECK(sel::ws_score(SelectorKind::kWsMmu, p, q) == doctest::Approx(0.2));

  const std::vector<double> p2 = {0.4, 0.35, 0.25}, q2 = {0.2, 0.3, 0.5};
  CHECK(sel::pseudo_candidate_set(p2, q2).indices() == std::vector<std::size_t>{0, 1});
  CHECK(sel::ws_score(SelectorKind::kWsMmu, p2, q2) == doctest::Approx(0.05));
  CHECK(sel::mmu_score(p2) == doctest::Approx(0.05));

  SUBCASE("renormalization divides by the mass on S'") {
    CHECK(sel::ws_score(SelectorKind::kWsMcu, p2, q2, {.renormalize = true}) == doctest::Approx(1.0 - 0.4 / 0.75));
  }
}

TEST_CASE("ws scores reduce to base scores when p equals q") {
  alpl::Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto p = random_simplex(rng, 2 + rng.below(9));
    CHECK(sel::ws_score(SelectorKind::kWsMcu, p, p) == sel::mcu_score(p));
    CHECK(sel::ws_score(SelectorKind::kWsMmu, p, p) == doctest::Approx(sel::mmu_score(p)).epsilon(1e-15));
    CHECK(sel::ws_score(SelectorKind::kWsEu, p, p) == doctest::Approx(sel::eu_score(p)).epsilon(1e-14));
  }
}

TEST_CASE("scores agree with brute-force references on random instances") {
  alpl::Rng rng(5);
  for (int t = 0; t < 300; ++t) {
    const std::size_t k = 2 + rng.below(9);
    const auto p = random_simplex(rng, k);
    const auto q = random_simplex(rng, k);
    CHECK(sel::mcu_score(p) == doctest::Approx(oracle::brute_mcu(p)).epsilon(1e-14));
    CHECK(sel::mmu_score(p) == doctest::Approx(oracle::brute_margin(p)).epsilon(1e-14));
    CHECK(sel::eu_score(p) == doctest::Approx(oracle::brute_entropy(p)).epsilon(1e-13));
    const auto s = sel::pseudo_candidate_set(p, q);
    CHECK(s.indices() == oracle::brute_pseudo_set(p, q));
    CHECK_FALSE(s.empty());
    CHECK(sel::ws_score(SelectorKind::kWsMcu, p, q) == doctest::Approx(oracle::brute_ws(0, p, q)).epsilon(1e-14));
    CHECK(sel::ws_score(SelectorKind::kWsMmu, p, q) == doctest::Approx(oracle::brute_ws(1, p, q)).epsilon(1e-14));
    CHECK(sel::ws_score(SelectorKind::kWsEu, p, q) == doctest::Approx(oracle::brute_ws(2, p, q)).epsilon(1e-13));
  }
}

TEST_CASE("select_top_b") {
  sel::ScoredPool pool{{0, 1, 2}, {0.1, 0.9, 0.5}};
  CHECK(sel::select_top_b(pool, 1) == std::vector<std::size_t>{1});
  CHECK(sel::select_top_b(pool, 0).empty());
  CHECK_THROWS_AS(sel::select_top_b(pool, 4), alpl::RequestError);
  sel::ScoredPool flat{{7, 3, 5, 9}, {1.0, 1.0, 1.0, 1.0}};
  CHECK(sel::select_top_b(flat, 2) == std::vector<std::size_t>{3, 5});
  sel::ScoredPool bad{{0, 1}, {0.0, std::nan("")}};
  CHECK_THROWS_AS(sel::select_top_b(bad, 1), alpl::NumericError);

  alpl::Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(40);
    sel::ScoredPool sp;
    for (std::size_t i = 0; i < n; ++i) {
      sp.indices.push_back(i * 3 + rng.below(3));
      sp.scores.push_back(static_cast<double>(rng.below(5)) * 0.25);  // many ties
    }
    const std::size_t b = rng.below(n + 1);
    CHECK(sel::select_top_b(sp, b) == oracle::brute_top_b(sp.indices, sp.scores, b));
  }
}

TEST_CASE("score_pool orients margins so larger means query first") {
  alpl::nn::Matrix p(2, 3), q(2, 3);
  p << 0.5, 0.3, 0.2, 0.34, 0.33, 0.33;
  q << 0.2, 0.4, 0.4, 0.2, 0.4, 0.4;
  const std::size_t ids[] = {10, 11};
  const auto mmu = sel::score_pool(SelectorKind::kMmu, ids, p, alpl::nn::Matrix(), {});
  CHECK(sel::select_top_b(mmu, 1) == std::vector<std::size_t>{11});
  const auto ws = sel::score_pool(SelectorKind::kWsMcu, ids, p, q, {});
  CHECK(ws.scores.size() == 2);
  CHECK_THROWS_AS(sel::score_pool(SelectorKind::kWsMcu, ids, p, alpl::nn::Matrix(), {}), alpl::ConfigError);
}

TEST_CASE("coreset greedy") {
  alpl::nn::Matrix pool(3, 1), lab(1, 1);
  pool << 1.0, 0.1, 2.0;
  lab << 0.0;
  CHECK(sel::coreset_select(pool, lab, 1) == std::vector<std::size_t>{2});
  const auto all = sel::coreset_select(pool, lab, 3);
  CHECK(all == std::vector<std::size_t>{2, 0, 1});
  CHECK(sel::coreset_select(pool, alpl::nn::Matrix(), 1) == std::vector<std::size_t>{0});
  CHECK_THROWS_AS(sel::coreset_select(pool, lab, 4), alpl::RequestError);

  alpl::Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    oracle::Rows pts(20, oracle::Row(2)), labeled(1 + rng.below(3), oracle::Row(2));
    for (auto& r : pts) for (double& v : r) v = rng.normal();
    for (auto& r : labeled) for (double& v : r) v = rng.normal();
    CHECK(sel::coreset_select(oracle::to_matrix(pts), oracle::to_matrix(labeled), 3) ==
          oracle::brute_coreset(pts, labeled, 3));
  }
}
