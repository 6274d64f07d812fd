#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fairk/selection.hpp"

using namespace fairk;

namespace {

SelectionMask mask_of(std::initializer_list<int> bits) {
  SelectionMask m(bits.size());
  std::size_t i = 0;
  for (int b : bits) {
    if (b) m.set(i);
    ++i;
  }
  return m;
}

AoUVector ages_of(std::initializer_list<std::int64_t> a) {
  AoUVector v(a.size());
  std::size_t i = 0;
  for (auto x : a) v.ages[i++] = x;
  return v;
}

GradientVector random_gradient(Rng& rng, std::size_t d) {
  GradientVector g(d);
  for (auto& x : g) x = rng.normal();
  return g;
}

}  // namespace

TEST_CASE("top_mask picks largest magnitudes") {
  GradientVector x{5, -7, 1, 2, -1, 3};
  CHECK(top_mask(x, 2) == mask_of({1, 1, 0, 0, 0, 0}));
  CHECK(top_mask(x, 0) == mask_of({0, 0, 0, 0, 0, 0}));
  CHECK(top_mask(x, 6).count() == 6);
}

TEST_CASE("top_mask breaks magnitude ties by lower index") {
  GradientVector x{2, -2, 1};
  CHECK(top_mask(x, 1) == mask_of({1, 0, 0}));
  CHECK(top_mask(x, 2) == mask_of({1, 1, 0}));
}

TEST_CASE("top_mask rejects over-budget k") {
  GradientVector x{1, 2};
  CHECK_THROWS_AS(top_mask(x, 3), std::invalid_argument);
}

TEST_CASE("fair_k combines magnitude and age stages") {
  GradientVector g{5, -7, 1, 2, -1, 3};
  AoUVector a = ages_of({0, 0, 4, 1, 2, 0});
  PolicyConfig cfg;
  cfg.kind = PolicyKind::FairK;
  cfg.k = 3;
  cfg.k_m = 2;
  CHECK(fair_k(g, a, cfg) == mask_of({1, 1, 1, 0, 0, 0}));
}

TEST_CASE("fair_k stages are disjoint and fill the budget exactly") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 2 + rng.uniform_index(40);
    PolicyConfig cfg;
    cfg.kind = PolicyKind::FairK;
    cfg.k = 1 + rng.uniform_index(d);
    cfg.k_m = rng.uniform_index(cfg.k + 1);
    GradientVector g = random_gradient(rng, d);
    AoUVector a(d);
    for (auto& age : a.ages) age = static_cast<std::int64_t>(rng.uniform_index(20));
    CHECK(fair_k(g, a, cfg).count() == cfg.k);
  }
}

TEST_CASE("fair_k with k_m = k reduces to top_mask") {
  Rng rng(22);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 1 + rng.uniform_index(30);
    PolicyConfig cfg;
    cfg.kind = PolicyKind::FairK;
    cfg.k = 1 + rng.uniform_index(d);
    cfg.k_m = cfg.k;
    GradientVector g = random_gradient(rng, d);
    AoUVector a(d);
    for (auto& age : a.ages) age = static_cast<std::int64_t>(rng.uniform_index(9));
    CHECK(fair_k(g, a, cfg) == top_mask(g, cfg.k));
  }
}

TEST_CASE("fair_k with k_m = 0 reduces to round_robin") {
  Rng rng(33);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 1 + rng.uniform_index(30);
    PolicyConfig cfg;
    cfg.kind = PolicyKind::FairK;
    cfg.k = 1 + rng.uniform_index(d);
    cfg.k_m = 0;
    GradientVector g = random_gradient(rng, d);
    AoUVector a(d);
    for (auto& age : a.ages) age = static_cast<std::int64_t>(rng.uniform_index(9));
    CHECK(fair_k(g, a, cfg) == round_robin(a, cfg.k));
  }
}

TEST_CASE("fair_k mask is invariant to positive rescaling of g") {
  Rng rng(44);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 2 + rng.uniform_index(25);
    PolicyConfig cfg;
    cfg.kind = PolicyKind::FairK;
    cfg.k = 1 + rng.uniform_index(d);
    cfg.k_m = rng.uniform_index(cfg.k + 1);
    GradientVector g = random_gradient(rng, d);
    AoUVector a(d);
    for (auto& age : a.ages) age = static_cast<std::int64_t>(rng.uniform_index(9));
    const double c = 0.001 + 1000.0 * rng.uniform01();
    GradientVector scaled = g;
    for (auto& x : scaled) x *= c;
    CHECK(fair_k(g, a, cfg) == fair_k(scaled, a, cfg));
  }
}

TEST_CASE("round_robin selects oldest entries, lowest index on ties") {
  CHECK(round_robin(ages_of({3, 0, 5, 1}), 2) == mask_of({1, 0, 1, 0}));
  CHECK(round_robin(ages_of({0, 0, 0, 0}), 2) == mask_of({1, 1, 0, 0}));
  CHECK(round_robin(ages_of({0, 1, 2, 3}), 4).count() == 4);
}

TEST_CASE("top_rand keeps the magnitude stage deterministic") {
  GradientVector g{5, -7, 1, 2, -1, 3};
  PolicyConfig cfg;
  cfg.kind = PolicyKind::TopRand;
  cfg.k = 3;
  cfg.k_m = 2;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    SelectionMask m = top_rand(g, cfg, rng);
    CHECK(m.count() == 3);
    CHECK(m.test(0));
    CHECK(m.test(1));
  }
}

TEST_CASE("top_rand with k_m = k ignores the rng") {
  GradientVector g{5, -7, 1, 2, -1, 3};
  PolicyConfig cfg;
  cfg.kind = PolicyKind::TopRand;
  cfg.k = 2;
  cfg.k_m = 2;
  Rng r1(1), r2(999);
  CHECK(top_rand(g, cfg, r1) == top_mask(g, 2));
  CHECK(top_rand(g, cfg, r2) == top_mask(g, 2));
}

TEST_CASE("top_rand is reproducible under a fixed seed") {
  GradientVector g{0.3, -1.2, 0.8, 2.5, -0.1, 0.05, 1.1, -3.0};
  PolicyConfig cfg;
  cfg.kind = PolicyKind::TopRand;
  cfg.k = 4;
  cfg.k_m = 2;
  Rng r1(777), r2(777);
  CHECK(top_rand(g, cfg, r1) == top_rand(g, cfg, r2));
}

TEST_CASE("aou_update resets selected entries and ages the rest") {
  AoUVector a = ages_of({2, 0, 1});
  SelectionMask s = mask_of({0, 1, 1});
  AoUVector next = aou_update(a, s);
  CHECK(next.ages == std::vector<std::int64_t>{3, 0, 0});

  SelectionMask all(3);
  for (std::size_t i = 0; i < 3; ++i) all.set(i);
  CHECK(aou_update(a, all).ages == std::vector<std::int64_t>{0, 0, 0});

  SelectionMask none(3);
  CHECK(aou_update(a, none).ages == std::vector<std::int64_t>{3, 1, 2});
}

TEST_CASE("every policy emits exactly k ones") {
  Rng rng(55);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t d = 2 + rng.uniform_index(40);
    PolicyConfig cfg;
    cfg.k = 1 + rng.uniform_index(d);
    cfg.k_m = rng.uniform_index(cfg.k + 1);
    GradientVector g = random_gradient(rng, d);
    AoUVector a(d);
    for (auto& age : a.ages) age = static_cast<std::int64_t>(rng.uniform_index(9));
    for (PolicyKind kind : {PolicyKind::FairK, PolicyKind::TopK,
                            PolicyKind::RoundRobin, PolicyKind::TopRand}) {
      cfg.kind = kind;
      CHECK(select_entries(g, a, cfg, rng).count() == cfg.k);
    }
  }
}

TEST_CASE("age under repeated fair_k stays within the coverage window") {
  // With k_a fresh slots per round over d - k_m contested entries, no entry
  // can wait longer than ceil((d - k_m) / k_a) rounds between selections.
  Rng rng(66);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 4 + rng.uniform_index(28);
    PolicyConfig cfg;
    cfg.kind = PolicyKind::FairK;
    cfg.k = 1 + rng.uniform_index(d);
    cfg.k_m = rng.uniform_index(cfg.k);  // keep k_a >= 1
    const std::size_t k_a = cfg.k_a();
    const std::int64_t cap =
        static_cast<std::int64_t>((d - cfg.k_m + k_a - 1) / k_a);
    AoUVector a(d);
    const std::size_t rounds = 2 * static_cast<std::size_t>(cap) + 4;
    for (std::size_t t = 0; t < rounds; ++t) {
      GradientVector g = random_gradient(rng, d);
      SelectionMask s = fair_k(g, a, cfg);
      a = aou_update(a, s);
      CHECK(a.max_age() <= cap);
    }
  }
}

TEST_CASE("policy names round-trip through the parser") {
  for (PolicyKind kind : {PolicyKind::FairK, PolicyKind::TopK,
                          PolicyKind::RoundRobin, PolicyKind::TopRand}) {
    CHECK(parse_policy(policy_name(kind)) == kind);
  }
  CHECK_THROWS_AS(parse_policy("bogus"), std::invalid_argument);
}
