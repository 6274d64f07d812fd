#include "fairk/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fairk {

PolicyKind parse_policy(const std::string& name) {
  if (name == "fair_k") return PolicyKind::FairK;
  if (name == "top_k") return PolicyKind::TopK;
  if (name == "round_robin") return PolicyKind::RoundRobin;
  if (name == "top_rand") return PolicyKind::TopRand;
  throw std::invalid_argument("unknown policy: " + name);
}

std::string policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::FairK: return "fair_k";
    case PolicyKind::TopK: return "top_k";
    case PolicyKind::RoundRobin: return "round_robin";
    case PolicyKind::TopRand: return "top_rand";
  }
  throw std::logic_error("policy_name: bad enum value");
}

void PolicyConfig::validate(std::size_t d) const {
  require(k >= 1, "policy: k must be >= 1");
  require(k <= d, "policy: k must not exceed dimension d");
  require(k_m <= k, "policy: k_m must not exceed k");
}

namespace {

// Positions of the k winners under cmp, lowest index on ties. cmp orders by
// the selection key only; the index tiebreak lives here so every policy
// shares it.
template <typename Cmp>
SelectionMask pick_k(std::size_t d, std::size_t k, Cmp cmp) {
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto ordered = [&cmp](std::size_t a, std::size_t b) {
    if (cmp(a, b)) return true;
    if (cmp(b, a)) return false;
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k),
                    idx.end(), ordered);
  SelectionMask mask(d);
  for (std::size_t i = 0; i < k; ++i) mask.set(idx[i]);
  return mask;
}

}  // namespace

SelectionMask top_mask(const GradientVector& x, std::size_t k) {
  require(k <= x.size(), "top_mask: k exceeds dimension");
  if (k == 0) return SelectionMask(x.size());
  return pick_k(x.size(), k, [&x](std::size_t a, std::size_t b) {
    return std::fabs(x[a]) > std::fabs(x[b]);
  });
}

SelectionMask oldest_mask(const AoUVector& ages, std::size_t k) {
  require(k <= ages.size(), "oldest_mask: k exceeds dimension");
  if (k == 0) return SelectionMask(ages.size());
  return pick_k(ages.size(), k, [&ages](std::size_t a, std::size_t b) {
    return ages.ages[a] > ages.ages[b];
  });
}

SelectionMask fair_k(const GradientVector& g, const AoUVector& ages,
                     const PolicyConfig& cfg) {
  const std::size_t d = g.size();
  require(ages.size() == d, "fair_k: ages and gradient dimension mismatch");
  cfg.validate(d);

  SelectionMask mask = top_mask(g, cfg.k_m);
  const std::size_t k_a = cfg.k_a();
  if (k_a == 0) return mask;

  // Age stage over the entries the magnitude stage left behind.
  std::vector<std::size_t> rest;
  rest.reserve(d - cfg.k_m);
  for (std::size_t i = 0; i < d; ++i) {
    if (!mask.test(i)) rest.push_back(i);
  }
  std::partial_sort(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(k_a),
                    rest.end(), [&ages](std::size_t a, std::size_t b) {
                      if (ages.ages[a] != ages.ages[b])
                        return ages.ages[a] > ages.ages[b];
                      return a < b;
                    });
  for (std::size_t i = 0; i < k_a; ++i) mask.set(rest[i]);
  return mask;
}

SelectionMask round_robin(const AoUVector& ages, std::size_t k) {
  return oldest_mask(ages, k);
}

SelectionMask top_rand(const GradientVector& g, const PolicyConfig& cfg, Rng& rng) {
  const std::size_t d = g.size();
  cfg.validate(d);

  SelectionMask mask = top_mask(g, cfg.k_m);
  const std::size_t k_a = cfg.k_a();
  if (k_a == 0) return mask;

  std::vector<std::size_t> rest;
  rest.reserve(d - cfg.k_m);
  for (std::size_t i = 0; i < d; ++i) {
    if (!mask.test(i)) rest.push_back(i);
  }
  for (std::size_t pos : rng.sample_without_replacement(rest.size(), k_a)) {
    mask.set(rest[pos]);
  }
  return mask;
}

SelectionMask select_entries(const GradientVector& g, const AoUVector& ages,
                             const PolicyConfig& cfg, Rng& rng) {
  switch (cfg.kind) {
    case PolicyKind::FairK: return fair_k(g, ages, cfg);
    case PolicyKind::TopK: {
      PolicyConfig c = cfg;
      c.k_m = c.k;
      return fair_k(g, ages, c);
    }
    case PolicyKind::RoundRobin: return round_robin(ages, cfg.k);
    case PolicyKind::TopRand: return top_rand(g, cfg, rng);
  }
  throw std::logic_error("select_entries: bad enum value");
}

AoUVector aou_update(const AoUVector& ages, const SelectionMask& mask) {
  require(ages.size() == mask.size(), "aou_update: dimension mismatch");
  AoUVector next(ages.size());
  for (std::size_t i = 0; i < ages.size(); ++i) {
    next.ages[i] = mask.test(i) ? 0 : ages.ages[i] + 1;
  }
  return next;
}

}  // namespace fairk
