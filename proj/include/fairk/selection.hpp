#pragma once

#include <cstddef>
#include <string>

#include "fairk/rng.hpp"
#include "fairk/types.hpp"

namespace fairk {

enum class PolicyKind { FairK, TopK, RoundRobin, TopRand };

PolicyKind parse_policy(const std::string& name);
std::string policy_name(PolicyKind kind);

struct PolicyConfig {
  PolicyKind kind = PolicyKind::FairK;
  std::size_t k = 0;    // total selected entries per round
  std::size_t k_m = 0;  // magnitude slots; the remaining k - k_m go by age

  std::size_t k_a() const { return k - k_m; }
  void validate(std::size_t d) const;
};

// Mask of the k largest-magnitude entries; ties go to the lowest index.
SelectionMask top_mask(const GradientVector& x, std::size_t k);

// Mask of the k oldest entries; ties go to the lowest index.
SelectionMask oldest_mask(const AoUVector& ages, std::size_t k);

// Two-stage selection: k_m entries by magnitude, then k - k_m by age among
// the rest. Collapses to pure top-k at k_m = k and to a round-robin sweep
// at k_m = 0.
SelectionMask fair_k(const GradientVector& g, const AoUVector& ages,
                     const PolicyConfig& cfg);

SelectionMask round_robin(const AoUVector& ages, std::size_t k);

// k_m by magnitude, then k - k_m drawn uniformly from the remaining entries.
SelectionMask top_rand(const GradientVector& g, const PolicyConfig& cfg, Rng& rng);

// Dispatch on cfg.kind; rng is consumed only by TopRand.
SelectionMask select_entries(const GradientVector& g, const AoUVector& ages,
                             const PolicyConfig& cfg, Rng& rng);

// Age evolution: selected entries reset to 0, all others grow by one round.
AoUVector aou_update(const AoUVector& ages, const SelectionMask& mask);

}  // namespace fairk
