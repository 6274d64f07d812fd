#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "fairk/types.hpp"

namespace fairk {

// Parameters of the entry-exchange process between the magnitude-selected
// set (size k_m) and its complement: k_0 entries swap sides each round.
struct ExchangeModel {
  std::size_t d = 0;
  std::size_t k = 0;
  std::size_t k_m = 0;
  std::size_t k_0 = 0;

  std::size_t k_a() const { return k - k_m; }
  double p1() const { return static_cast<double>(k_0) / static_cast<double>(k_m); }
  double p2() const {
    return static_cast<double>(k_0) / static_cast<double>(d - k_m);
  }

  // Maximum staleness: rounds needed for the age stage to sweep every
  // non-magnitude entry, rounded up when k_a does not divide d - k_m.
  std::size_t max_staleness() const {
    return (d - k_m + k_a() - 1) / k_a();
  }

  // Full invariants required to build the analytic chain.
  void validate() const;

  // Looser feasibility for direct simulation of the exchange process
  // (degenerate corners like k_a = d - k_m are still simulable).
  void validate_for_simulation() const;
};

// Row-sparse stochastic matrix over age-rank states, 0-based internally:
// state 0 is the age-selected set representative, state k_a the
// magnitude-selected set representative, states k..d-1 the unselected
// ranks in ascending age order.
class TransitionMatrix {
 public:
  using Entry = std::pair<std::size_t, double>;
  using Row = std::vector<Entry>;

  TransitionMatrix() = default;
  explicit TransitionMatrix(std::size_t d) : rows_(d) {}

  static TransitionMatrix from_dense(const std::vector<std::vector<double>>& dense);

  std::size_t dim() const { return rows_.size(); }
  const Row& row(std::size_t i) const { return rows_[i]; }
  Row& row(std::size_t i) { return rows_[i]; }

  // 0 when the entry is structurally absent.
  double at(std::size_t i, std::size_t j) const;

  // Largest |row sum - 1| across rows.
  double row_sum_error() const;

  // Sorts each row by column and fuses duplicate targets.
  void canonicalize();

 private:
  std::vector<Row> rows_;
};

TransitionMatrix build_transition_matrix(const ExchangeModel& m);

// Power iteration for pi = pi P; throws with the residual when the
// iteration cap is hit.
std::vector<double> steady_state(const TransitionMatrix& P, double tol = 1e-12,
                                 std::size_t max_iters = 1000000);

struct StalenessDistribution {
  std::vector<double> q;  // probability of staleness l, l = 0..T
  double mean = 0.0;
};

// First-passage law into the refresh states {0, k_a} starting from the
// steady state: q_l sums the one-step hits after l censored steps.
StalenessDistribution aou_distribution(const TransitionMatrix& P,
                                       const std::vector<double>& pi,
                                       const ExchangeModel& m);

// Direct simulation of the labeled exchange process; returns the
// stationary per-entry age histogram collected after a 10x max-staleness
// burn-in.
StalenessDistribution simulate_exchange_process(const ExchangeModel& m,
                                                std::size_t rounds,
                                                std::uint64_t seed);

double expected_staleness(const StalenessDistribution& dist);

// 0.5 * sum |a_l - b_l|, shorter vector padded with zeros.
double total_variation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace fairk
