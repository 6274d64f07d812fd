#include "fairk/aou_markov.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fairk/rng.hpp"

namespace fairk {

void ExchangeModel::validate() const {
  require(d >= 2, "exchange model: d must be >= 2");
  require(k >= 1 && k <= d, "exchange model: need 1 <= k <= d");
  require(2 * k <= d, "exchange model: compression ratio above 1/2 (need 2k <= d)");
  require(k_m >= 1 && k_m <= k, "exchange model: need 1 <= k_m <= k");
  require(k_a() >= 1, "exchange model: k_a = k - k_m must be >= 1");
  require(k_0 >= 1, "exchange model: k_0 must be >= 1");
  require(k_0 < k_m, "exchange model: k_0 must be < k_m");
  require(k_0 < d - k_m, "exchange model: k_0 must be < d - k_m");
}

void ExchangeModel::validate_for_simulation() const {
  require(d >= 1, "exchange model: d must be >= 1");
  require(k >= 1 && k <= d, "exchange model: need 1 <= k <= d");
  require(k_m <= k, "exchange model: k_m must be <= k");
  require(k_0 <= k_m, "exchange model: cannot swap more than k_m entries out");
  require(k_0 <= d - k_m, "exchange model: cannot swap more than d - k_m entries in");
  require(k_a() <= d - k_m, "exchange model: k_a exceeds the non-magnitude pool");
  require(k_a() >= 1, "exchange model: k_a = 0 makes staleness unbounded");
}

TransitionMatrix TransitionMatrix::from_dense(
    const std::vector<std::vector<double>>& dense) {
  TransitionMatrix P(dense.size());
  for (std::size_t i = 0; i < dense.size(); ++i) {
    require(dense[i].size() == dense.size(), "from_dense: matrix must be square");
    for (std::size_t j = 0; j < dense[i].size(); ++j) {
      if (dense[i][j] != 0.0) P.rows_[i].emplace_back(j, dense[i][j]);
    }
  }
  return P;
}

double TransitionMatrix::at(std::size_t i, std::size_t j) const {
  for (const auto& [col, p] : rows_[i]) {
    if (col == j) return p;
  }
  return 0.0;
}

double TransitionMatrix::row_sum_error() const {
  double worst = 0.0;
  for (const auto& row : rows_) {
    double s = 0.0;
    for (const auto& [col, p] : row) s += p;
    worst = std::max(worst, std::fabs(s - 1.0));
  }
  return worst;
}

void TransitionMatrix::canonicalize() {
  for (auto& row : rows_) {
    std::sort(row.begin(), row.end(),
              [](const Entry& a, const Entry& b) { return a.first < b.first; });
    Row fused;
    for (const auto& e : row) {
      if (!fused.empty() && fused.back().first == e.first) {
        fused.back().second += e.second;
      } else {
        fused.push_back(e);
      }
    }
    row = std::move(fused);
  }
}

namespace {

double log_choose(std::size_t n, std::size_t r) {
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(r) + 1.0) -
         std::lgamma(static_cast<double>(n - r) + 1.0);
}

double binom_pmf(std::size_t n, std::size_t l, double p) {
  if (n == 0) return l == 0 ? 1.0 : 0.0;
  return std::exp(log_choose(n, l) + static_cast<double>(l) * std::log(p) +
                  static_cast<double>(n - l) * std::log1p(-p));
}

}  // namespace

TransitionMatrix build_transition_matrix(const ExchangeModel& m) {
  m.validate();
  const std::size_t d = m.d;
  const std::size_t k = m.k;
  const std::size_t k_a = m.k_a();
  const double p1 = m.p1();
  const double p2 = m.p2();

  TransitionMatrix P(d);
  for (std::size_t i = 0; i < d; ++i) {
    auto& row = P.row(i);
    const std::size_t pos = i + 1;  // 1-based rank of this state
    if (pos <= k_a) {
      // Age-selected set: either swapped into the magnitude set or parked
      // at the head of the unselected ranks.
      row.emplace_back(k_a, p2);
      row.emplace_back(k, 1.0 - p2);
    } else if (pos <= k) {
      // Magnitude set: persists with probability 1 - p1.
      row.emplace_back(k_a, 1.0 - p1);
      row.emplace_back(k, p1);
    } else {
      // Unselected rank. Conditional on staying outside the magnitude set,
      // the entry advances by k_a plus the number of older entries that
      // left for the magnitude set (binomial over the d - pos older ones);
      // advances that would pass the last rank mean the entry is now among
      // the k_a oldest and is age-selected next, collapsing into state 0.
      const std::size_t older = d - pos;
      row.emplace_back(k_a, p2);
      double absorbed = 0.0;
      for (std::size_t l = 0; l <= older; ++l) {
        const double w = (1.0 - p2) * binom_pmf(older, l, p2);
        if (l + k_a < older) {
          row.emplace_back(i + k_a + l, w);
        } else {
          absorbed += w;
        }
      }
      row.emplace_back(0, absorbed);
    }
    double sum = 0.0;
    for (const auto& [col, p] : row) sum += p;
    for (auto& [col, p] : row) p /= sum;
  }
  P.canonicalize();
  return P;
}

std::vector<double> steady_state(const TransitionMatrix& P, double tol,
                                 std::size_t max_iters) {
  const std::size_t d = P.dim();
  require(d >= 1, "steady_state: empty matrix");
  std::vector<double> v(d, 1.0 / static_cast<double>(d));
  std::vector<double> u(d);
  double resid = 0.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    std::fill(u.begin(), u.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const double vi = v[i];
      if (vi == 0.0) continue;
      for (const auto& [col, p] : P.row(i)) u[col] += vi * p;
    }
    double mass = std::accumulate(u.begin(), u.end(), 0.0);
    for (auto& x : u) x /= mass;
    resid = 0.0;
    for (std::size_t j = 0; j < d; ++j) resid += std::fabs(u[j] - v[j]);
    v.swap(u);
    if (resid <= tol) return v;
  }
  std::ostringstream msg;
  msg << "steady_state: no convergence after " << max_iters
      << " iterations, residual " << resid;
  throw std::runtime_error(msg.str());
}

StalenessDistribution aou_distribution(const TransitionMatrix& P,
                                       const std::vector<double>& pi,
                                       const ExchangeModel& m) {
  require(P.dim() == m.d, "aou_distribution: matrix/model dimension mismatch");
  require(pi.size() == m.d, "aou_distribution: pi/model dimension mismatch");
  require(m.k_a() >= 1, "aou_distribution: k_a = 0 makes staleness unbounded");

  const std::size_t d = m.d;
  const std::size_t k_a = m.k_a();
  const std::size_t T = m.max_staleness();

  StalenessDistribution dist;
  dist.q.assign(T + 1, 0.0);
  std::vector<double> v = pi;
  std::vector<double> u(d);
  for (std::size_t l = 0; l <= T; ++l) {
    std::fill(u.begin(), u.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const double vi = v[i];
      if (vi == 0.0) continue;
      for (const auto& [col, p] : P.row(i)) u[col] += vi * p;
    }
    dist.q[l] = u[0] + u[k_a];
    u[0] = 0.0;
    u[k_a] = 0.0;
    v.swap(u);
  }
  dist.mean = expected_staleness(dist);
  return dist;
}

StalenessDistribution simulate_exchange_process(const ExchangeModel& m,
                                                std::size_t rounds,
                                                std::uint64_t seed) {
  m.validate_for_simulation();
  const std::size_t burn = 10 * m.max_staleness();
  require(rounds > burn,
          "simulate_exchange_process: rounds must exceed the burn-in of "
          "10 x max staleness");

  const std::size_t d = m.d;
  const std::size_t k_a = m.k_a();
  Rng rng(seed);

  std::vector<std::uint8_t> in_mag(d, 0);
  for (std::size_t i = 0; i < m.k_m; ++i) in_mag[i] = 1;
  std::vector<std::int64_t> age(d, 0);
  std::vector<std::size_t> mag_idx, comp_idx;
  std::vector<std::uint8_t> selected(d, 0);
  std::vector<std::uint64_t> hist;
  std::uint64_t samples = 0;

  for (std::size_t t = 0; t < rounds; ++t) {
    mag_idx.clear();
    comp_idx.clear();
    for (std::size_t i = 0; i < d; ++i) {
      (in_mag[i] ? mag_idx : comp_idx).push_back(i);
    }
    if (m.k_0 > 0) {
      for (std::size_t pos : rng.sample_without_replacement(mag_idx.size(), m.k_0)) {
        in_mag[mag_idx[pos]] = 0;
      }
      for (std::size_t pos : rng.sample_without_replacement(comp_idx.size(), m.k_0)) {
        in_mag[comp_idx[pos]] = 1;
      }
    }

    comp_idx.clear();
    for (std::size_t i = 0; i < d; ++i) {
      if (!in_mag[i]) comp_idx.push_back(i);
    }
    // k_a oldest non-magnitude entries; the comparator's index tiebreak
    // makes the winning set unique.
    std::nth_element(comp_idx.begin(), comp_idx.begin() + static_cast<std::ptrdiff_t>(k_a),
                     comp_idx.end(), [&age](std::size_t a, std::size_t b) {
                       if (age[a] != age[b]) return age[a] > age[b];
                       return a < b;
                     });

    std::fill(selected.begin(), selected.end(), 0);
    for (std::size_t i = 0; i < d; ++i) selected[i] = in_mag[i];
    for (std::size_t j = 0; j < k_a; ++j) selected[comp_idx[j]] = 1;

    for (std::size_t i = 0; i < d; ++i) {
      age[i] = selected[i] ? 0 : age[i] + 1;
    }
    if (t >= burn) {
      for (std::size_t i = 0; i < d; ++i) {
        const auto a = static_cast<std::size_t>(age[i]);
        if (a >= hist.size()) hist.resize(a + 1, 0);
        ++hist[a];
      }
      samples += d;
    }
  }

  StalenessDistribution dist;
  dist.q.resize(hist.size());
  for (std::size_t l = 0; l < hist.size(); ++l) {
    dist.q[l] = static_cast<double>(hist[l]) / static_cast<double>(samples);
  }
  dist.mean = expected_staleness(dist);
  return dist;
}

double expected_staleness(const StalenessDistribution& dist) {
  double mean = 0.0;
  for (std::size_t l = 0; l < dist.q.size(); ++l) {
    mean += static_cast<double>(l) * dist.q[l];
  }
  return mean;
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::max(a.size(), b.size());
  double tv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = i < a.size() ? a[i] : 0.0;
    const double y = i < b.size() ? b[i] : 0.0;
    tv += std::fabs(x - y);
  }
  return 0.5 * tv;
}

}  // namespace fairk
