#include "fairk/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include "fairk/rng.hpp"

namespace fairk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sq_norm(const GradientVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double norm(const GradientVector& v) { return std::sqrt(sq_norm(v)); }

}  // namespace

void ConvergenceConstants::validate() const {
  require(L_g >= 0.0 && L_h >= 0.0 && L_tilde >= 0.0,
          "constants: Lipschitz estimates must be nonnegative");
  require(sigma_s2 >= 0.0 && sigma_g2 >= 0.0 && G2 >= 0.0,
          "constants: noise moments must be nonnegative");
  require(mu_c > 0.0, "constants: mu_c must be positive");
  require(sigma_c2 >= 0.0 && sigma_z2 >= 0.0,
          "constants: channel moments must be nonnegative");
  require(d >= 1 && N >= 1 && H >= 1, "constants: d, N, H must be >= 1");
  require(eta > 0.0 && eta_l > 0.0, "constants: learning rates must be positive");
  require(E_tau >= 0.0, "constants: E_tau must be nonnegative");
  require(f_gap >= 0.0, "constants: f_gap must be nonnegative");
  require(T_rounds > 0.0, "constants: T_rounds must be positive");
}

double ConvergenceConstants::eta_limit() const {
  const double denom =
      2.0 * static_cast<double>(H) * L_g * (mu_c * mu_c + sigma_c2);
  return denom > 0.0 ? mu_c / denom : kInf;
}

double ConvergenceConstants::eta_l_limit() const {
  const double h = static_cast<double>(H);
  const double a = 2.0 * std::sqrt(30.0) * h * L_g;
  const double b = std::sqrt(6.0 * h * (L_g * L_g + L_h * L_h));
  const double lim_a = a > 0.0 ? 1.0 / a : kInf;
  const double lim_b = b > 0.0 ? 1.0 / b : kInf;
  return std::min(lim_a, lim_b);
}

BoundBreakdown convergence_bound(const ConvergenceConstants& c,
                              const BoundOptions& opts) {
  c.validate();
  if (opts.strict) {
    std::string bad;
    if (c.eta > c.eta_limit()) {
      bad += "eta exceeds mu_c / (2 H L_g (mu_c^2 + sigma_c^2)); ";
    }
    if (c.eta_l > c.eta_l_limit()) {
      bad += "eta_l exceeds min{1/(2 sqrt(30) H L_g), "
             "1/sqrt(6 H (L_g^2 + L_h^2))}; ";
    }
    if (!bad.empty()) {
      throw std::invalid_argument("convergence_bound: " + bad);
    }
  }

  const double Hd = static_cast<double>(c.H);
  const double Nd = static_cast<double>(c.N);
  const double dd = static_cast<double>(c.d);
  const double fade2 = c.mu_c * c.mu_c + c.sigma_c2;

  BoundBreakdown b;
  b.optimality_gap = c.f_gap / (c.eta * c.mu_c * Hd * c.T_rounds);
  b.channel_noise = c.eta * dd * c.L_g * c.sigma_z2 / (c.mu_c * Hd * Nd * Nd);
  b.sgd_noise = c.eta * c.L_g * c.sigma_s2 * fade2 / (c.mu_c * Nd);
  b.drift_divergence =
      (Hd - 1.0) * (Hd - 1.0) * c.eta_l * c.eta_l * c.L_h * c.L_h * c.sigma_g2;
  b.drift_variance = (Hd - 1.0) * c.eta_l * c.eta_l * c.sigma_s2 *
                     (c.L_h * c.L_h + c.L_g * c.L_g / Nd);
  b.staleness = (c.eta * c.L_g * c.E_tau / Hd) *
                (dd * c.sigma_z2 / (Nd * Nd) + c.G2 * Hd * Hd * (1.0 + fade2));

  if (opts.exact_constants) {
    b.optimality_gap *= 4.0;
    b.channel_noise *= 2.0;
    b.sgd_noise *= 4.0;
    b.drift_divergence *= 72.0;
    b.drift_variance = 4.0 * (Hd - 1.0) * c.eta_l * c.eta_l * c.sigma_s2 *
                       (6.0 * c.L_h * c.L_h + 5.0 * c.L_g * c.L_g / Nd);
    b.staleness = (4.0 * c.eta * c.L_g * c.E_tau / Hd) *
                  (dd * c.sigma_z2 / (2.0 * Nd * Nd) +
                   c.G2 * Hd * Hd * (0.5 + fade2));
  }

  b.total = b.optimality_gap + b.channel_noise + b.sgd_noise +
            b.drift_divergence + b.drift_variance + b.staleness;
  b.asymptotic = c.f_gap / (c.eta * c.mu_c * Hd * c.T_rounds) +
                 c.eta_l * c.eta_l * (Hd - 1.0) * (Hd - 1.0) * c.L_h * c.L_h *
                     (c.sigma_g2 + c.sigma_s2) +
                 c.eta * Hd * c.L_g * c.E_tau * c.G2 * (1.0 + fade2);
  return b;
}

double aggregation_error_bound(const ConvergenceConstants& c,
                    const std::vector<double>& grad_sq_by_lag,
                    const StalenessDistribution& q) {
  c.validate();
  require(grad_sq_by_lag.size() == q.q.size(),
          "aggregation_error_bound: one norm estimate per staleness lag required");
  double prob = 0.0;
  for (double p : q.q) {
    require(p >= -1e-12, "aggregation_error_bound: negative staleness probability");
    prob += p;
  }
  require(std::fabs(prob - 1.0) <= 1e-6,
          "aggregation_error_bound: staleness probabilities must sum to 1");
  const double fade2 = c.mu_c * c.mu_c + c.sigma_c2;
  double mix = 0.0;
  for (std::size_t l = 0; l < q.q.size(); ++l) {
    require(grad_sq_by_lag[l] >= 0.0, "aggregation_error_bound: negative norm estimate");
    mix += q.q[l] * grad_sq_by_lag[l];
  }
  const double Nd = static_cast<double>(c.N);
  return 2.0 * fade2 * mix +
         2.0 * static_cast<double>(c.H) * c.sigma_s2 * fade2 / Nd +
         static_cast<double>(c.d) * c.sigma_z2 / (Nd * Nd);
}

namespace {

using GradFn = std::function<GradientVector(const GradientVector&)>;
using PairRecord = std::vector<std::pair<GradientVector, GradientVector>>;

constexpr std::size_t kRefineSteps = 40;

// Max gradient-difference ratio over random pairs, then over a power
// iteration launched from the best anchor; every evaluated pair can be
// recorded so another gradient field can be measured on the same pairs.
double ratio_scan(const GradFn& grad, std::size_t d, std::size_t num_pairs,
                  double radius, Rng& rng, PairRecord* record) {
  require(num_pairs >= 100, "lipschitz estimate: need at least 100 pairs");
  require(radius > 0.0, "lipschitz estimate: radius must be positive");
  const double anchor_scale = 1.0 / std::sqrt(static_cast<double>(d));

  double best = 0.0;
  GradientVector best_w(d, 0.0), best_u(d, 0.0);
  bool have_dir = false;

  GradientVector w(d), u(d), v(d);
  for (std::size_t i = 0; i < num_pairs; ++i) {
    for (std::size_t j = 0; j < d; ++j) w[j] = anchor_scale * rng.normal();
    double un = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      u[j] = rng.normal();
      un += u[j] * u[j];
    }
    un = std::sqrt(un);
    if (un <= 0.0) continue;  // zero displacement, skip the pair
    for (std::size_t j = 0; j < d; ++j) {
      u[j] /= un;
      v[j] = w[j] + radius * u[j];
    }
    GradientVector gw = grad(w);
    GradientVector gv = grad(v);
    for (std::size_t j = 0; j < d; ++j) gv[j] -= gw[j];
    const double ratio = norm(gv) / radius;
    if (record) record->emplace_back(w, v);
    if (ratio >= best) {
      best = ratio;
      best_w = w;
      best_u = u;
      have_dir = true;
    }
  }

  if (!have_dir) return best;
  const GradientVector g0 = grad(best_w);
  u = best_u;
  for (std::size_t it = 0; it < kRefineSteps; ++it) {
    for (std::size_t j = 0; j < d; ++j) v[j] = best_w[j] + radius * u[j];
    GradientVector diff = grad(v);
    for (std::size_t j = 0; j < d; ++j) diff[j] -= g0[j];
    const double dn = norm(diff);
    if (record) record->emplace_back(best_w, v);
    best = std::max(best, dn / radius);
    if (dn <= 1e-300) break;
    for (std::size_t j = 0; j < d; ++j) u[j] = diff[j] / dn;
  }
  return best;
}

GradFn pooled_gradient(const Task& task, const Dataset& ds) {
  return [&task, &ds](const GradientVector& w) {
    return task.full_gradient(w, ds);
  };
}

GradFn client_gradient(const Task& task, const Dataset& ds,
                       const std::vector<std::size_t>& rows) {
  return [&task, &ds, &rows](const GradientVector& w) {
    return task.gradient(w, ds, rows);
  };
}

// Gradient of the federated objective (1/N) sum_n f_n.
GradientVector federated_gradient(
    const Task& task, const Dataset& ds,
    const std::vector<std::vector<std::size_t>>& parts,
    const GradientVector& w) {
  GradientVector g(w.size(), 0.0);
  for (const auto& rows : parts) {
    GradientVector gn = task.gradient(w, ds, rows);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += gn[j];
  }
  for (double& x : g) x /= static_cast<double>(parts.size());
  return g;
}

}  // namespace

double estimate_Lg(const Task& task, const Dataset& ds, std::size_t num_pairs,
                   double radius, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {stream_id(Stream::Analysis)}));
  return ratio_scan(pooled_gradient(task, ds), task.dim(), num_pairs, radius,
                    rng, nullptr);
}

double estimate_Ltilde(const Task& task, const Dataset& ds,
                       const std::vector<std::vector<std::size_t>>& parts,
                       std::size_t num_pairs, double radius,
                       std::uint64_t seed) {
  require(!parts.empty(), "estimate_Ltilde: no clients");
  const std::size_t d = task.dim();

  // Replay the pooled scan's pair sequence so the per-client maximum is
  // taken over a superset of the pairs behind the global estimate.
  PairRecord shared;
  Rng rng(derive_seed(seed, {stream_id(Stream::Analysis)}));
  double best = ratio_scan(pooled_gradient(task, ds), d, num_pairs, radius,
                           rng, &shared);

  for (std::size_t n = 0; n < parts.size(); ++n) {
    auto grad_n = client_gradient(task, ds, parts[n]);
    for (const auto& pr : shared) {
      GradientVector diff = grad_n(pr.second);
      const GradientVector ga = grad_n(pr.first);
      double dist2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        diff[j] -= ga[j];
        const double step = pr.second[j] - pr.first[j];
        dist2 += step * step;
      }
      if (dist2 > 0.0) best = std::max(best, norm(diff) / std::sqrt(dist2));
    }
    Rng rng_n(derive_seed(seed, {stream_id(Stream::Analysis), 1,
                                 static_cast<std::uint64_t>(n)}));
    best = std::max(best,
                    ratio_scan(grad_n, d, num_pairs, radius, rng_n, nullptr));
  }
  return best;
}

double estimate_Lh(const Task& task, const Dataset& ds,
                   const std::vector<std::vector<std::size_t>>& parts,
                   std::size_t num_samples, double spread,
                   std::uint64_t seed) {
  const std::size_t N = parts.size();
  require(N >= 2, "estimate_Lh: need at least two clients");
  require(num_samples >= 1, "estimate_Lh: need at least one sample");
  require(spread > 0.0, "estimate_Lh: spread must be positive");
  const std::size_t d = task.dim();
  const double anchor_scale = 1.0 / std::sqrt(static_cast<double>(d));

  Rng rng(derive_seed(seed, {stream_id(Stream::Analysis), 2}));
  double best = 0.0;
  GradientVector center(d), wbar(d), avg_grad(d);
  std::vector<GradientVector> models(N, GradientVector(d));

  for (std::size_t s = 0; s < num_samples; ++s) {
    for (std::size_t j = 0; j < d; ++j) center[j] = anchor_scale * rng.normal();
    std::fill(wbar.begin(), wbar.end(), 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t j = 0; j < d; ++j) {
        models[n][j] = center[j] + spread * rng.normal();
        wbar[j] += models[n][j];
      }
    }
    for (double& x : wbar) x /= static_cast<double>(N);

    std::fill(avg_grad.begin(), avg_grad.end(), 0.0);
    double dispersion = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      GradientVector gn = task.gradient(models[n], ds, parts[n]);
      for (std::size_t j = 0; j < d; ++j) {
        avg_grad[j] += gn[j];
        const double dev = models[n][j] - wbar[j];
        dispersion += dev * dev;
      }
    }
    for (double& x : avg_grad) x /= static_cast<double>(N);
    dispersion /= static_cast<double>(N);
    if (dispersion <= 1e-18) continue;  // degenerate tuple, skip

    GradientVector gbar = federated_gradient(task, ds, parts, wbar);
    for (std::size_t j = 0; j < d; ++j) avg_grad[j] -= gbar[j];
    best = std::max(best, sq_norm(avg_grad) / dispersion);
  }
  return std::sqrt(best);
}

NoiseEstimates estimate_noise(const Task& task, const Dataset& ds,
                              const std::vector<std::vector<std::size_t>>& parts,
                              std::size_t batch, std::size_t num_models,
                              std::size_t batches_per_client,
                              std::uint64_t seed) {
  require(!parts.empty(), "estimate_noise: no clients");
  require(batch >= 1 && num_models >= 1 && batches_per_client >= 1,
          "estimate_noise: sample counts must be positive");
  const std::size_t d = task.dim();
  const double anchor_scale = 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng(derive_seed(seed, {stream_id(Stream::Analysis), 3}));

  NoiseEstimates est;
  GradientVector w(d);
  for (std::size_t m = 0; m < num_models; ++m) {
    for (std::size_t j = 0; j < d; ++j) w[j] = anchor_scale * rng.normal();

    std::vector<GradientVector> full(parts.size());
    GradientVector gbar(d, 0.0);
    for (std::size_t n = 0; n < parts.size(); ++n) {
      full[n] = task.gradient(w, ds, parts[n]);
      for (std::size_t j = 0; j < d; ++j) gbar[j] += full[n][j];
    }
    for (double& x : gbar) x /= static_cast<double>(parts.size());

    for (std::size_t n = 0; n < parts.size(); ++n) {
      GradientVector dev = full[n];
      for (std::size_t j = 0; j < d; ++j) dev[j] -= gbar[j];
      est.sigma_g2 = std::max(est.sigma_g2, sq_norm(dev));

      const auto& rows = parts[n];
      const std::size_t b = std::min(batch, rows.size());
      double var_sum = 0.0;
      for (std::size_t rep = 0; rep < batches_per_client; ++rep) {
        auto pick = rng.sample_without_replacement(rows.size(), b);
        std::vector<std::size_t> chosen(b);
        for (std::size_t i = 0; i < b; ++i) chosen[i] = rows[pick[i]];
        GradientVector gb = task.gradient(w, ds, chosen);
        est.G2 = std::max(est.G2, sq_norm(gb));
        for (std::size_t j = 0; j < d; ++j) gb[j] -= full[n][j];
        var_sum += sq_norm(gb);
      }
      est.sigma_s2 = std::max(
          est.sigma_s2, var_sum / static_cast<double>(batches_per_client));
    }
  }
  return est;
}

}  // namespace fairk
