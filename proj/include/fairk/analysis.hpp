#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fairk/aou_markov.hpp"
#include "fairk/task.hpp"

namespace fairk {

// Everything the convergence bound consumes. Estimated fields come from
// the samplers below; system fields are copied from the run config.
struct ConvergenceConstants {
  double L_g = 0.0;       // global gradient Lipschitz constant
  double L_h = 0.0;       // heterogeneity pseudo-Lipschitz constant
  double L_tilde = 0.0;   // worst per-client Lipschitz constant
  double sigma_s2 = 0.0;  // minibatch gradient variance
  double sigma_g2 = 0.0;  // client-to-global gradient divergence
  double G2 = 0.0;        // stochastic gradient second-moment bound
  double mu_c = 1.0;
  double sigma_c2 = 0.0;
  double sigma_z2 = 0.0;
  std::size_t d = 1;
  std::size_t N = 1;
  std::size_t H = 1;
  double eta = 0.01;
  double eta_l = 0.01;
  double E_tau = 0.0;
  double f_gap = 0.0;     // f(w_0) - f(w*)
  double T_rounds = 1.0;  // may be infinity

  void validate() const;

  // Admissible learning-rate ceilings; infinite when unconstrained.
  double eta_limit() const;
  double eta_l_limit() const;
};

struct BoundBreakdown {
  double optimality_gap = 0.0;   // f_gap / (eta mu_c H T)
  double channel_noise = 0.0;    // eta d L_g sigma_z^2 / (mu_c H N^2)
  double sgd_noise = 0.0;        // eta L_g sigma_s^2 (mu_c^2+sigma_c^2) / (mu_c N)
  double drift_divergence = 0.0; // (H-1)^2 eta_l^2 L_h^2 sigma_g^2
  double drift_variance = 0.0;   // (H-1) eta_l^2 sigma_s^2 (L_h^2 + L_g^2/N)
  double staleness = 0.0;        // (eta L_g E_tau/H)(d sigma_z^2/N^2 + G^2 H^2 (1+mu_c^2+sigma_c^2))
  double total = 0.0;
  double asymptotic = 0.0;       // large-N reduction of the same rate
};

struct BoundOptions {
  bool exact_constants = false;  // full leading constants, not the simplified ones
  bool strict = false;           // enforce the learning-rate ceilings
};

BoundBreakdown convergence_bound(const ConvergenceConstants& c,
                              const BoundOptions& opts = {});

// Upper bound on E||g_t||^2 from the staleness mixture: grad_sq_by_lag[l]
// estimates the squared norm of the summed local gradients l rounds back.
double aggregation_error_bound(const ConvergenceConstants& c,
                    const std::vector<double>& grad_sq_by_lag,
                    const StalenessDistribution& q);

// Sampled lower estimates of the Lipschitz constants. Each starts from
// random gradient-difference ratios and then sharpens the best anchor with
// a fixed number of power-iteration steps on the local curvature.
double estimate_Lg(const Task& task, const Dataset& ds, std::size_t num_pairs,
                   double radius, std::uint64_t seed);

double estimate_Ltilde(const Task& task, const Dataset& ds,
                       const std::vector<std::vector<std::size_t>>& parts,
                       std::size_t num_pairs, double radius,
                       std::uint64_t seed);

// Sampled ratio max for the heterogeneity constant: client tuples are
// drawn around a shared center with the given dispersion.
double estimate_Lh(const Task& task, const Dataset& ds,
                   const std::vector<std::vector<std::size_t>>& parts,
                   std::size_t num_samples, double spread, std::uint64_t seed);

struct NoiseEstimates {
  double sigma_s2 = 0.0;
  double sigma_g2 = 0.0;
  double G2 = 0.0;
};

// Minibatch variance, client divergence, and gradient second moment,
// sampled at num_models random models with batches_per_client draws each.
NoiseEstimates estimate_noise(const Task& task, const Dataset& ds,
                              const std::vector<std::vector<std::size_t>>& parts,
                              std::size_t batch, std::size_t num_models,
                              std::size_t batches_per_client,
                              std::uint64_t seed);

}  // namespace fairk
