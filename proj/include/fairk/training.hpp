#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fairk/channel.hpp"
#include "fairk/selection.hpp"
#include "fairk/task.hpp"

namespace fairk {

// One client's slice of the shared dataset.
struct ClientData {
  std::vector<std::size_t> rows;
  std::size_t batch = 0;
};

enum class BootstrapKind { FullSweep, TopK };

struct TrainingConfig {
  std::size_t clients = 50;
  std::size_t rounds = 100;
  std::size_t local_steps = 5;   // H
  std::size_t batch = 50;        // B
  double eta = 0.01;
  double eta_l = 0.01;
  PolicyConfig policy;
  ChannelParams channel;
  std::uint64_t seed = 0;
  BootstrapKind bootstrap = BootstrapKind::FullSweep;
  bool debias_by_mu_c = false;
  std::size_t workers = 1;
  bool trace = false;  // keep per-round gradients for tests

  void validate(std::size_t dim) const;
};

struct RoundMetrics {
  std::size_t round = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double avg_aou = 0.0;
  std::int64_t max_aou = 0;
  std::vector<std::uint64_t> participation;  // cumulative per-entry counts
  double grad_sq_norm = 0.0;
  double wall_time = 0.0;  // seconds; in-memory only, never persisted
};

struct RoundTrace {
  SelectionMask mask;
  GradientVector reconstructed;
  GradientVector mean_client_gradient;
};

struct ExperimentResult {
  std::vector<RoundMetrics> metrics;
  GradientVector final_model;
  std::vector<RoundTrace> trace;  // filled only when cfg.trace is set
};

// H local SGD steps from w0 on uniformly shuffled mini-batches; returns the
// sum of the step gradients, which also equals (w0 - w_H) / eta_l.
GradientVector local_update(const Task& task, const GradientVector& w0,
                            const Dataset& data, const ClientData& client,
                            std::size_t local_steps, double eta_l, Rng& rng);

GradientVector global_step(const GradientVector& w, const GradientVector& g,
                           double eta);

// Full federated loop. Per-round metrics are both returned and streamed to
// `sink` (when given) so abnormal termination still leaves a usable log;
// on divergence the error carries the failing round index.
ExperimentResult run_experiment(
    const TrainingConfig& cfg, const Task& task, const Dataset& train,
    const Dataset& test, const std::vector<ClientData>& clients,
    const std::function<void(const RoundMetrics&)>& sink = nullptr);

}  // namespace fairk
