#include "fairk/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

namespace fairk {

void TrainingConfig::validate(std::size_t dim) const {
  require(clients >= 1, "training: need at least one client");
  require(rounds >= 1, "training: rounds must be positive");
  require(local_steps >= 1, "training: local_steps must be positive");
  require(batch >= 1, "training: batch must be positive");
  require(eta > 0.0 && std::isfinite(eta), "training: eta must be positive");
  require(eta_l > 0.0 && std::isfinite(eta_l),
          "training: eta_l must be positive");
  require(workers >= 1, "training: workers must be positive");
  policy.validate(dim);
  channel.validate();
}

namespace {

bool all_finite(const GradientVector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// Mini-batch iterator: epoch-wise shuffle without replacement, the short
// remainder at the end of an epoch is dropped.
class BatchSampler {
 public:
  BatchSampler(const std::vector<std::size_t>& rows, std::size_t batch,
               Rng& rng)
      : order_(rows), batch_(std::min(batch, rows.size())), rng_(rng) {
    require(!rows.empty(), "training: client has no data");
    cursor_ = order_.size();  // force a shuffle on first draw
  }

  std::vector<std::size_t> next() {
    if (cursor_ + batch_ > order_.size()) {
      rng_.shuffle(order_);
      cursor_ = 0;
    }
    std::vector<std::size_t> out(order_.begin() + cursor_,
                                 order_.begin() + cursor_ + batch_);
    cursor_ += batch_;
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_ = 0;
  std::size_t cursor_ = 0;
  Rng& rng_;
};

}  // namespace

GradientVector local_update(const Task& task, const GradientVector& w0,
                            const Dataset& data, const ClientData& client,
                            std::size_t local_steps, double eta_l, Rng& rng) {
  BatchSampler sampler(client.rows, client.batch, rng);
  GradientVector w = w0;
  GradientVector acc(w0.size(), 0.0);
  for (std::size_t h = 0; h < local_steps; ++h) {
    GradientVector g = task.gradient(w, data, sampler.next());
    if (!all_finite(g)) {
      throw std::runtime_error("training: non-finite local gradient");
    }
    for (std::size_t j = 0; j < w.size(); ++j) {
      acc[j] += g[j];
      w[j] -= eta_l * g[j];
    }
  }
  return acc;
}

GradientVector global_step(const GradientVector& w, const GradientVector& g,
                           double eta) {
  require(w.size() == g.size(), "training: model/gradient size mismatch");
  GradientVector out(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) out[j] = w[j] - eta * g[j];
  return out;
}

namespace {

// Accumulated local gradients for every client at the current model, spread
// over a fixed worker pool. Output order is by client index, so the result
// is independent of scheduling.
void compute_client_gradients(const TrainingConfig& cfg, const Task& task,
                              const Dataset& train,
                              const std::vector<ClientData>& clients,
                              const GradientVector& w, std::size_t round,
                              std::vector<GradientVector>& out) {
  const std::size_t n_clients = clients.size();
  out.assign(n_clients, GradientVector());
  std::vector<std::string> errors(n_clients);

  auto run_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t n = lo; n < hi; ++n) {
      try {
        Rng rng(derive_seed(cfg.seed, {stream_id(Stream::Batch),
                                       static_cast<std::uint64_t>(round),
                                       static_cast<std::uint64_t>(n)}));
        out[n] = local_update(task, w, train, clients[n], cfg.local_steps,
                              cfg.eta_l, rng);
      } catch (const std::exception& e) {
        errors[n] = e.what();
      }
    }
  };

  const std::size_t workers = std::min(cfg.workers, n_clients);
  if (workers <= 1) {
    run_range(0, n_clients);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n_clients + workers - 1) / workers;
    for (std::size_t t = 0; t < workers; ++t) {
      const std::size_t lo = t * chunk;
      const std::size_t hi = std::min(lo + chunk, n_clients);
      if (lo >= hi) break;
      pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t n = 0; n < n_clients; ++n) {
    if (!errors[n].empty()) {
      throw std::runtime_error("client " + std::to_string(n) + ": " +
                               errors[n]);
    }
  }
}

std::vector<SparsePayload> pack_payloads(
    const std::vector<GradientVector>& grads,
    const std::vector<std::size_t>& idx) {
  std::vector<SparsePayload> payloads;
  payloads.reserve(grads.size());
  for (const auto& g : grads) {
    std::vector<double> vals(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) vals[j] = g[idx[j]];
    payloads.emplace_back(std::move(vals));
  }
  return payloads;
}

SparsePayload transmit(const TrainingConfig& cfg,
                       const std::vector<GradientVector>& grads,
                       const std::vector<std::size_t>& idx,
                       std::uint64_t fading_seed, std::uint64_t noise_seed) {
  auto payloads = pack_payloads(grads, idx);
  Rng fading_rng(fading_seed);
  auto h = sample_fading(cfg.channel, grads.size(), fading_rng);
  Rng noise_rng(noise_seed);
  SparsePayload agg = aggregate(payloads, h, cfg.channel, noise_rng);
  if (cfg.debias_by_mu_c && cfg.channel.mode != ChannelMode::OneBitMV) {
    for (double& v : agg.values) v /= cfg.channel.mu_c;
  }
  return agg;
}

GradientVector mean_of(const std::vector<GradientVector>& grads) {
  GradientVector m(grads.front().size(), 0.0);
  for (const auto& g : grads) {
    for (std::size_t j = 0; j < m.size(); ++j) m[j] += g[j];
  }
  for (double& v : m) v /= static_cast<double>(grads.size());
  return m;
}

}  // namespace

ExperimentResult run_experiment(
    const TrainingConfig& cfg, const Task& task, const Dataset& train,
    const Dataset& test, const std::vector<ClientData>& clients,
    const std::function<void(const RoundMetrics&)>& sink) {
  const std::size_t d = task.dim();
  cfg.validate(d);
  require(clients.size() == cfg.clients,
          "training: client list does not match config");
  train.validate();
  test.validate();
  require(train.p == task.spec().features && test.p == task.spec().features,
          "training: dataset feature width mismatch");
  for (const auto& c : clients) {
    require(!c.rows.empty(), "training: empty client");
    for (std::size_t r : c.rows) {
      require(r < train.n, "training: client row out of range");
    }
  }

  Rng init_rng(derive_seed(cfg.seed, {stream_id(Stream::ModelInit)}));
  GradientVector w(d);
  const double init_scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : w) v = init_scale * init_rng.normal();

  GradientVector g_prev(d, 0.0);
  AoUVector ages(d);
  std::vector<std::uint64_t> participation(d, 0);

  ExperimentResult result;
  result.metrics.reserve(cfg.rounds);

  std::vector<GradientVector> client_grads;
  SelectionMask mask(d);

  auto select_next = [&](const GradientVector& g, std::size_t round) {
    Rng rng(derive_seed(cfg.seed, {stream_id(Stream::Policy),
                                   static_cast<std::uint64_t>(round)}));
    return select_entries(g, ages, cfg.policy, rng);
  };

  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    const auto tic = std::chrono::steady_clock::now();

    compute_client_gradients(cfg, task, train, clients, w, t, client_grads);

    GradientVector g_round(d);
    if (t == 0 && cfg.bootstrap == BootstrapKind::FullSweep) {
      // Round 0 sweeps the whole model in ceil(d/k) disjoint transmissions
      // so every entry starts fresh.
      g_round = g_prev;
      const std::size_t k = cfg.policy.k;
      const std::size_t slots = (d + k - 1) / k;
      for (std::size_t s = 0; s < slots; ++s) {
        const std::size_t lo = s * k;
        const std::size_t hi = std::min(lo + k, d);
        std::vector<std::size_t> idx(hi - lo);
        for (std::size_t j = lo; j < hi; ++j) idx[j - lo] = j;
        auto agg = transmit(
            cfg, client_grads, idx,
            derive_seed(cfg.seed, {stream_id(Stream::Fading), 0, s}),
            derive_seed(cfg.seed, {stream_id(Stream::Noise), 0, s}));
        for (std::size_t j = 0; j < idx.size(); ++j) {
          g_round[idx[j]] = agg.values[j];
        }
      }
      mask = SelectionMask(d);
      for (std::size_t j = 0; j < d; ++j) mask.set(j);
    } else {
      if (t == 0) {
        // No gradient exists yet, so the first mask is a random k-subset.
        Rng rng(derive_seed(cfg.seed, {stream_id(Stream::Policy), 0}));
        mask = SelectionMask(d);
        for (std::size_t j :
             rng.sample_without_replacement(d, cfg.policy.k)) {
          mask.set(j);
        }
      }
      auto idx = mask.indices();
      auto agg =
          transmit(cfg, client_grads, idx,
                   derive_seed(cfg.seed, {stream_id(Stream::Fading),
                                          static_cast<std::uint64_t>(t)}),
                   derive_seed(cfg.seed, {stream_id(Stream::Noise),
                                          static_cast<std::uint64_t>(t)}));
      g_round = reconstruct(g_prev, mask, agg);
    }
    if (!all_finite(g_round)) {
      throw std::runtime_error("training: diverged at round " +
                               std::to_string(t));
    }

    w = global_step(w, g_round, cfg.eta);
    ages = aou_update(ages, mask);
    for (std::size_t j = 0; j < d; ++j) {
      if (mask.test(j)) ++participation[j];
    }

    if (cfg.trace) {
      RoundTrace tr;
      tr.mask = mask;
      tr.reconstructed = g_round;
      tr.mean_client_gradient = mean_of(client_grads);
      result.trace.push_back(std::move(tr));
    }

    mask = select_next(g_round, t + 1);
    g_prev = g_round;

    RoundMetrics m;
    m.round = t;
    m.train_loss = task.full_loss(w, train);
    if (!std::isfinite(m.train_loss)) {
      throw std::runtime_error("training: diverged at round " +
                               std::to_string(t));
    }
    m.test_accuracy = task.evaluate(w, test).second;
    m.avg_aou = ages.mean_age();
    m.max_aou = ages.max_age();
    m.participation = participation;
    double sq = 0.0;
    for (double v : g_round) sq += v * v;
    m.grad_sq_norm = sq;
    m.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - tic)
            .count();
    if (sink) sink(m);
    result.metrics.push_back(std::move(m));
  }

  result.final_model = std::move(w);
  return result;
}

}  // namespace fairk
