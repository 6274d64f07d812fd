#include "fairk/experiment.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "fairk/rng.hpp"

namespace fairk {

namespace {

Dataset copy_rows(const Dataset& src, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.n = rows.size();
  out.p = src.p;
  out.x.reserve(out.n * src.p);
  out.y.reserve(out.n);
  for (std::size_t r : rows) {
    out.x.insert(out.x.end(), src.row(r), src.row(r) + src.p);
    out.y.push_back(src.y[r]);
  }
  return out;
}

struct SplitData {
  Dataset train;
  Dataset test;
};

// Synthetic sources draw one pooled dataset and deal rows to the two
// splits, so train and test share the same generating model (class means,
// true weights) and differ only in samples.
SplitData build_datasets(const ExperimentConfig& cfg) {
  const DataConfig& dc = cfg.data;
  if (dc.source == "idx") {
    return {load_idx(dc.train_images, dc.train_labels),
            load_idx(dc.test_images, dc.test_labels)};
  }
  if (dc.source == "csv") {
    return {load_csv(dc.train_csv), load_csv(dc.test_csv)};
  }
  const std::uint64_t seed =
      derive_seed(cfg.training.seed, {stream_id(Stream::DataGen)});

  std::vector<std::size_t> train_rows, test_rows;
  Dataset pool;
  if (cfg.task.kind == TaskKind::SyntheticQuadratic) {
    pool = make_regression_data(dc.train_samples + dc.test_samples,
                                cfg.task.features, dc.noise_sigma, seed);
    for (std::size_t r = 0; r < pool.n; ++r) {
      (r < dc.train_samples ? train_rows : test_rows).push_back(r);
    }
  } else {
    const std::size_t per = dc.train_per_class + dc.test_per_class;
    pool = make_class_blobs(cfg.task.classes, cfg.task.features, per,
                            dc.mean_radius, dc.noise_sigma, dc.scale_tilt,
                            seed);
    for (std::size_t c = 0; c < cfg.task.classes; ++c) {
      for (std::size_t s = 0; s < per; ++s) {
        (s < dc.train_per_class ? train_rows : test_rows)
            .push_back(c * per + s);
      }
    }
  }
  return {copy_rows(pool, train_rows), copy_rows(pool, test_rows)};
}

std::vector<std::vector<std::size_t>> split_rows(const ExperimentConfig& cfg,
                                                 const Dataset& train) {
  const std::size_t N = cfg.training.clients;
  if (cfg.task.kind != TaskKind::SyntheticQuadratic) {
    return dirichlet_partition(train.y, N, cfg.dir_alpha, cfg.training.seed);
  }
  // Real-valued targets have no classes; deal a seeded shuffle instead.
  std::vector<std::size_t> order(train.n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.training.seed, {stream_id(Stream::Partition)}));
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> parts(N);
  for (std::size_t i = 0; i < order.size(); ++i) {
    parts[i % N].push_back(order[i]);
  }
  for (auto& p : parts) {
    if (p.empty()) {
      throw std::runtime_error(
          "experiment: more clients than training samples");
    }
    std::sort(p.begin(), p.end());
  }
  return parts;
}

}  // namespace

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  SplitData data = build_datasets(cfg);
  PreparedExperiment prep{Task(cfg.task), std::move(data.train),
                          std::move(data.test), {}, {}};
  prep.parts = split_rows(cfg, prep.train);
  prep.clients.reserve(prep.parts.size());
  for (const auto& rows : prep.parts) {
    prep.clients.push_back(ClientData{rows, cfg.training.batch});
  }
  return prep;
}

ExperimentResult run_configured(
    const ExperimentConfig& cfg,
    const std::function<void(const RoundMetrics&)>& sink) {
  PreparedExperiment prep = prepare_experiment(cfg);
  return run_experiment(cfg.training, prep.task, prep.train, prep.test,
                        prep.clients, sink);
}

}  // namespace fairk
