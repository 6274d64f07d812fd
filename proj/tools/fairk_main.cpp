#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "fairk/analysis.hpp"
#include "fairk/aou_markov.hpp"
#include "fairk/config.hpp"
#include "fairk/experiment.hpp"
#include "fairk/metrics_io.hpp"

namespace {

using namespace fairk;

struct CommonArgs {
  std::string config_path;
  ConfigOverrides overrides;
};

void attach_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file")
      ->required();
  cmd->add_option("--seed", args.overrides.seed, "master seed override")
      ->each([&args](const std::string&) { args.overrides.has_seed = true; });
  cmd->add_option("--out", args.overrides.out_dir, "output directory override");
  cmd->add_option("--policy", args.overrides.policy,
                  "selection policy override "
                  "(fair_k|top_k|round_robin|top_rand)");
  cmd->add_option("--rounds", args.overrides.rounds, "round count override")
      ->each([&args](const std::string&) { args.overrides.has_rounds = true; });
}

ExperimentConfig load_checked(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args.config_path);
  apply_overrides(cfg, args.overrides);
  cfg.validate();
  return cfg;
}

// Initial model of the training loop, regenerated for bound evaluation.
GradientVector initial_model(const ExperimentConfig& cfg, std::size_t d) {
  Rng rng(derive_seed(cfg.training.seed, {stream_id(Stream::ModelInit)}));
  GradientVector w(d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : w) v = scale * rng.normal();
  return w;
}

int cmd_run(const ExperimentConfig& cfg) {
  MetricsWriter writer(cfg.out_dir);
  const std::size_t cadence = cfg.metric_cadence;
  const std::size_t last = cfg.training.rounds - 1;
  ExperimentResult result;
  try {
    result = run_configured(cfg, [&](const RoundMetrics& m) {
      if (m.round % cadence == 0 || m.round == last) writer.append(m);
    });
  } catch (...) {
    writer.finalize();  // keep the completed rounds on disk
    throw;
  }
  writer.finalize();
  const auto& tail = result.metrics.back();
  std::cout << "completed " << result.metrics.size()
            << " rounds: train_loss=" << tail.train_loss
            << " test_accuracy=" << tail.test_accuracy << '\n'
            << "metrics: " << writer.jsonl_path() << '\n'
            << "summary: " << writer.summary_path() << '\n';
  return 0;
}

int cmd_aou_dist(const ExperimentConfig& cfg, std::size_t sim_rounds) {
  const std::size_t d = cfg.task.dimension();
  const ExchangeModel model{d, cfg.training.policy.k, cfg.training.policy.k_m,
                            cfg.effective_k0()};
  model.validate();

  const auto P = build_transition_matrix(model);
  const auto pi = steady_state(P);
  const auto analytic = aou_distribution(P, pi, model);
  if (sim_rounds == 0) sim_rounds = 10 * model.max_staleness() + 5000;
  const auto empirical =
      simulate_exchange_process(model, sim_rounds, cfg.training.seed);
  const double tv = total_variation(analytic.q, empirical.q);

  std::filesystem::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/aou_dist.csv";
  std::ofstream csv(path, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot open for writing: " + path);
  csv << std::setprecision(17) << "l,analytic_prob,empirical_prob\n";
  const std::size_t len = std::max(analytic.q.size(), empirical.q.size());
  for (std::size_t l = 0; l < len; ++l) {
    const double a = l < analytic.q.size() ? analytic.q[l] : 0.0;
    const double e = l < empirical.q.size() ? empirical.q[l] : 0.0;
    csv << l << ',' << a << ',' << e << '\n';
  }
  csv << "# E_tau_analytic=" << analytic.mean
      << " E_tau_empirical=" << empirical.mean
      << " T_max=" << model.max_staleness() << " tv=" << tv << '\n';

  std::cout << "staleness distribution over " << len << " lags: E_tau="
            << analytic.mean << " (empirical " << empirical.mean
            << "), T_max=" << model.max_staleness() << ", tv=" << tv << '\n'
            << "table: " << path << '\n';
  return 0;
}

struct EstimatorArgs {
  std::size_t pairs = 2000;
  double radius = 0.5;
  std::size_t samples = 2000;
  double spread = 0.5;
  std::size_t noise_models = 3;
  std::size_t noise_batches = 8;
};

void attach_estimators(CLI::App* cmd, EstimatorArgs& args) {
  cmd->add_option("--pairs", args.pairs, "gradient pairs per Lipschitz scan");
  cmd->add_option("--radius", args.radius, "pair displacement radius");
  cmd->add_option("--samples", args.samples, "tuples for the heterogeneity scan");
  cmd->add_option("--spread", args.spread, "client dispersion for the scan");
  cmd->add_option("--noise-models", args.noise_models,
                  "models probed for noise moments");
  cmd->add_option("--noise-batches", args.noise_batches,
                  "batches per client per model");
}

nlohmann::json estimate_all(const ExperimentConfig& cfg,
                            const EstimatorArgs& args,
                            ConvergenceConstants& c) {
  const PreparedExperiment prep = prepare_experiment(cfg);
  const std::uint64_t seed = cfg.training.seed;

  c.L_g = estimate_Lg(prep.task, prep.train, args.pairs, args.radius, seed);
  c.L_tilde = estimate_Ltilde(prep.task, prep.train, prep.parts, args.pairs,
                              args.radius, seed);
  c.L_h = estimate_Lh(prep.task, prep.train, prep.parts, args.samples,
                      args.spread, seed);
  const NoiseEstimates noise =
      estimate_noise(prep.task, prep.train, prep.parts, cfg.training.batch,
                     args.noise_models, args.noise_batches, seed);
  c.sigma_s2 = noise.sigma_s2;
  c.sigma_g2 = noise.sigma_g2;
  c.G2 = noise.G2;

  c.mu_c = cfg.training.channel.mu_c;
  c.sigma_c2 = cfg.training.channel.sigma_c2();
  c.sigma_z2 = cfg.training.channel.mode == ChannelMode::Noiseless
                   ? 0.0
                   : cfg.training.channel.sigma_z2;
  c.d = prep.task.dim();
  c.N = cfg.training.clients;
  c.H = cfg.training.local_steps;
  c.eta = cfg.training.eta;
  c.eta_l = cfg.training.eta_l;
  c.T_rounds = static_cast<double>(cfg.training.rounds);

  // Loss families here are bounded below by zero, so the gap to the
  // optimum is bounded by the initial loss itself.
  const GradientVector w0 = initial_model(cfg, prep.task.dim());
  c.f_gap = prep.task.full_loss(w0, prep.train);

  c.E_tau = 0.0;
  std::string e_tau_source = "unavailable (policy has no age stage)";
  const ExchangeModel model{c.d, cfg.training.policy.k,
                            cfg.training.policy.k_m, cfg.effective_k0()};
  try {
    model.validate();
    const auto P = build_transition_matrix(model);
    const auto pi = steady_state(P);
    c.E_tau = aou_distribution(P, pi, model).mean;
    e_tau_source = "analytic exchange chain, k_0=" +
                   std::to_string(cfg.effective_k0());
  } catch (const std::exception&) {
  }

  nlohmann::json j;
  j["L_g"] = c.L_g;
  j["L_h"] = c.L_h;
  j["L_tilde"] = c.L_tilde;
  j["sigma_s2"] = c.sigma_s2;
  j["sigma_g2"] = c.sigma_g2;
  j["G2"] = c.G2;
  j["mu_c"] = c.mu_c;
  j["sigma_c2"] = c.sigma_c2;
  j["sigma_z2"] = c.sigma_z2;
  j["d"] = c.d;
  j["N"] = c.N;
  j["H"] = c.H;
  j["eta"] = c.eta;
  j["eta_l"] = c.eta_l;
  j["E_tau"] = c.E_tau;
  j["E_tau_source"] = e_tau_source;
  j["f_gap"] = c.f_gap;
  j["T_rounds"] = c.T_rounds;
  j["estimator"] = {{"pairs", args.pairs},
                    {"radius", args.radius},
                    {"samples", args.samples},
                    {"spread", args.spread},
                    {"noise_models", args.noise_models},
                    {"noise_batches", args.noise_batches}};
  return j;
}

void write_json(const std::string& dir, const std::string& name,
                const nlohmann::json& j) {
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/" + name;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  std::cout << "wrote " << path << '\n';
}

int cmd_estimate(const ExperimentConfig& cfg, const EstimatorArgs& args) {
  ConvergenceConstants c;
  nlohmann::json j = estimate_all(cfg, args, c);
  std::cout << "L_g=" << c.L_g << " L_h=" << c.L_h << " L_tilde=" << c.L_tilde
            << " sigma_s2=" << c.sigma_s2 << " sigma_g2=" << c.sigma_g2
            << " G2=" << c.G2 << '\n';
  write_json(cfg.out_dir, "constants.json", j);
  return 0;
}

int cmd_bound(const ExperimentConfig& cfg, const EstimatorArgs& args,
              bool exact, bool strict) {
  ConvergenceConstants c;
  nlohmann::json j = estimate_all(cfg, args, c);

  BoundOptions opts;
  opts.exact_constants = exact;
  opts.strict = strict;
  const BoundBreakdown b = convergence_bound(c, opts);

  j["bound"] = {{"total", b.total},
                {"optimality_gap", b.optimality_gap},
                {"channel_noise", b.channel_noise},
                {"sgd_noise", b.sgd_noise},
                {"drift_divergence", b.drift_divergence},
                {"drift_variance", b.drift_variance},
                {"staleness", b.staleness},
                {"asymptotic", b.asymptotic},
                {"exact_constants", exact},
                {"strict", strict},
                {"eta_limit", c.eta_limit()},
                {"eta_l_limit", c.eta_l_limit()}};
  std::cout << "bound total=" << b.total << " (asymptotic form "
            << b.asymptotic << ")\n";
  write_json(cfg.out_dir, "constants.json", j);
  return 0;
}

int cmd_compare(const ExperimentConfig& base) {
  static const std::array<PolicyKind, 4> kinds = {
      PolicyKind::FairK, PolicyKind::TopK, PolicyKind::RoundRobin,
      PolicyKind::TopRand};

  std::filesystem::create_directories(base.out_dir);
  const std::string path = base.out_dir + "/compare.csv";
  std::ofstream csv(path, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot open for writing: " + path);
  csv << std::setprecision(17)
      << "policy,round,train_loss,test_accuracy,avg_aou,max_aou,"
         "grad_sq_norm\n";

  for (const PolicyKind kind : kinds) {
    ExperimentConfig cfg = base;
    ConfigOverrides ov;
    ov.policy = policy_name(kind);
    apply_overrides(cfg, ov);
    cfg.validate();
    const ExperimentResult result = run_configured(cfg);
    for (const auto& m : result.metrics) {
      csv << policy_name(kind) << ',' << m.round << ',' << m.train_loss << ','
          << m.test_accuracy << ',' << m.avg_aou << ',' << m.max_aou << ','
          << m.grad_sq_norm << '\n';
    }
    const auto& tail = result.metrics.back();
    std::cout << policy_name(kind) << ": final train_loss=" << tail.train_loss
              << " test_accuracy=" << tail.test_accuracy
              << " avg_aou=" << tail.avg_aou << '\n';
  }
  if (!csv) throw std::runtime_error("write failed: " + path);
  std::cout << "table: " << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"over-the-air federated learning simulator"};
  app.require_subcommand(1);

  CommonArgs run_args, aou_args, est_args, bound_args, cmp_args;
  std::size_t sim_rounds = 0;
  EstimatorArgs est_opts, bound_opts;
  bool exact = false, strict = false;

  CLI::App* run = app.add_subcommand("run", "train one configuration");
  attach_common(run, run_args);

  CLI::App* aou = app.add_subcommand(
      "aou-dist", "analytic vs simulated staleness distribution");
  attach_common(aou, aou_args);
  aou->add_option("--sim-rounds", sim_rounds,
                  "rounds for the empirical histogram (0 = auto)");

  CLI::App* est = app.add_subcommand("estimate-lipschitz",
                                     "sample the convergence constants");
  attach_common(est, est_args);
  attach_estimators(est, est_opts);

  CLI::App* bnd =
      app.add_subcommand("bound", "evaluate the convergence bound");
  attach_common(bnd, bound_args);
  attach_estimators(bnd, bound_opts);
  bnd->add_flag("--exact-constants", exact,
                "use the full leading constants instead of the simplified ones");
  bnd->add_flag("--strict", strict, "enforce the stepsize ceilings");

  CLI::App* cmp = app.add_subcommand(
      "compare", "matched-seed sweep over the four selection policies");
  attach_common(cmp, cmp_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(load_checked(run_args));
    if (aou->parsed()) return cmd_aou_dist(load_checked(aou_args), sim_rounds);
    if (est->parsed()) return cmd_estimate(load_checked(est_args), est_opts);
    if (bnd->parsed()) {
      return cmd_bound(load_checked(bound_args), bound_opts, exact, strict);
    }
    if (cmp->parsed()) return cmd_compare(load_checked(cmp_args));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
