#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fairk/config.hpp"
#include "fairk/experiment.hpp"
#include "fairk/metrics_io.hpp"

using namespace fairk;

namespace {

const char* kFullConfig = R"(# full experiment description
[task]
kind = logistic
features = 8
classes = 5

[data]
source = synthetic
train_per_class = 40
test_per_class = 10
mean_radius = 2.5
noise_sigma = 0.6
scale_tilt = 0.2

[federation]
clients = 6
rounds = 30
local_steps = 3
batch = 20
eta = 0.02
eta_l = 0.03
dir_alpha = 0.5
workers = 2
metric_cadence = 5
bootstrap = top_k

[policy]
kind = fair_k
k = 10
k_m = 7
k_0 = 2

[channel]
mode = one_bit_mv
mu_c = 0.9
sigma_z2 = 0.25
fading = unit
p_flip = 0.05
debias = true

[run]
seed = 123
out = results/exp1
)";

std::string temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("fairk_cfg_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  return dir.string();
}

RoundMetrics sample_metrics(std::size_t round) {
  RoundMetrics m;
  m.round = round;
  m.train_loss = 1.5 / static_cast<double>(round + 1);
  m.test_accuracy = 0.25 * static_cast<double>(round);
  m.avg_aou = 0.125 + static_cast<double>(round);
  m.max_aou = static_cast<std::int64_t>(2 * round);
  m.participation = {round + 1, round + 2, round + 3};
  m.grad_sq_norm = 42.0 - static_cast<double>(round);
  m.wall_time = 0.001 * static_cast<double>(round + 1);
  return m;
}

}  // namespace

TEST_CASE("full config text round trips every field") {
  const ExperimentConfig cfg = parse_config(kFullConfig);

  CHECK(cfg.task.kind == TaskKind::LogisticRegression);
  CHECK(cfg.task.features == 8);
  CHECK(cfg.task.classes == 5);

  CHECK(cfg.data.source == "synthetic");
  CHECK(cfg.data.train_per_class == 40);
  CHECK(cfg.data.test_per_class == 10);
  CHECK(cfg.data.mean_radius == doctest::Approx(2.5));
  CHECK(cfg.data.noise_sigma == doctest::Approx(0.6));
  CHECK(cfg.data.scale_tilt == doctest::Approx(0.2));

  CHECK(cfg.training.clients == 6);
  CHECK(cfg.training.rounds == 30);
  CHECK(cfg.training.local_steps == 3);
  CHECK(cfg.training.batch == 20);
  CHECK(cfg.training.eta == doctest::Approx(0.02));
  CHECK(cfg.training.eta_l == doctest::Approx(0.03));
  CHECK(cfg.dir_alpha == doctest::Approx(0.5));
  CHECK(cfg.training.workers == 2);
  CHECK(cfg.metric_cadence == 5);
  CHECK(cfg.training.bootstrap == BootstrapKind::TopK);

  CHECK(cfg.training.policy.kind == PolicyKind::FairK);
  CHECK(cfg.training.policy.k == 10);
  CHECK(cfg.training.policy.k_m == 7);
  CHECK(cfg.k_0 == 2);
  CHECK(cfg.effective_k0() == 2);

  CHECK(cfg.training.channel.mode == ChannelMode::OneBitMV);
  CHECK(cfg.training.channel.mu_c == doctest::Approx(0.9));
  CHECK(cfg.training.channel.sigma_z2 == doctest::Approx(0.25));
  CHECK(cfg.training.channel.fading == FadingKind::UnitGain);
  CHECK(cfg.training.channel.p_flip == doctest::Approx(0.05));
  CHECK(cfg.training.debias_by_mu_c);

  CHECK(cfg.training.seed == 123);
  CHECK(cfg.out_dir == "results/exp1");
  CHECK(cfg.check().empty());
}

TEST_CASE("omitted keys take the documented defaults") {
  const ExperimentConfig cfg = parse_config(R"(
[task]
kind = quadratic
features = 16
[policy]
kind = fair_k
k = 8
)");
  CHECK(cfg.training.clients == 50);
  CHECK(cfg.training.rounds == 100);
  CHECK(cfg.training.local_steps == 5);
  CHECK(cfg.training.batch == 50);
  CHECK(cfg.training.eta == doctest::Approx(0.01));
  CHECK(cfg.training.eta_l == doctest::Approx(0.01));
  CHECK(cfg.dir_alpha == doctest::Approx(0.3));
  CHECK(cfg.training.workers == 1);
  CHECK(cfg.metric_cadence == 1);
  CHECK(cfg.training.bootstrap == BootstrapKind::FullSweep);
  CHECK(cfg.training.channel.mode == ChannelMode::Analog);
  CHECK(cfg.training.channel.mu_c == doctest::Approx(1.0));
  CHECK(cfg.training.channel.fading == FadingKind::Rayleigh);
  CHECK_FALSE(cfg.training.debias_by_mu_c);
  CHECK(cfg.training.seed == 0);
  CHECK(cfg.out_dir == "out");
  CHECK(cfg.data.source == "synthetic");
}

TEST_CASE("k_m defaults depend on the policy kind") {
  auto parse_policy_cfg = [](const std::string& kind, const std::string& extra = "") {
    return parse_config("[task]\nkind = quadratic\nfeatures = 64\n"
                        "[policy]\nkind = " + kind + "\nk = 20\n" + extra);
  };
  CHECK(parse_policy_cfg("fair_k").training.policy.k_m == 15);
  CHECK(parse_policy_cfg("top_rand").training.policy.k_m == 15);
  CHECK(parse_policy_cfg("top_k").training.policy.k_m == 20);
  CHECK(parse_policy_cfg("round_robin").training.policy.k_m == 0);
  CHECK(parse_policy_cfg("fair_k", "k_m = 11\n").training.policy.k_m == 11);
}

TEST_CASE("effective swap size derives from k_m and clamps to a swap") {
  ExperimentConfig cfg = parse_config(R"(
[task]
kind = quadratic
features = 64
[policy]
kind = fair_k
k = 20
)");
  CHECK(cfg.k_0 == 0);
  CHECK(cfg.effective_k0() == 4);  // round(0.25 * 15)

  cfg.training.policy.k_m = 2;
  CHECK(cfg.effective_k0() == 1);  // lower clamp
  cfg.training.policy.k_m = 3;
  CHECK(cfg.effective_k0() == 1);
  cfg.k_0 = 9;
  CHECK(cfg.effective_k0() == 9);  // explicit value wins
}

TEST_CASE("check lists every violation in one pass") {
  ExperimentConfig cfg = parse_config(R"(
[task]
kind = quadratic
features = 12
[policy]
kind = fair_k
k = 4
)");
  cfg.training.clients = 0;
  cfg.training.rounds = 0;
  cfg.training.policy.k = 40;
  cfg.training.channel.mu_c = -1.0;
  cfg.out_dir.clear();

  const auto errs = cfg.check();
  CHECK(errs.size() >= 5);
  try {
    cfg.validate();
    FAIL("validate accepted a broken config");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("federation.clients") != std::string::npos);
    CHECK(msg.find("federation.rounds") != std::string::npos);
    CHECK(msg.find("policy.k") != std::string::npos);
    CHECK(msg.find("channel.mu_c") != std::string::npos);
    CHECK(msg.find("run.out") != std::string::npos);
  }
}

TEST_CASE("parse errors are collected with line numbers") {
  const std::string text = R"(
[task]
kind = quadratic
features = twelve
frobnicate = 1
[policy]
kind = sideways
k = 4
k = 5
)";
  try {
    parse_config(text);
    FAIL("parse accepted malformed text");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("task.features") != std::string::npos);
    CHECK(msg.find("task.frobnicate") != std::string::npos);
    CHECK(msg.find("unknown key") != std::string::npos);
    CHECK(msg.find("policy.kind") != std::string::npos);
    CHECK(msg.find("duplicate") != std::string::npos);
  }
}

TEST_CASE("bad booleans and stray text are rejected") {
  CHECK_THROWS_AS(parse_config("[task]\nkind = quadratic\nfeatures = 4\n"
                               "[channel]\ndebias = maybe\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_config("just some words\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[task]\nkind quadratic\n"),
                  std::invalid_argument);
}

TEST_CASE("overrides rewrite seed, out, rounds, and re-pin the policy") {
  ExperimentConfig cfg = parse_config(R"(
[task]
kind = quadratic
features = 64
[policy]
kind = fair_k
k = 20
k_m = 11
[run]
seed = 5
out = base
)");
  ConfigOverrides ov;
  ov.has_seed = true;
  ov.seed = 99;
  ov.out_dir = "elsewhere";
  ov.has_rounds = true;
  ov.rounds = 7;
  ov.policy = "top_k";
  apply_overrides(cfg, ov);

  CHECK(cfg.training.seed == 99);
  CHECK(cfg.out_dir == "elsewhere");
  CHECK(cfg.training.rounds == 7);
  CHECK(cfg.training.policy.kind == PolicyKind::TopK);
  CHECK(cfg.training.policy.k == 20);
  CHECK(cfg.training.policy.k_m == 20);  // re-pinned for the new kind

  ConfigOverrides none;
  apply_overrides(cfg, none);
  CHECK(cfg.training.seed == 99);
  CHECK(cfg.out_dir == "elsewhere");
  CHECK(cfg.training.rounds == 7);
}

TEST_CASE("load_config reads a file and names a missing one") {
  const std::string dir = temp_dir("load");
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/exp.ini";
  {
    std::ofstream out(path);
    out << kFullConfig;
  }
  const ExperimentConfig cfg = load_config(path);
  CHECK(cfg.training.seed == 123);

  try {
    load_config(dir + "/absent.ini");
    FAIL("opened a missing file");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("absent.ini") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("json metric lines round trip without wall time") {
  const RoundMetrics m = sample_metrics(3);
  const std::string line = metrics_to_json_line(m);
  CHECK(line.find("wall_time") == std::string::npos);

  const RoundMetrics back = metrics_from_json_line(line);
  CHECK(back.round == m.round);
  CHECK(back.train_loss == m.train_loss);
  CHECK(back.test_accuracy == m.test_accuracy);
  CHECK(back.avg_aou == m.avg_aou);
  CHECK(back.max_aou == m.max_aou);
  CHECK(back.participation == m.participation);
  CHECK(back.grad_sq_norm == m.grad_sq_norm);
  CHECK(metrics_to_json_line(back) == line);
}

TEST_CASE("writer emits one json line per round plus a summary table") {
  const std::string dir = temp_dir("writer");
  {
    MetricsWriter writer(dir);
    for (std::size_t t = 0; t < 3; ++t) writer.append(sample_metrics(t));
    writer.finalize();
    writer.finalize();  // idempotent
  }
  const auto rows = read_metrics_jsonl(dir + "/metrics.jsonl");
  REQUIRE(rows.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(rows[t].round == t);
    CHECK(rows[t].train_loss == sample_metrics(t).train_loss);
    CHECK(rows[t].participation == sample_metrics(t).participation);
  }

  std::ifstream summary(dir + "/summary.csv");
  REQUIRE(summary.good());
  std::string header;
  std::getline(summary, header);
  CHECK(header ==
        "round,train_loss,test_accuracy,avg_aou,max_aou,grad_sq_norm,"
        "wall_time");
  std::size_t data_lines = 0;
  for (std::string line; std::getline(summary, line);) {
    if (!line.empty()) ++data_lines;
  }
  CHECK(data_lines == 3);
  std::filesystem::remove_all(dir);
}

TEST_CASE("identical rows produce byte identical metric files") {
  const std::string dir_a = temp_dir("bytes_a");
  const std::string dir_b = temp_dir("bytes_b");
  for (const std::string& dir : {dir_a, dir_b}) {
    MetricsWriter writer(dir);
    for (std::size_t t = 0; t < 5; ++t) writer.append(sample_metrics(t));
    writer.finalize();
  }
  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  const std::string bytes_a = slurp(dir_a + "/metrics.jsonl");
  CHECK(!bytes_a.empty());
  CHECK(bytes_a == slurp(dir_b + "/metrics.jsonl"));
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

TEST_CASE("rows written before an abort survive on disk") {
  const std::string dir = temp_dir("abort");
  try {
    MetricsWriter writer(dir);
    writer.append(sample_metrics(0));
    writer.append(sample_metrics(1));
    throw std::runtime_error("training blew up");
  } catch (const std::runtime_error&) {
  }
  const auto rows = read_metrics_jsonl(dir + "/metrics.jsonl");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].round == 1);
  CHECK(std::filesystem::exists(dir + "/summary.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("regression splits share one true weight vector") {
  ExperimentConfig cfg;
  cfg.task.kind = TaskKind::SyntheticQuadratic;
  cfg.task.features = 6;
  cfg.data.train_samples = 60;
  cfg.data.test_samples = 20;
  cfg.data.noise_sigma = 0.0;
  cfg.training.clients = 3;
  cfg.training.policy = PolicyConfig{PolicyKind::FairK, 3, 2};
  cfg.training.seed = 42;

  const PreparedExperiment prep = prepare_experiment(cfg);
  REQUIRE(prep.train.n == 60);
  REQUIRE(prep.test.n == 20);

  // Recover the weights from six training rows by Gaussian elimination;
  // noiseless targets make the system exact.
  const std::size_t p = 6;
  std::vector<std::vector<double>> aug(p, std::vector<double>(p + 1));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) aug[i][j] = prep.train.row(i)[j];
    aug[i][p] = prep.train.y[i];
  }
  for (std::size_t col = 0; col < p; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < p; ++r) {
      if (std::abs(aug[r][col]) > std::abs(aug[pivot][col])) pivot = r;
    }
    std::swap(aug[col], aug[pivot]);
    REQUIRE(std::abs(aug[col][col]) > 1e-12);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == col) continue;
      const double f = aug[r][col] / aug[col][col];
      for (std::size_t j = col; j <= p; ++j) aug[r][j] -= f * aug[col][j];
    }
  }
  std::vector<double> w(p);
  for (std::size_t j = 0; j < p; ++j) w[j] = aug[j][p] / aug[j][j];

  for (std::size_t r = 0; r < prep.test.n; ++r) {
    double pred = 0.0;
    for (std::size_t j = 0; j < p; ++j) pred += prep.test.row(r)[j] * w[j];
    CHECK(pred == doctest::Approx(prep.test.y[r]).epsilon(1e-9));
  }

  const PreparedExperiment again = prepare_experiment(cfg);
  CHECK(again.train.x == prep.train.x);
  CHECK(again.test.y == prep.test.y);
}

TEST_CASE("classification splits are slices of one pooled draw") {
  ExperimentConfig cfg;
  cfg.task.kind = TaskKind::LogisticRegression;
  cfg.task.features = 5;
  cfg.task.classes = 3;
  cfg.data.train_per_class = 12;
  cfg.data.test_per_class = 4;
  cfg.training.clients = 2;
  cfg.training.policy = PolicyConfig{PolicyKind::FairK, 4, 3};
  cfg.training.seed = 9;

  const PreparedExperiment prep = prepare_experiment(cfg);
  REQUIRE(prep.train.n == 36);
  REQUIRE(prep.test.n == 12);

  const std::size_t per = 16;
  const Dataset pool = make_class_blobs(
      3, 5, per, cfg.data.mean_radius, cfg.data.noise_sigma,
      cfg.data.scale_tilt,
      derive_seed(cfg.training.seed, {stream_id(Stream::DataGen)}));
  auto same_row = [](const Dataset& a, std::size_t ra, const Dataset& b,
                     std::size_t rb) {
    if (a.y[ra] != b.y[rb]) return false;
    for (std::size_t j = 0; j < a.p; ++j) {
      if (a.row(ra)[j] != b.row(rb)[j]) return false;
    }
    return true;
  };
  bool all_match = true;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t s = 0; s < 12; ++s) {
      all_match =
          all_match && same_row(prep.train, c * 12 + s, pool, c * per + s);
    }
    for (std::size_t s = 0; s < 4; ++s) {
      all_match =
          all_match && same_row(prep.test, c * 4 + s, pool, c * per + 12 + s);
    }
  }
  CHECK(all_match);
}

TEST_CASE("metric reader rejects malformed lines") {
  const std::string dir = temp_dir("badline");
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/metrics.jsonl";
  {
    std::ofstream out(path);
    out << metrics_to_json_line(sample_metrics(0)) << '\n';
    out << "{not json\n";
  }
  CHECK_THROWS_AS(read_metrics_jsonl(path), std::exception);
  CHECK_THROWS_AS(read_metrics_jsonl(dir + "/missing.jsonl"),
                  std::runtime_error);
  std::filesystem::remove_all(dir);
}
