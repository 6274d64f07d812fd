#include "fairk/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fairk/channel.hpp"
#include "fairk/selection.hpp"

namespace fairk {

std::size_t ExperimentConfig::effective_k0() const {
  if (k_0 > 0) return k_0;
  const std::size_t k_m = training.policy.k_m;
  if (k_m <= 1) return 1;
  const auto quarter =
      static_cast<std::size_t>(std::llround(0.25 * static_cast<double>(k_m)));
  return std::clamp<std::size_t>(quarter, 1, k_m - 1);
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct RawConfig {
  std::map<std::string, std::string> kv;
  std::vector<std::string> errors;

  bool take(const std::string& key, std::string& out) {
    auto it = kv.find(key);
    if (it == kv.end()) return false;
    out = it->second;
    kv.erase(it);
    return true;
  }

  template <typename T>
  void number(const std::string& key, T& out) {
    std::string raw;
    if (!take(key, raw)) return;
    std::istringstream ss(raw);
    T value{};
    if (!(ss >> value) || !(ss >> std::ws).eof()) {
      errors.push_back(key + ": not a valid number (got \"" + raw + "\")");
      return;
    }
    out = value;
  }

  void text(const std::string& key, std::string& out) { take(key, out); }

  void boolean(const std::string& key, bool& out) {
    std::string raw;
    if (!take(key, raw)) return;
    std::string low = raw;
    std::transform(low.begin(), low.end(), low.begin(), ::tolower);
    if (low == "true" || low == "yes" || low == "1") {
      out = true;
    } else if (low == "false" || low == "no" || low == "0") {
      out = false;
    } else {
      errors.push_back(key + ": not a boolean (got \"" + raw + "\")");
    }
  }
};

RawConfig tokenize(const std::string& text) {
  RawConfig raw;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        raw.errors.push_back("line " + std::to_string(lineno) +
                             ": unterminated section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      raw.errors.push_back("line " + std::to_string(lineno) +
                           ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      raw.errors.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    const std::string dotted = section.empty() ? key : section + "." + key;
    if (!raw.kv.emplace(dotted, value).second) {
      raw.errors.push_back(dotted + ": duplicate key");
    }
  }
  return raw;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  RawConfig raw = tokenize(text);
  ExperimentConfig cfg;

  std::string task_kind = "logistic";
  raw.text("task.kind", task_kind);
  raw.number("task.features", cfg.task.features);
  raw.number("task.classes", cfg.task.classes);
  raw.number("task.hidden", cfg.task.hidden);

  raw.text("data.source", cfg.data.source);
  raw.number("data.train_per_class", cfg.data.train_per_class);
  raw.number("data.test_per_class", cfg.data.test_per_class);
  raw.number("data.mean_radius", cfg.data.mean_radius);
  raw.number("data.noise_sigma", cfg.data.noise_sigma);
  raw.number("data.scale_tilt", cfg.data.scale_tilt);
  raw.number("data.train_samples", cfg.data.train_samples);
  raw.number("data.test_samples", cfg.data.test_samples);
  raw.text("data.train_images", cfg.data.train_images);
  raw.text("data.train_labels", cfg.data.train_labels);
  raw.text("data.test_images", cfg.data.test_images);
  raw.text("data.test_labels", cfg.data.test_labels);
  raw.text("data.train_csv", cfg.data.train_csv);
  raw.text("data.test_csv", cfg.data.test_csv);

  raw.number("federation.clients", cfg.training.clients);
  raw.number("federation.rounds", cfg.training.rounds);
  raw.number("federation.local_steps", cfg.training.local_steps);
  raw.number("federation.batch", cfg.training.batch);
  raw.number("federation.eta", cfg.training.eta);
  raw.number("federation.eta_l", cfg.training.eta_l);
  raw.number("federation.dir_alpha", cfg.dir_alpha);
  raw.number("federation.workers", cfg.training.workers);
  raw.number("federation.metric_cadence", cfg.metric_cadence);
  std::string bootstrap = "full_sweep";
  raw.text("federation.bootstrap", bootstrap);

  std::string policy_kind = "fair_k";
  raw.text("policy.kind", policy_kind);
  raw.number("policy.k", cfg.training.policy.k);
  bool k_m_given = raw.kv.count("policy.k_m") > 0;
  raw.number("policy.k_m", cfg.training.policy.k_m);
  raw.number("policy.k_0", cfg.k_0);

  std::string channel_mode = "analog";
  std::string fading = "rayleigh";
  raw.text("channel.mode", channel_mode);
  raw.number("channel.mu_c", cfg.training.channel.mu_c);
  raw.number("channel.sigma_z2", cfg.training.channel.sigma_z2);
  raw.text("channel.fading", fading);
  raw.number("channel.p_flip", cfg.training.channel.p_flip);
  raw.boolean("channel.debias", cfg.training.debias_by_mu_c);

  raw.number("run.seed", cfg.training.seed);
  raw.text("run.out", cfg.out_dir);

  for (const auto& [key, value] : raw.kv) {
    raw.errors.push_back(key + ": unknown key");
  }

  try {
    cfg.task.kind = parse_task_kind(task_kind);
  } catch (const std::exception&) {
    raw.errors.push_back("task.kind: unknown task \"" + task_kind + "\"");
  }
  try {
    cfg.training.policy.kind = parse_policy(policy_kind);
  } catch (const std::exception&) {
    raw.errors.push_back("policy.kind: unknown policy \"" + policy_kind + "\"");
  }
  try {
    cfg.training.channel.mode = parse_channel_mode(channel_mode);
  } catch (const std::exception&) {
    raw.errors.push_back("channel.mode: unknown mode \"" + channel_mode + "\"");
  }
  try {
    cfg.training.channel.fading = parse_fading_kind(fading);
  } catch (const std::exception&) {
    raw.errors.push_back("channel.fading: unknown kind \"" + fading + "\"");
  }
  if (bootstrap == "full_sweep") {
    cfg.training.bootstrap = BootstrapKind::FullSweep;
  } else if (bootstrap == "top_k") {
    cfg.training.bootstrap = BootstrapKind::TopK;
  } else {
    raw.errors.push_back("federation.bootstrap: unknown kind \"" + bootstrap +
                         "\"");
  }

  // Unset magnitude share: three quarters of k, matching the reference
  // operating point; degenerate policies pin their own value.
  if (!k_m_given) {
    switch (cfg.training.policy.kind) {
      case PolicyKind::TopK: cfg.training.policy.k_m = cfg.training.policy.k; break;
      case PolicyKind::RoundRobin: cfg.training.policy.k_m = 0; break;
      default:
        cfg.training.policy.k_m = static_cast<std::size_t>(
            std::llround(0.75 * static_cast<double>(cfg.training.policy.k)));
    }
  }

  if (!raw.errors.empty()) {
    std::string msg = "config errors:";
    for (const auto& e : raw.errors) msg += "\n  - " + e;
    throw std::invalid_argument(msg);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<std::string> ExperimentConfig::check() const {
  std::vector<std::string> bad;
  const auto flag = [&bad](bool ok, const char* msg) {
    if (!ok) bad.emplace_back(msg);
  };

  flag(task.features >= 1, "task.features: must be >= 1");
  const bool classification = task.kind != TaskKind::SyntheticQuadratic;
  flag(!classification || task.classes >= 2,
       "task.classes: classification needs >= 2");
  flag(task.kind != TaskKind::SmallMLP || task.hidden >= 1,
       "task.hidden: mlp needs >= 1");

  const bool task_ok = bad.empty();
  const std::size_t d = task_ok ? task.dimension() : 0;

  flag(training.clients >= 1, "federation.clients: must be >= 1");
  flag(training.rounds >= 1, "federation.rounds: must be >= 1");
  flag(training.local_steps >= 1, "federation.local_steps: must be >= 1");
  flag(training.batch >= 1, "federation.batch: must be >= 1");
  flag(training.eta > 0.0, "federation.eta: must be > 0");
  flag(training.eta_l > 0.0, "federation.eta_l: must be > 0");
  flag(training.workers >= 1, "federation.workers: must be >= 1");
  flag(metric_cadence >= 1, "federation.metric_cadence: must be >= 1");
  flag(dir_alpha > 0.0, "federation.dir_alpha: must be > 0");

  flag(training.policy.k >= 1, "policy.k: must be >= 1");
  if (task_ok && training.policy.k >= 1) {
    flag(training.policy.k <= d, "policy.k: exceeds the model dimension");
  }
  flag(training.policy.k_m <= training.policy.k,
       "policy.k_m: must not exceed policy.k");
  if (k_0 > 0 && training.policy.k_m > 0) {
    flag(k_0 < training.policy.k_m, "policy.k_0: must be below policy.k_m");
  }

  flag(training.channel.mu_c > 0.0, "channel.mu_c: must be > 0");
  flag(training.channel.sigma_z2 >= 0.0, "channel.sigma_z2: must be >= 0");
  flag(training.channel.p_flip >= 0.0 && training.channel.p_flip <= 1.0,
       "channel.p_flip: must lie in [0, 1]");

  if (data.source == "synthetic") {
    if (classification) {
      flag(data.train_per_class >= 1, "data.train_per_class: must be >= 1");
      flag(data.test_per_class >= 1, "data.test_per_class: must be >= 1");
    } else {
      flag(data.train_samples >= 1, "data.train_samples: must be >= 1");
      flag(data.test_samples >= 1, "data.test_samples: must be >= 1");
    }
    flag(data.noise_sigma >= 0.0, "data.noise_sigma: must be >= 0");
    flag(data.mean_radius > 0.0 || !classification,
         "data.mean_radius: must be > 0");
  } else if (data.source == "idx") {
    flag(!data.train_images.empty() && !data.train_labels.empty() &&
             !data.test_images.empty() && !data.test_labels.empty(),
         "data: idx source needs train/test image and label paths");
  } else if (data.source == "csv") {
    flag(!data.train_csv.empty() && !data.test_csv.empty(),
         "data: csv source needs data.train_csv and data.test_csv");
  } else {
    bad.push_back("data.source: must be synthetic, idx, or csv");
  }

  flag(!out_dir.empty(), "run.out: must not be empty");
  return bad;
}

void ExperimentConfig::validate() const {
  const auto bad = check();
  if (bad.empty()) return;
  std::string msg = "config errors:";
  for (const auto& e : bad) msg += "\n  - " + e;
  throw std::invalid_argument(msg);
}

void apply_overrides(ExperimentConfig& cfg, const ConfigOverrides& ov) {
  if (ov.has_seed) cfg.training.seed = ov.seed;
  if (!ov.out_dir.empty()) cfg.out_dir = ov.out_dir;
  if (ov.has_rounds) cfg.training.rounds = ov.rounds;
  if (!ov.policy.empty()) {
    const PolicyKind kind = parse_policy(ov.policy);
    cfg.training.policy.kind = kind;
    // Re-pin the magnitude share the same way an unset key would be.
    switch (kind) {
      case PolicyKind::TopK: cfg.training.policy.k_m = cfg.training.policy.k; break;
      case PolicyKind::RoundRobin: cfg.training.policy.k_m = 0; break;
      default:
        cfg.training.policy.k_m = static_cast<std::size_t>(
            std::llround(0.75 * static_cast<double>(cfg.training.policy.k)));
    }
  }
}

}  // namespace fairk
