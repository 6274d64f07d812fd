#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fairk/task.hpp"
#include "fairk/training.hpp"

namespace fairk {

// Where the train/test sets come from. Synthetic shapes are generated from
// the master seed; file sources load the classic IDX pair or a CSV with a
// trailing label column.
struct DataConfig {
  std::string source = "synthetic";  // synthetic | idx | csv
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 25;
  double mean_radius = 3.0;
  double noise_sigma = 0.8;
  double scale_tilt = 0.3;
  std::size_t train_samples = 1000;  // quadratic task
  std::size_t test_samples = 200;
  std::string train_images, train_labels, test_images, test_labels;
  std::string train_csv, test_csv;
};

struct ExperimentConfig {
  TaskSpec task;
  DataConfig data;
  TrainingConfig training;
  double dir_alpha = 0.3;
  std::size_t k_0 = 0;  // exchange swap size; 0 derives k_m/4 (clamped)
  std::size_t metric_cadence = 1;
  std::string out_dir = "out";

  // Swap size used by the age analyzer when k_0 is left at 0.
  std::size_t effective_k0() const;

  // Collects every violated key in one pass; empty means valid.
  std::vector<std::string> check() const;
  void validate() const;  // throws listing all violations
};

// Sectioned key=value text; '#' and ';' start comments. Keys are reported
// in dotted form ("channel.mu_c"). Unknown keys are validation errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Applies CLI overrides after the file is parsed.
struct ConfigOverrides {
  bool has_seed = false;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string policy;
  bool has_rounds = false;
  std::size_t rounds = 0;
};
void apply_overrides(ExperimentConfig& cfg, const ConfigOverrides& ov);

}  // namespace fairk
