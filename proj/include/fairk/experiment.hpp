#pragma once

#include <functional>
#include <vector>

#include "fairk/config.hpp"
#include "fairk/data.hpp"
#include "fairk/training.hpp"

namespace fairk {

// Config turned into live objects: datasets built or loaded, rows dealt to
// clients, task constructed.
struct PreparedExperiment {
  Task task;
  Dataset train;
  Dataset test;
  std::vector<std::vector<std::size_t>> parts;
  std::vector<ClientData> clients;
};

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg);

// prepare + run_experiment in one call.
ExperimentResult run_configured(
    const ExperimentConfig& cfg,
    const std::function<void(const RoundMetrics&)>& sink = nullptr);

}  // namespace fairk
