// run.hpp — Experiment orchestration: model resolution from a RunConfig,
// the per-experiment drivers, and the run manifest.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ultradec/config.hpp"
#include "ultradec/core.hpp"

namespace ultradec {

inline constexpr const char* kToolVersion = "0.1.0";

// A model spec plus everything an experiment needs around it.
struct ResolvedModel {
    ModelSpec spec;
    ComplexOperator initial_state;  // density operator of the measured system
    int initial_level = 0;
    // Closed-form survival when one is known for this model and initial
    // state; empty otherwise.
    std::function<double(double)> analytic_survival;
    std::vector<std::string> warnings;
};

ResolvedModel resolve_model(const RunConfig& cfg);
// Same, with every device dephasing rate forced to `dephasing` (sweeps).
ResolvedModel resolve_model(const RunConfig& cfg, double dephasing);

struct GammaSweepResult {
    std::vector<double> gammas;
    std::vector<double> sup_errors;  // max |p_full - p_reduced| over the grid
    bool monotone_decreasing = false;
    std::vector<std::string> warnings;
};

// Full-vs-reduced population error for each dephasing rate in
// [experiment] gammas (at least two, ascending, all positive).
GammaSweepResult gamma_sweep(const RunConfig& cfg);

struct RunManifest {
    std::string experiment;
    std::string tool_version;
    std::string timestamp;  // the only field that differs between reruns
    double wall_seconds = 0.0;
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;
};

// Executes cfg.experiment, writes its output files plus manifest.json under
// cfg.out_dir, and returns the manifest. Configuration problems throw
// ConfigError; solver failures throw NumericalError.
RunManifest run(const RunConfig& cfg);

std::vector<double> linspace(double lo, double hi, int points);

}  // namespace ultradec
