#pragma once

#include "qctraj/ensemble.hpp"
#include "qctraj/model.hpp"

#include <json.hpp>

#include <optional>

namespace qctraj {

struct OutputOptions {
  bool paths = false;
  bool marginals = true;
  bool a_priori = true;
  bool concurrence = false;
  std::vector<double> times;  // defaults to {horizon}
  int state_stride = 1;
  long max_path_rows = 200000;
};

struct CheckConfig {
  std::string name;
  std::optional<double> tolerance;
  std::optional<double> horizon;
  std::vector<double> times;
};

/// One reproducible experiment: model, integration grid, requested outputs
/// and checks. `model` holds the fully built and validated hybrid model.
struct RunConfig {
  ModelParams model_params;
  HybridModel model;
  bool run_q = true;
  bool run_p = true;
  long trajectories = 10000;
  double horizon = 1.0;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  int workers = 0;  // 0: hardware concurrency
  int batches = 32;
  ClassicalPoint init_x;
  std::string init_state = "maximally_mixed";
  std::optional<Operator> init_matrix;
  OutputOptions outputs;
  std::optional<BinSpec> bins;
  std::vector<CheckConfig> checks;
  std::string output_dir = "out";
  nlohmann::json raw;  // parsed document, echoed into the manifest

  Operator initial_state() const;
  ClassicalPoint initial_point() const;
};

/// Parses and validates a JSON configuration document. Unknown keys are
/// rejected. On any violation throws ConfigError listing every problem found.
RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::string& path);

/// Named initial states: maximally_mixed, ground, ket_00..ket_11,
/// bell_phi_plus/minus, bell_psi_plus/minus.
Operator named_state(const std::string& name, int n);

}  // namespace qctraj
