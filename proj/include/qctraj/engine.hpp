#pragma once

#include "qctraj/model.hpp"
#include "qctraj/rng.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace qctraj {

enum class Mode { Q, P };

const char* mode_name(Mode m);

/// One realized jump: grid step index (the step during which it fired) and
/// the jump type.
struct JumpEvent {
  long step = 0;
  int channel = 0;
};

/// State of one trajectory on the grid. In Q mode `sigma` is the
/// unnormalized state and `weight` its trace p_t; in P mode `sigma` has unit
/// trace and `weight` stays 1.
struct TrajectoryState {
  double t = 0.0;
  ClassicalPoint x;
  Operator sigma;
  double weight = 1.0;
};

/// sigma/weight, or the fallback state when the weight is below eps_weight.
Operator normalized_state(const TrajectoryState& state, const Operator& fallback);

/// m_k(t) = 2 Re <sigma_hat, L_k(x)>, the observation drift per Wiener channel.
Eigen::VectorXd observation_drift(const TrajectoryState& state, const HybridModel& model);

/// I_k(t) = <sigma_hat, J_k(x)' J_k(x)>, the physical jump intensities.
Eigen::VectorXd jump_intensities(const TrajectoryState& state, const HybridModel& model);

struct RecordOptions {
  /// Record the normalized quantum state every `state_stride` grid points
  /// (plus the initial and final points); 0 records endpoints only.
  int state_stride = 1;
  bool wiener = false;
};

/// A recorded realization. Classical point and weight are stored at every
/// grid point; quantum states per RecordOptions.
struct TrajectoryPath {
  Mode mode = Mode::Q;
  double dt = 0.0;
  long steps = 0;
  std::uint64_t seed = 0;
  long trajectory_index = 0;

  std::vector<double> times;
  std::vector<ClassicalPoint> x;
  std::vector<double> weight;
  std::vector<long> state_steps;
  std::vector<Operator> states;  // normalized
  std::vector<JumpEvent> jumps;
  std::vector<Eigen::VectorXd> wiener;
  long zero_intensity_steps = 0;

  long step_of_time(double t) const;            // throws if t is off the grid
  const Operator& state_at_step(long step) const;  // throws if not recorded
  bool has_state_at_step(long step) const;
};

/// Fixed-step weak order 1 integrator of the coupled hybrid system.
///
/// The quantum update is applied in congruence form: a single effective
/// operator M = I + dt*D + sum_k dW_k L_k acts as sigma -> M sigma M', the
/// Hamiltonian factor exp(-iH dt) is applied exactly, and realized jumps act
/// as sigma -> J_k sigma J_k'. This agrees with the additive Euler-Maruyama
/// update of the master equation to first order while keeping sigma positive
/// semidefinite and rank-preserving at every step.
class TrajectorySimulator {
 public:
  TrajectorySimulator(const HybridModel& model, double dt, Mode mode);

  const HybridModel& model() const { return model_; }
  double dt() const { return dt_; }
  Mode mode() const { return mode_; }

  TrajectoryState make_state(const ClassicalPoint& x0, const Operator& sigma0) const;

  /// Advances the state by one step. Draws exactly d normals from
  /// `wiener_rng` and l uniforms from `jump_rng`.
  void step(TrajectoryState& state, RngStream& wiener_rng, RngStream& jump_rng,
            long step_index, std::vector<JumpEvent>* events = nullptr,
            Eigen::VectorXd* wiener_out = nullptr, long* zero_intensity = nullptr);

  TrajectoryPath run(const ClassicalPoint& x0, const Operator& sigma0, double T,
                     std::uint64_t seed, long trajectory_index,
                     const RecordOptions& rec = {});

 private:
  void refresh_coefficients(const ClassicalPoint& x);

  const HybridModel& model_;
  double dt_;
  Mode mode_;

  // frozen coefficients at the current step's starting point
  ClassicalPoint c_;
  Eigen::MatrixXd a_;
  std::vector<ClassicalPoint> g_;
  Operator propagator_;           // exp(-i H dt)
  std::vector<Operator> L_;
  std::vector<Operator> J_;
  std::vector<Operator> JdagJ_;
  Operator M0_;                   // I + dt*D
  bool M0_scalar_ = false;
  Complex M0_value_{1.0, 0.0};
  std::vector<double> intensity_const_;  // I_k when J'J is a multiple of I, else NaN

  // scratch
  bool refresh_all_ = false;
  Operator M_, tmp1_, tmp2_;
  Eigen::VectorXd dweff_;
  std::vector<int> small_jump_buffer_;
};

/// Deterministic function of (seed, trajectory_index, mode).
TrajectoryPath simulate_trajectory(const HybridModel& model, const ClassicalPoint& x0,
                                   const Operator& sigma0, double T, double dt, Mode mode,
                                   std::uint64_t seed, long trajectory_index,
                                   const RecordOptions& rec = {});

}  // namespace qctraj
