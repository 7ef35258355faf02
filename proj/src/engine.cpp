#include "qctraj/engine.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qctraj {

namespace {

constexpr Complex kI{0.0, 1.0};

Operator hermitian_propagator(const Operator& H, double dt) {
  Eigen::SelfAdjointEigenSolver<Operator> es(hermitize(H));
  const Eigen::VectorXd& ev = es.eigenvalues();
  Eigen::VectorXcd phases(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    phases(i) = std::exp(-kI * ev(i) * dt);
  }
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

/// Detects A = c*I and returns c, or nullopt.
std::optional<Complex> scalar_multiple_of_identity(const Operator& A) {
  const Complex c = A.trace() / static_cast<double>(A.rows());
  const double defect = (A - c * Operator::Identity(A.rows(), A.cols())).norm();
  if (defect <= 1e-13 * std::max(1.0, A.norm())) return c;
  return std::nullopt;
}

}  // namespace

const char* mode_name(Mode m) { return m == Mode::Q ? "Q" : "P"; }

Operator normalized_state(const TrajectoryState& state, const Operator& fallback) {
  if (!(state.weight > tol::eps_weight)) return fallback;
  return state.sigma / state.sigma.trace().real();
}

Eigen::VectorXd observation_drift(const TrajectoryState& state, const HybridModel& model) {
  const Operator sh = normalized_state(state, maximally_mixed(model.n));
  Eigen::VectorXd m(model.d);
  Operator L;
  for (int k = 0; k < model.d; ++k) {
    model.lindblad(state.x, k, L);
    m(k) = 2.0 * (sh * L).trace().real();
  }
  return m;
}

Eigen::VectorXd jump_intensities(const TrajectoryState& state, const HybridModel& model) {
  const Operator sh = normalized_state(state, maximally_mixed(model.n));
  Eigen::VectorXd intens(model.l);
  Operator J;
  for (int k = 0; k < model.l; ++k) {
    model.jump_op(state.x, k, J);
    intens(k) = (sh * J.adjoint() * J).trace().real();
  }
  return intens;
}

long TrajectoryPath::step_of_time(double t) const {
  const double ratio = dt > 0 ? t / dt : 0.0;
  const long step = std::lround(ratio);
  if (step < 0 || step > steps || std::abs(step * dt - t) > 1e-9 * std::max(1.0, std::abs(t))) {
    throw NumericalError("time " + std::to_string(t) + " is not on the trajectory grid");
  }
  return step;
}

bool TrajectoryPath::has_state_at_step(long step) const {
  return std::binary_search(state_steps.begin(), state_steps.end(), step);
}

const Operator& TrajectoryPath::state_at_step(long step) const {
  auto it = std::lower_bound(state_steps.begin(), state_steps.end(), step);
  if (it == state_steps.end() || *it != step) {
    throw NumericalError("no quantum state recorded at step " + std::to_string(step));
  }
  return states[static_cast<size_t>(it - state_steps.begin())];
}

TrajectorySimulator::TrajectorySimulator(const HybridModel& model, double dt, Mode mode)
    : model_(model), dt_(dt), mode_(mode) {
  if (!(dt > 0)) throw ConfigError("dt must be positive");
  if (model.max_rate() * dt > 0.1 + 1e-12) {
    throw ConfigError("step size violates lambda_max*dt <= 0.1 for model '" + model.name + "'");
  }
  const int n = model.n;
  M_.resize(n, n);
  tmp1_.resize(n, n);
  tmp2_.resize(n, n);
  dweff_.resize(model.d);
  // Evaluate once at the box center; x-independent pieces stay cached.
  ClassicalPoint x0 = model.box_lo.size() == model.s
                          ? ClassicalPoint(0.5 * (model.box_lo + model.box_hi))
                          : ClassicalPoint::Zero(model.s);
  refresh_all_ = true;
  refresh_coefficients(x0);
  refresh_all_ = false;
}

void TrajectorySimulator::refresh_coefficients(const ClassicalPoint& x) {
  const bool classical = refresh_all_ || model_.x_dep_classical;
  const bool ham = refresh_all_ || model_.x_dep_H;
  const bool lind = refresh_all_ || model_.x_dep_L;
  const bool jump = refresh_all_ || model_.x_dep_J;

  if (classical) {
    model_.drift(x, c_);
    model_.diffusion(x, a_);
    g_.resize(model_.l);
    for (int k = 0; k < model_.l; ++k) model_.displacement(x, k, g_[k]);
  }
  if (ham) {
    Operator H;
    model_.hamiltonian(x, H);
    propagator_ = hermitian_propagator(H, dt_);
  }
  if (lind) {
    L_.resize(model_.d);
    for (int k = 0; k < model_.d; ++k) model_.lindblad(x, k, L_[k]);
  }
  if (jump) {
    J_.resize(model_.l);
    JdagJ_.resize(model_.l);
    intensity_const_.assign(model_.l, std::numeric_limits<double>::quiet_NaN());
    for (int k = 0; k < model_.l; ++k) {
      model_.jump_op(x, k, J_[k]);
      JdagJ_[k] = J_[k].adjoint() * J_[k];
      if (auto c = scalar_multiple_of_identity(JdagJ_[k])) {
        intensity_const_[k] = c->real();
      }
    }
  }
  if (lind || jump) {
    // M0 = I + dt*(-1/2 sum L'L - 1/2 sum lambda J'J + 1/2 sum lambda);
    // the Hamiltonian part lives in the unitary factor.
    const int n = model_.n;
    Operator D = Operator::Zero(n, n);
    double rate_sum = 0.0;
    for (int k = 0; k < model_.d; ++k) D -= 0.5 * L_[k].adjoint() * L_[k];
    for (int k = 0; k < model_.l; ++k) {
      D -= 0.5 * model_.channels[k].rate * JdagJ_[k];
      rate_sum += model_.channels[k].rate;
    }
    D += 0.5 * rate_sum * Operator::Identity(n, n);
    M0_ = Operator::Identity(n, n) + dt_ * D;
    if (auto c = scalar_multiple_of_identity(M0_)) {
      M0_scalar_ = true;
      M0_value_ = *c;
    } else {
      M0_scalar_ = false;
    }
  }
}

TrajectoryState TrajectorySimulator::make_state(const ClassicalPoint& x0,
                                                const Operator& sigma0) const {
  if (x0.size() != model_.s) {
    throw DimensionError("initial classical point has wrong dimension");
  }
  if (sigma0.rows() != model_.n || sigma0.cols() != model_.n) {
    throw DimensionError("initial state has wrong dimension");
  }
  require_hermitian(sigma0, "initial state");
  if (min_eigenvalue(sigma0) < -tol::psd) {
    throw NumericalError("initial state is not positive semidefinite");
  }
  const double tr = sigma0.trace().real();
  if (std::abs(tr - 1.0) > 1e-9) {
    throw NumericalError("initial state must have unit trace");
  }
  TrajectoryState st;
  st.t = 0.0;
  st.x = x0;
  st.sigma = hermitize(sigma0);
  st.weight = tr;
  return st;
}

void TrajectorySimulator::step(TrajectoryState& state, RngStream& wiener_rng,
                               RngStream& jump_rng, long step_index,
                               std::vector<JumpEvent>* events, Eigen::VectorXd* wiener_out,
                               long* zero_intensity) {
  refresh_coefficients(state.x);
  const int d = model_.d;
  const int l = model_.l;
  const double sqrt_dt = std::sqrt(dt_);

  // Raw noise: d Wiener increments and l jump uniforms, always in this order.
  for (int k = 0; k < d; ++k) dweff_(k) = sqrt_dt * wiener_rng.normal();
  if (wiener_out) *wiener_out = dweff_;

  // Observation drift and physical intensities, frozen at the step start.
  double trace = state.sigma.trace().real();
  if (mode_ == Mode::P) {
    for (int k = 0; k < d; ++k) {
      const double mk = 2.0 * (state.sigma * L_[k]).trace().real() / trace;
      dweff_(k) += mk * dt_;
    }
  }

  small_jump_buffer_.clear();
  for (int k = 0; k < l; ++k) {
    const double u = jump_rng.uniform();
    double prob = model_.channels[k].rate * dt_;
    if (mode_ == Mode::P) {
      double intensity = intensity_const_[k];
      if (std::isnan(intensity)) {
        intensity = (state.sigma * JdagJ_[k]).trace().real() / trace;
      }
      if (intensity <= tol::eps_intensity) {
        if (zero_intensity) ++*zero_intensity;
        prob = 0.0;
      } else {
        prob *= intensity;
      }
    }
    if (prob > 0.5) {
      throw NumericalError("jump probability " + std::to_string(prob) +
                           " per step is too large; reduce dt");
    }
    if (u < prob) small_jump_buffer_.push_back(k);
  }

  // Classical update with coefficients at X(t-).
  state.x += c_ * dt_;
  if (d > 0) state.x += a_ * dweff_;
  for (int k : small_jump_buffer_) state.x += g_[k];
  for (int k = 0; k < l; ++k) {
    if (model_.channels[k].compensated) state.x -= model_.channels[k].rate * dt_ * g_[k];
  }

  // Quantum update: sigma -> G M sigma M' G', then realized jump conjugations.
  if (d == 0 && M0_scalar_) {
    const double factor = std::norm(M0_value_);
    tmp1_.noalias() = propagator_ * state.sigma;
    tmp2_.noalias() = tmp1_ * propagator_.adjoint();
    tmp2_ *= factor;
  } else {
    M_ = M0_;
    for (int k = 0; k < d; ++k) M_.noalias() += dweff_(k) * L_[k];
    tmp1_.noalias() = M_ * state.sigma;
    tmp2_.noalias() = tmp1_ * M_.adjoint();
    tmp1_.noalias() = propagator_ * tmp2_;
    tmp2_.noalias() = tmp1_ * propagator_.adjoint();
  }
  for (int k : small_jump_buffer_) {
    tmp1_.noalias() = J_[k] * tmp2_;
    tmp2_.noalias() = tmp1_ * J_[k].adjoint();
    if (events) events->push_back({step_index, k});
  }
  state.sigma = 0.5 * (tmp2_ + tmp2_.adjoint());

  if (!state.sigma.allFinite() || !state.x.allFinite()) {
    throw NumericalError("non-finite update");
  }

  trace = state.sigma.trace().real();
  if (mode_ == Mode::Q) {
    if (trace < 0.0) {
      if (trace < -tol::psd) {
        throw NumericalError("negative weight " + std::to_string(trace));
      }
      state.sigma.setZero();
      trace = 0.0;
    }
    state.weight = trace;
  } else {
    if (!(trace > tol::eps_weight)) {
      throw NumericalError("cannot renormalize: trace " + std::to_string(trace) +
                           " after jump with vanishing intensity");
    }
    state.sigma /= trace;
    state.weight = 1.0;
  }
  state.t = (step_index + 1) * dt_;
}

TrajectoryPath TrajectorySimulator::run(const ClassicalPoint& x0, const Operator& sigma0,
                                        double T, std::uint64_t seed, long trajectory_index,
                                        const RecordOptions& rec) {
  if (T < 0) throw ConfigError("horizon must be nonnegative");
  const long steps = std::lround(T / dt_);
  if (std::abs(steps * dt_ - T) > 1e-9 * std::max(1.0, T)) {
    throw ConfigError("dt does not divide the horizon");
  }

  TrajectoryState st = make_state(x0, sigma0);
  if (mode_ == Mode::P) {
    st.sigma /= st.sigma.trace().real();
    st.weight = 1.0;
  }

  TrajectoryPath path;
  path.mode = mode_;
  path.dt = dt_;
  path.steps = steps;
  path.seed = seed;
  path.trajectory_index = trajectory_index;
  path.times.reserve(steps + 1);
  path.x.reserve(steps + 1);
  path.weight.reserve(steps + 1);

  const Operator fallback = maximally_mixed(model_.n);
  auto record_state_at = [&](long m) {
    if (rec.state_stride > 0 && m % rec.state_stride == 0) return true;
    return m == 0 || m == steps;
  };
  auto record = [&](long m) {
    path.times.push_back(st.t);
    path.x.push_back(st.x);
    path.weight.push_back(st.weight);
    if (record_state_at(m)) {
      path.state_steps.push_back(m);
      path.states.push_back(normalized_state(st, fallback));
    }
  };

  record(0);
  RngStream wiener_rng(seed, static_cast<std::uint64_t>(trajectory_index), 0);
  RngStream jump_rng(seed, static_cast<std::uint64_t>(trajectory_index), 1);
  Eigen::VectorXd dw;
  for (long m = 0; m < steps; ++m) {
    try {
      step(st, wiener_rng, jump_rng, m, &path.jumps, rec.wiener ? &dw : nullptr,
           &path.zero_intensity_steps);
    } catch (const NumericalError& err) {
      std::ostringstream os;
      os << "trajectory " << trajectory_index << " step " << m << " (t=" << m * dt_
         << "): " << err.what();
      throw NumericalError(os.str());
    }
    if (rec.wiener) path.wiener.push_back(dw);
    record(m + 1);
  }
  return path;
}

TrajectoryPath simulate_trajectory(const HybridModel& model, const ClassicalPoint& x0,
                                   const Operator& sigma0, double T, double dt, Mode mode,
                                   std::uint64_t seed, long trajectory_index,
                                   const RecordOptions& rec) {
  TrajectorySimulator sim(model, dt, mode);
  return sim.run(x0, sigma0, T, seed, trajectory_index, rec);
}

}  // namespace qctraj
