#pragma once

#include "qctraj/ensemble.hpp"
#include "qctraj/model.hpp"

#include <json.hpp>

namespace qctraj {

/// Coefficient bundle frozen at one classical point, acting as a quantum
/// Liouville operator.
class Liouvillian {
 public:
  Liouvillian(Operator H, std::vector<Operator> L, std::vector<Operator> J,
              std::vector<double> rates);

  int dim() const { return static_cast<int>(H_.rows()); }

  /// Schroedinger picture: L*[rho] = -i[H,rho] + sum(L rho L' - {L'L,rho}/2)
  /// + sum lambda_k (J rho J' - {J'J,rho}/2). Trace free.
  void apply_preadjoint(const Operator& rho, Operator& out) const;
  Operator preadjoint(const Operator& rho) const;

  /// Heisenberg picture L[a].
  Operator heisenberg(const Operator& a) const;
  /// Heisenberg picture without the jump gain term: L[a] - sum lambda J'aJ.
  Operator heisenberg_tilde(const Operator& a) const;

  /// Spectral radius estimate of the vectorized generator by power iteration.
  double norm_estimate(int iterations = 80) const;

  const Operator& H() const { return H_; }
  const std::vector<Operator>& L() const { return L_; }
  const std::vector<Operator>& J() const { return J_; }
  const std::vector<double>& rates() const { return rates_; }

 private:
  Operator H_;
  std::vector<Operator> L_, J_;
  std::vector<double> rates_;
  std::vector<Operator> LdagL_, JdagJ_;
};

Liouvillian freeze_liouvillian(const HybridModel& model, const ClassicalPoint& x);

/// One classical RK4 step of d rho/dt = L*[rho].
Operator lindblad_step(const Liouvillian& liou, const Operator& rho, double h);

/// RK4 integration with fixed step h = min(h_config, 0.01/||L||). Preserves
/// the trace within 1e-9 (trace drift beyond that aborts as a step-size
/// instability) and positivity within tol_psd.
Operator lindblad_solve(const Liouvillian& liou, const Operator& rho0, double T,
                        double h_config = 0.01);

/// Master-equation solution for the mean state of an x-independent model.
/// Refuses models whose quantum coefficients depend on x (the mean-state
/// equation is not closed there).
Operator a_priori_solution(const HybridModel& model, const Operator& rho0, double T,
                           double h_config = 0.01);

/// A twice differentiable scalar function paired with an observable, i.e. a
/// product element a (x) f of the hybrid observable algebra.
struct TestFunction {
  std::function<Complex(const ClassicalPoint&)> f;
  std::function<Eigen::VectorXcd(const ClassicalPoint&)> grad;
  std::function<Eigen::MatrixXcd(const ClassicalPoint&)> hess;
  Operator a;
  std::string label;
};

TestFunction tf_observable(const Operator& a);                       // f == 1
TestFunction tf_plane_wave(const Eigen::VectorXd& k, const Operator& a);
TestFunction tf_gaussian(const ClassicalPoint& center, double width, const Operator& a);
TestFunction tf_quadratic(const Operator& a);                        // f = |x|^2 (pointwise use)

/// Generator of the classical Markov process applied to f at x:
/// grad f . c + (1/2) sum_k (a a^T) : hess f
/// + sum_k lambda_k (f(x + g_k) - f(x) - [compensated] grad f . g_k).
Complex classical_generator(const HybridModel& model, const TestFunction& F,
                            const ClassicalPoint& x);

/// <rho, K[a (x) f](x)> for the hybrid generator with finite jump sums.
Complex hybrid_generator(const HybridModel& model, const TestFunction& F, const Operator& rho,
                         const ClassicalPoint& x);

struct CheckReport {
  std::string name;
  double estimate = 0.0;
  double stderr_ = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  nlohmann::json details;
};

nlohmann::json to_json(const CheckReport& report);

struct GeneratorCheckPoint {
  double dt = 0.0;
  Complex derivative;   // (E[<sigma_dt, F(X_dt)>] - <rho, F(x)>)/dt
  double stderr_ = 0.0;
  Complex deviation;    // derivative - analytic generator value
};

struct GeneratorCheckReport {
  Complex analytic;
  std::vector<GeneratorCheckPoint> points;
  Complex fitted_slope;  // deviation ~ slope * dt
  bool pass = false;
  nlohmann::json to_json() const;
};

/// Estimates the weak derivative of the semigroup at t=0 by one-step
/// simulation and checks it against hybrid_generator within
/// 3*stderr + fitted O(dt).
GeneratorCheckReport generator_consistency_check(const HybridModel& model,
                                                 const TestFunction& F, const Operator& rho,
                                                 const ClassicalPoint& x,
                                                 const std::vector<double>& dt_list, long N,
                                                 std::uint64_t seed = 0);

struct InstrumentEstimate {
  BinSpec bins;
  std::vector<double> value;    // E_Q[tr(sigma_t a) 1_E(X(t))] per bin
  std::vector<double> stderr_;
  double overflow = 0.0;
  double overflow_stderr = 0.0;
  long samples = 0;
  double total() const;
};

/// Monte Carlo estimate of the transition instrument over a bin partition.
/// Throws when more than 1% of the (a = identity) mass lands in the overflow
/// cell, which signals a misconfigured box.
InstrumentEstimate estimate_instrument(const HybridModel& model, const ClassicalPoint& x,
                                       double t, double dt, const Operator& rho,
                                       const Operator& a, const BinSpec& bins, long N,
                                       std::uint64_t seed = 0);

/// Data-driven default bins: 32 per coordinate over the min/max of a pilot
/// run widened by 10%.
BinSpec default_bins(const HybridModel& model, const ClassicalPoint& x, double t, double dt,
                     long pilot = 256, std::uint64_t seed = 0, int per_axis = 32);

/// Composition law check: the direct t+t' instrument against the
/// bin-discretized composition of the t' and t legs. The discretization
/// contribution is bounded empirically by doubling the intermediate bins.
CheckReport chapman_kolmogorov_check(const HybridModel& model, const ClassicalPoint& x,
                                     double t, double tprime, double dt, const Operator& rho,
                                     const Operator& a, const BinSpec& bins, long N,
                                     std::uint64_t seed = 0);

struct ComplexEstimate {
  Complex value;
  double stderr_ = 0.0;
};

/// E_Q[tr(sigma_t a) exp(i k . X(t))], the Fourier transform of the
/// transition instrument.
ComplexEstimate characteristic_operator(const HybridModel& model, const ClassicalPoint& x,
                                        double t, double dt, const Operator& rho,
                                        const Operator& a, const Eigen::VectorXd& k, long N,
                                        std::uint64_t seed = 0);

}  // namespace qctraj
