#pragma once

#include "qctraj/linalg.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace qctraj {

/// One jump type: intensity of the driving Poisson process and whether its
/// classical displacement is compensated (mean subtracted) in the drift.
struct JumpChannel {
  double rate = 1.0;
  bool compensated = false;
};

/// All coefficients of a hybrid model evaluated at one classical point,
/// together with the derived drift operator K = iH + (1/2) sum L'L
/// + (1/2) sum lambda_k J'J.
struct CoefficientBundle {
  ClassicalPoint c;                 // drift, length s
  Eigen::MatrixXd a;                // diffusion, s x d
  std::vector<ClassicalPoint> g;    // jump displacements, l entries of length s
  Operator H;                       // Hamiltonian, n x n
  std::vector<Operator> L;          // Lindblad operators, d entries
  std::vector<Operator> J;          // jump operators, l entries
  Operator K;
};

/// A hybrid quantum/classical model: a quantum system of dimension n coupled
/// to a classical point in R^s through d Wiener channels and l jump types.
/// All coefficient callbacks must be pure functions of x; models are
/// immutable after construction and safe to evaluate concurrently.
struct HybridModel {
  std::string name;
  int n = 1;  // Hilbert dimension
  int s = 1;  // classical dimension
  int d = 0;  // Wiener channels
  int l = 0;  // jump types
  std::vector<JumpChannel> channels;

  std::function<void(const ClassicalPoint&, ClassicalPoint&)> drift;           // c(x)
  std::function<void(const ClassicalPoint&, Eigen::MatrixXd&)> diffusion;      // a(x)
  std::function<void(const ClassicalPoint&, int, ClassicalPoint&)> displacement;  // g(x,k)
  std::function<void(const ClassicalPoint&, Operator&)> hamiltonian;           // H(x)
  std::function<void(const ClassicalPoint&, int, Operator&)> lindblad;         // L_k(x)
  std::function<void(const ClassicalPoint&, int, Operator&)> jump_op;          // J_k(x)

  // x-dependence flags; false enables coefficient caching in the engine.
  bool x_dep_classical = false;
  bool x_dep_H = false;
  bool x_dep_L = false;
  bool x_dep_J = false;

  // Sampling box and declared sup-norm bounds for the random spot checks.
  ClassicalPoint box_lo, box_hi;
  double bound_H = 0.0, bound_L = 0.0, bound_J = 0.0;

  std::map<std::string, double> scalar_params;  // resolved parameter echo

  bool quantum_x_independent() const { return !x_dep_H && !x_dep_L && !x_dep_J; }
  double max_rate() const;
};

/// Model selection: a builtin (or registered) name plus named parameters.
struct ModelParams {
  std::string name;
  std::map<std::string, double> scalars;
  std::map<std::string, std::vector<double>> vectors;
};

/// Builds one of the built-in models:
///   pure_classical, unitary_local, unitary_nonlocal, hidden_entanglement,
///   pauli_walk, point_mass
/// or a registered user model. Throws ConfigError on unknown names or
/// parameters out of range.
HybridModel build_model(const ModelParams& params);

std::vector<std::string> builtin_model_names();

/// Registers a user model builder under a name (boundedness obligations are
/// the caller's; they are only spot-checked by validate_model).
void register_model(const std::string& name,
                    std::function<HybridModel(const ModelParams&)> builder);

/// Evaluates every coefficient of the model at x, including the derived K.
/// Throws NumericalError if any evaluation returns non-finite values.
CoefficientBundle eval_coefficients(const HybridModel& model, const ClassicalPoint& x);

/// Spot-checks Hermiticity of H, finiteness of all coefficients and the
/// declared sup-norm bounds on `samples` random points of the model box.
void validate_model(const HybridModel& model, std::uint64_t seed = 0, int samples = 100);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qctraj
