#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace qctraj {

using Complex = std::complex<double>;
using Operator = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;
using ClassicalPoint = Eigen::VectorXd;

/// Tolerances shared across the library. They are sized for double
/// precision accumulated over ~1e4 fixed-step updates.
namespace tol {
inline constexpr double herm = 1e-9;            // relative Frobenius Hermiticity defect
inline constexpr double psd = 1e-8;             // eigenvalues below -psd are a hard error
inline constexpr double eps_weight = 1e-12;     // traces below this use the fallback state
inline constexpr double eps_intensity = 1e-12;  // jump intensities treated as zero
inline constexpr double purity = 1e-6;          // admissible second eigenvalue of a pure state
}  // namespace tol

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline Operator hermitize(const Operator& a) { return 0.5 * (a + a.adjoint()); }

/// ‖a - a†‖_F / max(1, ‖a‖_F)
double hermiticity_defect(const Operator& a);

bool is_hermitian(const Operator& a, double rel_tol = tol::herm);

void require_hermitian(const Operator& a, const std::string& what, double rel_tol = tol::herm);

void require_same_dim(const Operator& a, const Operator& b, const std::string& what);

/// Smallest eigenvalue of a Hermitian operator.
double min_eigenvalue(const Operator& a);

/// Second largest eigenvalue of a Hermitian operator, scaled by 1/trace
/// when the trace is positive. Used as the purity defect of a state.
double second_eigenvalue(const Operator& a);

Operator maximally_mixed(int n);

/// An (optionally unnormalized) quantum state together with its trace.
struct DensityState {
  Operator sigma;
  double trace = 0.0;

  /// Validates Hermiticity and records the trace. Throws NumericalError on a
  /// Hermiticity defect beyond tol_herm or a non-finite entry.
  static DensityState from(const Operator& sigma, double tol_herm = tol::herm);
};

/// sigma/trace when the trace exceeds eps_weight, otherwise the fallback
/// state. Eigenvalues in (-tol_psd, 0) are clipped to zero and the result is
/// renormalized; anything below -tol_psd is a hard error.
Operator normalize(const DensityState& state, const Operator& fallback);

/// Half the sum of the absolute eigenvalues of (a - b); both Hermitian.
double trace_distance(const Operator& a, const Operator& b);

/// tr(rho^2) of the trace-normalized operator; equals 1 for pure states.
double purity_of(const Operator& rho);

/// Dominant eigenvector of a state that is pure up to `purity_tol` on its
/// second eigenvalue. Throws NumericalError for genuinely mixed input.
StateVector dominant_eigenvector(const Operator& rho, double purity_tol = tol::purity);

/// Kronecker product of dense complex matrices.
Operator kron(const Operator& a, const Operator& b);

}  // namespace qctraj
