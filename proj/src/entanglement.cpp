#include "qctraj/entanglement.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace qctraj {

namespace {
constexpr Complex kI{0.0, 1.0};
}

Operator pauli_x() {
  Operator m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Operator pauli_y() {
  Operator m(2, 2);
  m << 0, -kI, kI, 0;
  return m;
}

Operator pauli_z() {
  Operator m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

Operator identity2() { return Operator::Identity(2, 2); }

Operator spin_flip() { return kron(pauli_y(), pauli_y()); }

Complex chi(const StateVector& phi) {
  if (phi.size() != 4) {
    throw DimensionError("chi: expected a two-qubit vector of length 4");
  }
  if (!phi.allFinite()) {
    throw NumericalError("chi: non-finite entries");
  }
  return 2.0 * (phi(2) * phi(1) - phi(3) * phi(0));
}

double concurrence_pure(const StateVector& phi) {
  if (std::abs(phi.norm() - 1.0) > 1e-9) {
    throw NumericalError("concurrence_pure: vector is not normalized");
  }
  return std::abs(chi(phi));
}

double concurrence_mixed(const Operator& rho) {
  if (rho.rows() != 4 || rho.cols() != 4) {
    throw DimensionError("concurrence_mixed: expected a 4x4 state");
  }
  require_hermitian(rho, "concurrence_mixed");
  if (std::abs(rho.trace().real() - 1.0) > 1e-8 || min_eigenvalue(rho) < -tol::psd) {
    throw NumericalError("concurrence_mixed: input is not a statistical operator");
  }
  const Operator flip = spin_flip();
  const Operator r = rho * flip * rho.conjugate() * flip;
  Eigen::ComplexEigenSolver<Operator> es(r);
  Eigen::Vector4d mu;
  for (int i = 0; i < 4; ++i) {
    // Eigenvalues of r are real and nonnegative up to roundoff.
    mu(i) = std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
  }
  std::sort(mu.data(), mu.data() + 4, std::greater<double>());
  return std::max(0.0, mu(0) - mu(1) - mu(2) - mu(3));
}

double concurrence_of_pure_density(const Operator& rho, double purity_tol) {
  if (rho.rows() != 4 || rho.cols() != 4) {
    throw DimensionError("concurrence_of_pure_density: expected a 4x4 state");
  }
  const double tr = rho.trace().real();
  if (!(tr > 0)) throw NumericalError("concurrence_of_pure_density: nonpositive trace");
  const Operator r = rho / tr;
  const double defect = 0.5 * (1.0 - (r * r).trace().real());
  if (defect > purity_tol) {
    throw NumericalError("concurrence_of_pure_density: purity defect " +
                         std::to_string(defect) + " exceeds tolerance");
  }
  const Operator flip = spin_flip();
  const double chi_sq = (r * flip * r.conjugate() * flip).trace().real();
  return std::sqrt(std::max(0.0, chi_sq));
}

}  // namespace qctraj
