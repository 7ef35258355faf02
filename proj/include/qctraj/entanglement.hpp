#pragma once

#include "qctraj/linalg.hpp"

namespace qctraj {

// Two-qubit basis convention: |q1 q2> maps to index 2*q1 + q2, |0> = (1,0).

Operator pauli_x();
Operator pauli_y();
Operator pauli_z();
Operator identity2();

/// sigma_y (x) sigma_y, the spin-flip matrix entering the concurrence.
Operator spin_flip();

/// chi(phi) = <T phi | sigma_y(x)sigma_y phi> = 2(phi_10 phi_01 - phi_11 phi_00),
/// where T conjugates the coefficients in the computational basis.
/// Satisfies chi((A(x)B) phi) = det(A) det(B) chi(phi).
Complex chi(const StateVector& phi);

/// |chi(phi)| for a normalized two-qubit vector. Throws on vectors whose norm
/// deviates from 1 by more than 1e-9.
double concurrence_pure(const StateVector& phi);

/// Wootters closed form: max(0, mu1 - mu2 - mu3 - mu4) with mu_i the
/// decreasingly sorted square roots of the eigenvalues of
/// rho (sy(x)sy) conj(rho) (sy(x)sy). Input must be a valid 4x4 state.
double concurrence_mixed(const Operator& rho);

/// |chi| of a pure state given as a density operator, via
/// |chi|^2 = tr(rho Y conj(rho) Y) with Y the spin flip. Avoids the phase
/// ambiguity of extracting an eigenvector. Throws when the purity defect
/// (1 - tr rho^2)/2 exceeds purity_tol.
double concurrence_of_pure_density(const Operator& rho, double purity_tol = tol::purity);

}  // namespace qctraj
