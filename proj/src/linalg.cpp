#include "qctraj/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace qctraj {

double hermiticity_defect(const Operator& a) {
  const double scale = std::max(1.0, a.norm());
  return (a - a.adjoint()).norm() / scale;
}

bool is_hermitian(const Operator& a, double rel_tol) {
  return a.rows() == a.cols() && hermiticity_defect(a) <= rel_tol;
}

void require_hermitian(const Operator& a, const std::string& what, double rel_tol) {
  if (a.rows() != a.cols()) {
    throw DimensionError(what + ": matrix is not square");
  }
  if (!a.allFinite()) {
    throw NumericalError(what + ": non-finite entries");
  }
  const double defect = hermiticity_defect(a);
  if (defect > rel_tol) {
    throw NumericalError(what + ": Hermiticity defect " + std::to_string(defect) +
                         " exceeds tolerance " + std::to_string(rel_tol));
  }
}

void require_same_dim(const Operator& a, const Operator& b, const std::string& what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(what + ": dimension mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

double min_eigenvalue(const Operator& a) {
  Eigen::SelfAdjointEigenSolver<Operator> es(hermitize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double second_eigenvalue(const Operator& a) {
  Eigen::SelfAdjointEigenSolver<Operator> es(hermitize(a), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();  // ascending
  const int n = static_cast<int>(ev.size());
  if (n < 2) return 0.0;
  const double tr = ev.sum();
  const double second = ev(n - 2);
  return tr > 0 ? second / tr : second;
}

Operator maximally_mixed(int n) {
  return Operator::Identity(n, n) / static_cast<double>(n);
}

DensityState DensityState::from(const Operator& sigma, double tol_herm) {
  require_hermitian(sigma, "DensityState", tol_herm);
  DensityState st;
  st.sigma = sigma;
  st.trace = sigma.trace().real();
  return st;
}

Operator normalize(const DensityState& state, const Operator& fallback) {
  require_hermitian(state.sigma, "normalize: sigma");
  require_hermitian(fallback, "normalize: fallback");
  require_same_dim(state.sigma, fallback, "normalize");
  const double fb_trace = fallback.trace().real();
  if (std::abs(fb_trace - 1.0) > 1e-9 || min_eigenvalue(fallback) < -tol::psd) {
    throw NumericalError("normalize: fallback is not a statistical operator");
  }
  if (!(state.trace > tol::eps_weight)) {
    return fallback;
  }
  Eigen::SelfAdjointEigenSolver<Operator> es(hermitize(state.sigma / state.trace));
  Eigen::VectorXd ev = es.eigenvalues();
  const double lo = ev.minCoeff();
  if (lo < -tol::psd) {
    throw NumericalError("normalize: eigenvalue " + std::to_string(lo) +
                         " below -tol_psd, state is not positive semidefinite");
  }
  ev = ev.cwiseMax(0.0);
  const double total = ev.sum();
  if (!(total > tol::eps_weight)) {
    return fallback;
  }
  ev /= total;
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

double trace_distance(const Operator& a, const Operator& b) {
  require_same_dim(a, b, "trace_distance");
  require_hermitian(a, "trace_distance: a");
  require_hermitian(b, "trace_distance: b");
  Eigen::SelfAdjointEigenSolver<Operator> es(hermitize(a - b), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double purity_of(const Operator& rho) {
  const double tr = rho.trace().real();
  if (!(tr > 0)) {
    throw NumericalError("purity_of: nonpositive trace");
  }
  const Operator r = rho / tr;
  return (r * r).trace().real();
}

StateVector dominant_eigenvector(const Operator& rho, double purity_tol) {
  Eigen::SelfAdjointEigenSolver<Operator> es(hermitize(rho));
  const auto& ev = es.eigenvalues();
  const int n = static_cast<int>(ev.size());
  const double tr = ev.sum();
  if (!(tr > 0)) {
    throw NumericalError("dominant_eigenvector: nonpositive trace");
  }
  if (n >= 2 && ev(n - 2) / tr > purity_tol) {
    throw NumericalError("dominant_eigenvector: state is not pure, second eigenvalue " +
                         std::to_string(ev(n - 2) / tr));
  }
  return es.eigenvectors().col(n - 1);
}

Operator kron(const Operator& a, const Operator& b) {
  Operator out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace qctraj
