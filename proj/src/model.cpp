#include "qctraj/model.hpp"

#include "qctraj/entanglement.hpp"
#include "qctraj/rng.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>

namespace qctraj {

namespace {

constexpr Complex kI{0.0, 1.0};

/// Reads named parameters with defaults and rejects anything unknown.
class ParamReader {
 public:
  explicit ParamReader(const ModelParams& p) : p_(p) {}

  double scalar(const std::string& key, double fallback) {
    seen_scalars_.insert(key);
    auto it = p_.scalars.find(key);
    return it == p_.scalars.end() ? fallback : it->second;
  }

  std::vector<double> vector(const std::string& key, std::vector<double> fallback) {
    seen_vectors_.insert(key);
    auto it = p_.vectors.find(key);
    return it == p_.vectors.end() ? std::move(fallback) : it->second;
  }

  bool has_vector(const std::string& key) {
    seen_vectors_.insert(key);
    return p_.vectors.count(key) > 0;
  }

  void finish() const {
    std::vector<std::string> unknown;
    for (const auto& [k, v] : p_.scalars) {
      if (!seen_scalars_.count(k)) unknown.push_back(k);
    }
    for (const auto& [k, v] : p_.vectors) {
      if (!seen_vectors_.count(k)) unknown.push_back(k);
    }
    if (!unknown.empty()) {
      std::ostringstream os;
      os << "model '" << p_.name << "': unknown parameter(s):";
      for (const auto& k : unknown) os << " " << k;
      throw ConfigError(os.str());
    }
  }

 private:
  const ModelParams& p_;
  std::set<std::string> seen_scalars_, seen_vectors_;
};

void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

/// exp(i phi sigma.axis) = cos(phi) I + i sin(phi) sigma.axis, |axis| = 1.
Operator su2_exponential(double phi, const Eigen::Vector3d& axis) {
  const Operator sdota = axis(0) * pauli_x() + axis(1) * pauli_y() + axis(2) * pauli_z();
  return std::cos(phi) * identity2() + kI * std::sin(phi) * sdota;
}

Eigen::Vector3d read_axis(ParamReader& pr, const std::string& key) {
  const auto v = pr.vector(key, {1.0, 0.0, 0.0});
  require(v.size() == 3, "axis '" + key + "' must have 3 components");
  Eigen::Vector3d axis(v[0], v[1], v[2]);
  require(std::abs(axis.norm() - 1.0) <= 1e-9, "axis '" + key + "' must be a unit vector");
  return axis;
}

void constant_classical(HybridModel& m, const ClassicalPoint& c, const Eigen::MatrixXd& a,
                        const std::vector<ClassicalPoint>& g) {
  m.drift = [c](const ClassicalPoint&, ClassicalPoint& out) { out = c; };
  m.diffusion = [a](const ClassicalPoint&, Eigen::MatrixXd& out) { out = a; };
  m.displacement = [g](const ClassicalPoint&, int k, ClassicalPoint& out) { out = g[k]; };
}

void constant_quantum(HybridModel& m, const Operator& H, const std::vector<Operator>& L,
                      const std::vector<Operator>& J) {
  m.hamiltonian = [H](const ClassicalPoint&, Operator& out) { out = H; };
  m.lindblad = [L](const ClassicalPoint&, int k, Operator& out) { out = L[k]; };
  m.jump_op = [J](const ClassicalPoint&, int k, Operator& out) { out = J[k]; };
}

double operator_norm(const Operator& a) {
  return Eigen::JacobiSVD<Operator>(a).singularValues()(0);
}

/// Counting classical component: X = (N_1, ..., N_l), one unit step per jump.
void counting_classical(HybridModel& m) {
  ClassicalPoint zero = ClassicalPoint::Zero(m.s);
  std::vector<ClassicalPoint> g;
  for (int k = 0; k < m.l; ++k) {
    ClassicalPoint e = ClassicalPoint::Zero(m.s);
    e(k) = 1.0;
    g.push_back(e);
  }
  constant_classical(m, zero, Eigen::MatrixXd::Zero(m.s, 0), g);
}

Operator two_qubit_sz_hamiltonian(double omega) {
  return 0.5 * omega * (kron(pauli_z(), identity2()) + kron(identity2(), pauli_z()));
}

HybridModel build_pure_classical(const ModelParams& params) {
  ParamReader pr(params);
  const double kappa = pr.scalar("kappa", 1.0);
  const double sigma = pr.scalar("sigma", 0.5);
  const double jump_size = pr.scalar("jump_size", 1.0);
  const double lambda = pr.scalar("lambda", 1.0);
  const double ell_re = pr.scalar("ell_re", 0.3);
  const double ell_im = pr.scalar("ell_im", 0.0);
  const double jump_scale = pr.scalar("jump_scale", 0.8);
  pr.finish();
  require(lambda > 0, "pure_classical: lambda must be positive");

  HybridModel m;
  m.name = params.name;
  m.n = 1;
  m.s = 1;
  m.d = 1;
  m.l = 1;
  m.channels = {{lambda, false}};
  m.x_dep_classical = kappa != 0.0;
  m.drift = [kappa](const ClassicalPoint& x, ClassicalPoint& out) { out = -kappa * x; };
  m.diffusion = [sigma](const ClassicalPoint&, Eigen::MatrixXd& out) {
    out.setConstant(1, 1, sigma);
  };
  m.displacement = [jump_size](const ClassicalPoint&, int, ClassicalPoint& out) {
    out.setConstant(1, jump_size);
  };
  const Operator H = Operator::Zero(1, 1);
  const std::vector<Operator> L = {Complex(ell_re, ell_im) * Operator::Identity(1, 1)};
  const std::vector<Operator> J = {jump_scale * Operator::Identity(1, 1)};
  constant_quantum(m, H, L, J);
  m.box_lo = ClassicalPoint::Constant(1, -5.0);
  m.box_hi = ClassicalPoint::Constant(1, 5.0);
  m.bound_H = 0.0;
  m.bound_L = std::abs(Complex(ell_re, ell_im));
  m.bound_J = std::abs(jump_scale);
  m.scalar_params = {{"kappa", kappa},   {"sigma", sigma},         {"jump_size", jump_size},
                     {"lambda", lambda}, {"ell_re", ell_re},       {"ell_im", ell_im},
                     {"jump_scale", jump_scale}};
  return m;
}

HybridModel build_unitary_local(const ModelParams& params) {
  ParamReader pr(params);
  const double omega = pr.scalar("omega", 2.0);
  const double lambda = pr.scalar("lambda", 1.0);
  const double beta = pr.scalar("beta", 1.0);
  const double phi = pr.scalar("phi", 0.5 * std::numbers::pi);
  const int l = static_cast<int>(pr.scalar("l", 2));
  const int l1 = static_cast<int>(pr.scalar("l1", 1));
  const Eigen::Vector3d axis = read_axis(pr, "axis");
  pr.finish();
  require(lambda > 0, "unitary_local: lambda must be positive");
  require(beta != 0, "unitary_local: beta must be nonzero");
  require(l >= 1 && l1 >= 0 && l1 <= l, "unitary_local: need 0 <= l1 <= l, l >= 1");

  HybridModel m;
  m.name = params.name;
  m.n = 4;
  m.s = l;
  m.d = 0;
  m.l = l;
  m.channels.assign(l, {lambda, false});
  counting_classical(m);
  const Operator u = su2_exponential(phi, axis);
  std::vector<Operator> J;
  for (int k = 0; k < l; ++k) {
    const Operator uk = k < l1 ? kron(u, identity2()) : kron(identity2(), u);
    J.push_back(beta * uk);
  }
  constant_quantum(m, two_qubit_sz_hamiltonian(omega), {}, J);
  m.box_lo = ClassicalPoint::Zero(l);
  m.box_hi = ClassicalPoint::Constant(l, 10.0);
  m.bound_H = std::abs(omega);
  m.bound_J = std::abs(beta);
  m.scalar_params = {{"omega", omega}, {"lambda", lambda}, {"beta", beta},
                     {"phi", phi},     {"l", double(l)},   {"l1", double(l1)}};
  return m;
}

HybridModel build_unitary_nonlocal(const ModelParams& params) {
  ParamReader pr(params);
  const double omega = pr.scalar("omega", 2.0);
  const double lambda = pr.scalar("lambda", 1.0);
  const double beta = pr.scalar("beta", 1.0);
  pr.finish();
  require(lambda > 0, "unitary_nonlocal: lambda must be positive");
  require(beta != 0, "unitary_nonlocal: beta must be nonzero");

  HybridModel m;
  m.name = params.name;
  m.n = 4;
  m.s = 2;
  m.d = 0;
  m.l = 2;
  m.channels.assign(2, {lambda, false});
  counting_classical(m);
  const Operator sx1 = kron(pauli_x(), identity2());
  const Operator sx2 = kron(identity2(), pauli_x());
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const std::vector<Operator> J = {beta * inv_sqrt2 * (sx1 + kI * sx2),
                                   beta * inv_sqrt2 * (sx1 - kI * sx2)};
  constant_quantum(m, two_qubit_sz_hamiltonian(omega), {}, J);
  m.box_lo = ClassicalPoint::Zero(2);
  m.box_hi = ClassicalPoint::Constant(2, 10.0);
  m.bound_H = std::abs(omega);
  m.bound_J = std::abs(beta);
  m.scalar_params = {{"omega", omega}, {"lambda", lambda}, {"beta", beta}};
  return m;
}

HybridModel build_hidden_entanglement(const ModelParams& params) {
  ParamReader pr(params);
  const double omega = pr.scalar("omega", 2.0);
  const double lambda = pr.scalar("lambda", 1.0);
  const double beta = pr.scalar("beta", 1.0);
  const double phi = pr.scalar("phi", 0.5 * std::numbers::pi);
  const Eigen::Vector3d axis = read_axis(pr, "axis");
  pr.finish();
  require(lambda > 0, "hidden_entanglement: lambda must be positive");
  require(beta > 0, "hidden_entanglement: beta must be positive");

  HybridModel m;
  m.name = params.name;
  m.n = 4;
  m.s = 1;
  m.d = 0;
  m.l = 1;
  m.channels = {{lambda, false}};
  counting_classical(m);
  m.hamiltonian = [H = two_qubit_sz_hamiltonian(omega)](const ClassicalPoint&, Operator& out) {
    out = H;
  };
  m.lindblad = [](const ClassicalPoint&, int, Operator&) {};
  // J(x) = g(x) beta (1 (x) U) with g(0) = 1 and g(x) = 0 for x >= 1; the
  // single shot hits the second qubit only while no jump has occurred yet.
  const Operator one_u = kron(identity2(), su2_exponential(phi, axis));
  m.jump_op = [one_u, beta](const ClassicalPoint& x, int, Operator& out) {
    const double g = std::clamp(1.0 - x(0), 0.0, 1.0);
    out = (g * beta) * one_u;
  };
  m.x_dep_J = true;
  m.box_lo = ClassicalPoint::Zero(1);
  m.box_hi = ClassicalPoint::Constant(1, 5.0);
  m.bound_H = std::abs(omega);
  m.bound_J = beta;
  m.scalar_params = {{"omega", omega}, {"lambda", lambda}, {"beta", beta}, {"phi", phi}};
  return m;
}

HybridModel build_pauli_walk(const ModelParams& params) {
  ParamReader pr(params);
  const auto points = pr.vector("points", {0.0, 1.0});
  const auto targets_raw = pr.vector("targets", {1.0, 0.0});
  std::vector<double> rates_default(targets_raw.size(), 1.0);
  const auto rates = pr.vector("rates", rates_default);
  const bool has_domains = pr.has_vector("domain_lo");
  const double inf = std::numeric_limits<double>::infinity();
  const auto domain_lo = pr.vector("domain_lo", std::vector<double>(targets_raw.size(), -inf));
  const auto domain_hi = pr.vector("domain_hi", std::vector<double>(targets_raw.size(), inf));
  pr.finish();
  (void)has_domains;

  const int l = static_cast<int>(targets_raw.size());
  require(points.size() >= 1, "pauli_walk: need at least one point");
  require(l >= 1, "pauli_walk: need at least one jump type");
  require(rates.size() == size_t(l) && domain_lo.size() == size_t(l) &&
              domain_hi.size() == size_t(l),
          "pauli_walk: targets, rates and domains must have equal lengths");
  std::vector<int> targets(l);
  for (int k = 0; k < l; ++k) {
    targets[k] = static_cast<int>(targets_raw[k]);
    require(targets[k] >= 0 && targets[k] < static_cast<int>(points.size()),
            "pauli_walk: target index out of range");
    require(rates[k] > 0, "pauli_walk: rates must be positive");
    require(domain_lo[k] < domain_hi[k], "pauli_walk: empty domain interval");
  }

  HybridModel m;
  m.name = params.name;
  m.n = 1;
  m.s = 1;
  m.d = 0;
  m.l = l;
  for (int k = 0; k < l; ++k) m.channels.push_back({rates[k], false});
  m.drift = [](const ClassicalPoint&, ClassicalPoint& out) { out.setZero(1); };
  m.diffusion = [](const ClassicalPoint&, Eigen::MatrixXd& out) { out.resize(1, 0); };
  // g(x,k) = y_k - x on the domain F_k, zero elsewhere.
  m.displacement = [points, targets, domain_lo, domain_hi](const ClassicalPoint& x, int k,
                                                           ClassicalPoint& out) {
    out.resize(1);
    const bool inside = x(0) >= domain_lo[k] && x(0) < domain_hi[k];
    out(0) = inside ? points[targets[k]] - x(0) : 0.0;
  };
  m.x_dep_classical = true;
  constant_quantum(m, Operator::Zero(1, 1), {}, std::vector<Operator>(l, Operator::Identity(1, 1)));
  const double plo = *std::min_element(points.begin(), points.end());
  const double phi_ = *std::max_element(points.begin(), points.end());
  m.box_lo = ClassicalPoint::Constant(1, plo - 1.0);
  m.box_hi = ClassicalPoint::Constant(1, phi_ + 1.0);
  m.bound_J = 1.0;
  return m;
}

HybridModel build_point_mass(const ModelParams& params) {
  ParamReader pr(params);
  const double lambda = pr.scalar("lambda", 1.0);
  const auto x0 = pr.vector("x0", {1.0});
  pr.finish();
  require(lambda > 0, "point_mass: lambda must be positive");
  const int s = static_cast<int>(x0.size());
  require(s >= 1, "point_mass: x0 must be nonempty");

  HybridModel m;
  m.name = params.name;
  m.n = 1;
  m.s = s;
  m.d = 0;
  m.l = 1;
  m.channels = {{lambda, false}};
  ClassicalPoint target = Eigen::Map<const ClassicalPoint>(x0.data(), s);
  m.drift = [s](const ClassicalPoint&, ClassicalPoint& out) { out.setZero(s); };
  m.diffusion = [s](const ClassicalPoint&, Eigen::MatrixXd& out) { out.resize(s, 0); };
  m.displacement = [target](const ClassicalPoint& x, int, ClassicalPoint& out) {
    out = target - x;
  };
  m.x_dep_classical = true;
  constant_quantum(m, Operator::Zero(1, 1), {}, {Operator::Identity(1, 1)});
  m.box_lo = target.array() - 2.0;
  m.box_hi = target.array() + 2.0;
  m.bound_J = 1.0;
  m.scalar_params = {{"lambda", lambda}};
  return m;
}

std::mutex g_registry_mutex;
std::map<std::string, std::function<HybridModel(const ModelParams&)>>& registry() {
  static std::map<std::string, std::function<HybridModel(const ModelParams&)>> r = {
      {"pure_classical", build_pure_classical},
      {"unitary_local", build_unitary_local},
      {"unitary_nonlocal", build_unitary_nonlocal},
      {"hidden_entanglement", build_hidden_entanglement},
      {"pauli_walk", build_pauli_walk},
      {"point_mass", build_point_mass},
  };
  return r;
}

}  // namespace

double HybridModel::max_rate() const {
  double m = 0.0;
  for (const auto& ch : channels) m = std::max(m, ch.rate);
  return m;
}

std::vector<std::string> builtin_model_names() {
  std::lock_guard lock(g_registry_mutex);
  std::vector<std::string> names;
  for (const auto& [k, v] : registry()) names.push_back(k);
  return names;
}

void register_model(const std::string& name,
                    std::function<HybridModel(const ModelParams&)> builder) {
  std::lock_guard lock(g_registry_mutex);
  registry()[name] = std::move(builder);
}

HybridModel build_model(const ModelParams& params) {
  std::function<HybridModel(const ModelParams&)> builder;
  {
    std::lock_guard lock(g_registry_mutex);
    auto it = registry().find(params.name);
    if (it == registry().end()) {
      std::ostringstream os;
      os << "unknown model '" << params.name << "'; available:";
      for (const auto& [k, v] : registry()) os << " " << k;
      throw ConfigError(os.str());
    }
    builder = it->second;
  }
  HybridModel m = builder(params);
  if (m.box_lo.size() != m.s || m.box_hi.size() != m.s) {
    m.box_lo = ClassicalPoint::Constant(m.s, -1.0);
    m.box_hi = ClassicalPoint::Constant(m.s, 1.0);
  }
  return m;
}

CoefficientBundle eval_coefficients(const HybridModel& model, const ClassicalPoint& x) {
  if (x.size() != model.s) {
    throw DimensionError("eval_coefficients: x has length " + std::to_string(x.size()) +
                         ", expected " + std::to_string(model.s));
  }
  if (!x.allFinite()) {
    throw NumericalError("eval_coefficients: non-finite classical point");
  }
  CoefficientBundle b;
  model.drift(x, b.c);
  model.diffusion(x, b.a);
  b.g.resize(model.l);
  b.J.resize(model.l);
  for (int k = 0; k < model.l; ++k) {
    model.displacement(x, k, b.g[k]);
    model.jump_op(x, k, b.J[k]);
  }
  model.hamiltonian(x, b.H);
  b.L.resize(model.d);
  for (int k = 0; k < model.d; ++k) model.lindblad(x, k, b.L[k]);

  b.K = kI * b.H;
  for (const auto& L : b.L) b.K += 0.5 * L.adjoint() * L;
  for (int k = 0; k < model.l; ++k) {
    b.K += 0.5 * model.channels[k].rate * b.J[k].adjoint() * b.J[k];
  }

  bool finite = b.c.allFinite() && b.a.allFinite() && b.H.allFinite() && b.K.allFinite();
  for (const auto& g : b.g) finite = finite && g.allFinite();
  for (const auto& L : b.L) finite = finite && L.allFinite();
  for (const auto& J : b.J) finite = finite && J.allFinite();
  if (!finite) {
    throw NumericalError("eval_coefficients: model '" + model.name +
                         "' returned non-finite coefficients");
  }
  return b;
}

void validate_model(const HybridModel& model, std::uint64_t seed, int samples) {
  RngStream rng(seed, 0, 0);
  const double slack = 1e-9;
  for (int i = 0; i < samples; ++i) {
    ClassicalPoint x(model.s);
    for (int j = 0; j < model.s; ++j) {
      x(j) = model.box_lo(j) + (model.box_hi(j) - model.box_lo(j)) * rng.uniform();
    }
    const CoefficientBundle b = eval_coefficients(model, x);
    require_hermitian(b.H, "validate_model: H(x) for '" + model.name + "'");
    if (model.bound_H > 0 && operator_norm(b.H) > model.bound_H + slack) {
      throw NumericalError("validate_model: '" + model.name + "' exceeds declared bound on H");
    }
    for (const auto& L : b.L) {
      if (model.bound_L > 0 && operator_norm(L) > model.bound_L + slack) {
        throw NumericalError("validate_model: '" + model.name + "' exceeds declared bound on L");
      }
    }
    for (const auto& J : b.J) {
      if (model.bound_J > 0 && operator_norm(J) > model.bound_J + slack) {
        throw NumericalError("validate_model: '" + model.name + "' exceeds declared bound on J");
      }
    }
  }
}

}  // namespace qctraj
