#include "qctraj/semigroup.hpp"

#include "qctraj/rng.hpp"

#include <cmath>
#include <numbers>

namespace qctraj {

namespace {

constexpr Complex kI{0.0, 1.0};
constexpr int kBatches = EnsembleAccumulator::kDefaultBatches;

int batch_of(long i, long n, int batches = kBatches) {
  const long chunk = (n + batches - 1) / batches;
  return static_cast<int>(i / chunk);
}

struct BatchMean {
  std::vector<double> sum;
  std::vector<long> cnt;
  explicit BatchMean(int b = kBatches) : sum(b, 0.0), cnt(b, 0) {}
  void add(int b, double v) {
    sum[b] += v;
    ++cnt[b];
  }
  Estimate estimate() const {
    double total = 0.0;
    long n = 0;
    for (size_t b = 0; b < sum.size(); ++b) {
      total += sum[b];
      n += cnt[b];
    }
    if (n == 0) return {0.0, 0.0};
    const double mean = total / n;
    double var = 0.0;
    int used = 0;
    for (size_t b = 0; b < sum.size(); ++b) {
      if (cnt[b] == 0) continue;
      const double d = sum[b] / cnt[b] - mean;
      var += d * d;
      ++used;
    }
    const double se =
        used >= 2 ? std::sqrt(var / (static_cast<double>(used) * (used - 1))) : 0.0;
    return {mean, se};
  }
};

/// Steps a trajectory to the horizon without recording a path.
TrajectoryState propagate(TrajectorySimulator& sim, const ClassicalPoint& x0,
                          const Operator& sigma0, long steps, std::uint64_t seed,
                          long trajectory_index) {
  TrajectoryState st = sim.make_state(x0, sigma0);
  RngStream wiener(seed, static_cast<std::uint64_t>(trajectory_index), 0);
  RngStream jumps(seed, static_cast<std::uint64_t>(trajectory_index), 1);
  for (long m = 0; m < steps; ++m) sim.step(st, wiener, jumps, m);
  return st;
}

long steps_for(double T, double dt) {
  const long steps = std::lround(T / dt);
  if (std::abs(steps * dt - T) > 1e-9 * std::max(1.0, T)) {
    throw ConfigError("dt does not divide the horizon");
  }
  return steps;
}

}  // namespace

Liouvillian::Liouvillian(Operator H, std::vector<Operator> L, std::vector<Operator> J,
                         std::vector<double> rates)
    : H_(std::move(H)), L_(std::move(L)), J_(std::move(J)), rates_(std::move(rates)) {
  require_hermitian(H_, "Liouvillian: H");
  if (J_.size() != rates_.size()) {
    throw DimensionError("Liouvillian: one rate per jump operator required");
  }
  for (const auto& L : L_) LdagL_.push_back(L.adjoint() * L);
  for (const auto& J : J_) JdagJ_.push_back(J.adjoint() * J);
}

void Liouvillian::apply_preadjoint(const Operator& rho, Operator& out) const {
  out.noalias() = -kI * (H_ * rho - rho * H_);
  for (size_t k = 0; k < L_.size(); ++k) {
    out.noalias() += L_[k] * rho * L_[k].adjoint();
    out.noalias() -= 0.5 * (LdagL_[k] * rho + rho * LdagL_[k]);
  }
  for (size_t k = 0; k < J_.size(); ++k) {
    out.noalias() += rates_[k] * (J_[k] * rho * J_[k].adjoint());
    out.noalias() -= 0.5 * rates_[k] * (JdagJ_[k] * rho + rho * JdagJ_[k]);
  }
}

Operator Liouvillian::preadjoint(const Operator& rho) const {
  Operator out(dim(), dim());
  apply_preadjoint(rho, out);
  return out;
}

Operator Liouvillian::heisenberg_tilde(const Operator& a) const {
  Operator out = kI * (H_ * a - a * H_);
  for (size_t k = 0; k < L_.size(); ++k) {
    out.noalias() += L_[k].adjoint() * a * L_[k];
    out.noalias() -= 0.5 * (LdagL_[k] * a + a * LdagL_[k]);
  }
  for (size_t k = 0; k < J_.size(); ++k) {
    out.noalias() -= 0.5 * rates_[k] * (JdagJ_[k] * a + a * JdagJ_[k]);
  }
  return out;
}

Operator Liouvillian::heisenberg(const Operator& a) const {
  Operator out = heisenberg_tilde(a);
  for (size_t k = 0; k < J_.size(); ++k) {
    out.noalias() += rates_[k] * (J_[k].adjoint() * a * J_[k]);
  }
  return out;
}

double Liouvillian::norm_estimate(int iterations) const {
  const int n = dim();
  RngStream rng(0x51D3, 0, 2);
  Operator y(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) y(i, j) = Complex(rng.normal(), rng.normal());
  }
  y = hermitize(y);
  y /= y.norm();
  Operator z(n, n);
  double growth = 0.0;
  for (int it = 0; it < iterations; ++it) {
    apply_preadjoint(y, z);
    growth = z.norm();
    if (growth < 1e-300) return 0.0;
    y = z / growth;
  }
  return growth;
}

Liouvillian freeze_liouvillian(const HybridModel& model, const ClassicalPoint& x) {
  CoefficientBundle b = eval_coefficients(model, x);
  std::vector<double> rates;
  for (const auto& ch : model.channels) rates.push_back(ch.rate);
  return Liouvillian(std::move(b.H), std::move(b.L), std::move(b.J), std::move(rates));
}

Operator lindblad_step(const Liouvillian& liou, const Operator& rho, double h) {
  const Operator k1 = liou.preadjoint(rho);
  const Operator k2 = liou.preadjoint(rho + 0.5 * h * k1);
  const Operator k3 = liou.preadjoint(rho + 0.5 * h * k2);
  const Operator k4 = liou.preadjoint(rho + h * k3);
  return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Operator lindblad_solve(const Liouvillian& liou, const Operator& rho0, double T,
                        double h_config) {
  require_hermitian(rho0, "lindblad_solve: rho0");
  if (T < 0) throw ConfigError("lindblad_solve: negative horizon");
  if (T == 0) return rho0;
  double h = h_config;
  const double norm = liou.norm_estimate();
  if (norm > 0) h = std::min(h, 0.01 / norm);
  const long steps = static_cast<long>(std::ceil(T / h - 1e-12));
  h = T / static_cast<double>(steps);
  const double tr0 = rho0.trace().real();
  Operator rho = rho0;
  for (long m = 0; m < steps; ++m) {
    rho = lindblad_step(liou, rho, h);
    if (std::abs(rho.trace().real() - tr0) > 1e-9 * std::max(1.0, std::abs(tr0))) {
      throw NumericalError("lindblad_solve: trace drift at step " + std::to_string(m) +
                           ", step size unstable");
    }
  }
  rho = hermitize(rho);
  if (min_eigenvalue(rho) < -tol::psd) {
    throw NumericalError("lindblad_solve: solution lost positivity");
  }
  return rho;
}

Operator a_priori_solution(const HybridModel& model, const Operator& rho0, double T,
                           double h_config) {
  if (!model.quantum_x_independent()) {
    throw NumericalError("a_priori_solution: model '" + model.name +
                         "' has x-dependent quantum coefficients; "
                         "the mean-state equation is not closed");
  }
  const ClassicalPoint x = 0.5 * (model.box_lo + model.box_hi);
  return lindblad_solve(freeze_liouvillian(model, x), rho0, T, h_config);
}

TestFunction tf_observable(const Operator& a) {
  TestFunction F;
  F.a = a;
  F.label = "constant";
  F.f = [](const ClassicalPoint&) { return Complex{1.0, 0.0}; };
  F.grad = [](const ClassicalPoint& x) { return Eigen::VectorXcd::Zero(x.size()).eval(); };
  F.hess = [](const ClassicalPoint& x) {
    return Eigen::MatrixXcd::Zero(x.size(), x.size()).eval();
  };
  return F;
}

TestFunction tf_plane_wave(const Eigen::VectorXd& k, const Operator& a) {
  TestFunction F;
  F.a = a;
  F.label = "plane_wave";
  F.f = [k](const ClassicalPoint& x) { return std::exp(kI * k.dot(x)); };
  F.grad = [k](const ClassicalPoint& x) {
    return (kI * std::exp(kI * k.dot(x)) * k.cast<Complex>()).eval();
  };
  F.hess = [k](const ClassicalPoint& x) {
    const Complex f = std::exp(kI * k.dot(x));
    return (-f * (k * k.transpose()).cast<Complex>()).eval();
  };
  return F;
}

TestFunction tf_gaussian(const ClassicalPoint& center, double width, const Operator& a) {
  TestFunction F;
  F.a = a;
  F.label = "gaussian";
  const double w2 = width * width;
  F.f = [center, w2](const ClassicalPoint& x) {
    return Complex{std::exp(-0.5 * (x - center).squaredNorm() / w2), 0.0};
  };
  F.grad = [center, w2](const ClassicalPoint& x) {
    const double f = std::exp(-0.5 * (x - center).squaredNorm() / w2);
    return ((-f / w2) * (x - center).cast<Complex>()).eval();
  };
  F.hess = [center, w2](const ClassicalPoint& x) {
    const double f = std::exp(-0.5 * (x - center).squaredNorm() / w2);
    const Eigen::VectorXd d = x - center;
    Eigen::MatrixXd h = f * (d * d.transpose() / (w2 * w2) -
                             Eigen::MatrixXd::Identity(x.size(), x.size()) / w2);
    return h.cast<Complex>().eval();
  };
  return F;
}

TestFunction tf_quadratic(const Operator& a) {
  TestFunction F;
  F.a = a;
  F.label = "quadratic";
  F.f = [](const ClassicalPoint& x) { return Complex{x.squaredNorm(), 0.0}; };
  F.grad = [](const ClassicalPoint& x) { return (2.0 * x.cast<Complex>()).eval(); };
  F.hess = [](const ClassicalPoint& x) {
    return (2.0 * Eigen::MatrixXcd::Identity(x.size(), x.size())).eval();
  };
  return F;
}

Complex classical_generator(const HybridModel& model, const TestFunction& F,
                            const ClassicalPoint& x) {
  const CoefficientBundle b = eval_coefficients(model, x);
  const Eigen::VectorXcd grad = F.grad(x);
  const Eigen::MatrixXcd hess = F.hess(x);
  // Plain (unconjugated) contraction of the gradient with the drift.
  Complex out = (grad.transpose() * b.c.cast<Complex>())(0);
  const Eigen::MatrixXd diff = b.a * b.a.transpose();
  out += 0.5 * (hess.cwiseProduct(diff.cast<Complex>())).sum();
  const Complex fx = F.f(x);
  for (int k = 0; k < model.l; ++k) {
    const double rate = model.channels[k].rate;
    out += rate * (F.f(x + b.g[k]) - fx);
    if (model.channels[k].compensated) {
      out -= rate * (grad.transpose() * b.g[k].cast<Complex>())(0);
    }
  }
  return out;
}

Complex hybrid_generator(const HybridModel& model, const TestFunction& F, const Operator& rho,
                         const ClassicalPoint& x) {
  if (rho.rows() != model.n || F.a.rows() != model.n) {
    throw DimensionError("hybrid_generator: dimension mismatch");
  }
  const CoefficientBundle b = eval_coefficients(model, x);
  std::vector<double> rates;
  for (const auto& ch : model.channels) rates.push_back(ch.rate);
  const Liouvillian liou(b.H, b.L, b.J, rates);

  const Complex fx = F.f(x);
  const Eigen::VectorXcd grad = F.grad(x);
  const Eigen::MatrixXcd hess = F.hess(x);
  const Complex tr_a = (rho * F.a).trace();

  Complex out = fx * (rho * liou.heisenberg_tilde(F.a)).trace();
  out += tr_a * (grad.transpose() * b.c.cast<Complex>())(0);
  const Eigen::MatrixXd diff = b.a * b.a.transpose();
  out += 0.5 * tr_a * (hess.cwiseProduct(diff.cast<Complex>())).sum();
  for (int i = 0; i < model.s; ++i) {
    for (int k = 0; k < model.d; ++k) {
      out += grad(i) * b.a(i, k) * (rho * (F.a * b.L[k] + b.L[k].adjoint() * F.a)).trace();
    }
  }
  for (int k = 0; k < model.l; ++k) {
    const double rate = model.channels[k].rate;
    out += rate * F.f(x + b.g[k]) * (rho * (b.J[k].adjoint() * F.a * b.J[k])).trace();
    if (model.channels[k].compensated) {
      out -= rate * tr_a * (grad.transpose() * b.g[k].cast<Complex>())(0);
    }
  }
  return out;
}

nlohmann::json to_json(const CheckReport& report) {
  nlohmann::json j{{"name", report.name},
                   {"estimate", report.estimate},
                   {"stderr", report.stderr_},
                   {"tolerance", report.tolerance},
                   {"pass", report.pass}};
  if (!report.details.is_null()) j["details"] = report.details;
  return j;
}

nlohmann::json GeneratorCheckReport::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) {
    pts.push_back({{"dt", p.dt},
                   {"derivative_re", p.derivative.real()},
                   {"derivative_im", p.derivative.imag()},
                   {"stderr", p.stderr_},
                   {"deviation_abs", std::abs(p.deviation)}});
  }
  return {{"analytic_re", analytic.real()},
          {"analytic_im", analytic.imag()},
          {"fitted_slope_abs", std::abs(fitted_slope)},
          {"points", pts},
          {"pass", pass}};
}

GeneratorCheckReport generator_consistency_check(const HybridModel& model,
                                                 const TestFunction& F, const Operator& rho,
                                                 const ClassicalPoint& x,
                                                 const std::vector<double>& dt_list, long N,
                                                 std::uint64_t seed) {
  GeneratorCheckReport report;
  report.analytic = hybrid_generator(model, F, rho, x);
  const Complex F0 = (rho * F.a).trace() * F.f(x);

  long index_offset = 0;
  for (double dt : dt_list) {
    TrajectorySimulator sim(model, dt, Mode::Q);
    BatchMean re, im;
    for (long i = 0; i < N; ++i) {
      TrajectoryState st = propagate(sim, x, rho, 1, seed, index_offset + i);
      const Complex v = st.sigma.trace().real() > 0
                            ? Complex((st.sigma * F.a).trace()) * F.f(st.x)
                            : Complex{0.0, 0.0};
      const int b = batch_of(i, N);
      re.add(b, v.real());
      im.add(b, v.imag());
    }
    index_offset += N;
    const Estimate er = re.estimate();
    const Estimate ei = im.estimate();
    GeneratorCheckPoint pt;
    pt.dt = dt;
    pt.derivative = (Complex(er.value, ei.value) - F0) / dt;
    pt.stderr_ = std::hypot(er.stderr_, ei.stderr_) / dt;
    pt.deviation = pt.derivative - report.analytic;
    report.points.push_back(pt);
  }

  // Least-squares slope of deviation vs dt through the origin.
  Complex num{0.0, 0.0};
  double den = 0.0;
  for (const auto& p : report.points) {
    const double w = p.stderr_ > 0 ? 1.0 / (p.stderr_ * p.stderr_) : 1.0;
    num += w * p.dt * p.deviation;
    den += w * p.dt * p.dt;
  }
  report.fitted_slope = den > 0 ? num / den : Complex{0.0, 0.0};
  report.pass = true;
  for (const auto& p : report.points) {
    const double residual = std::abs(p.deviation - report.fitted_slope * p.dt);
    if (residual > 3.0 * p.stderr_ + 1e-9) report.pass = false;
  }
  return report;
}

double InstrumentEstimate::total() const {
  double t = overflow;
  for (double v : value) t += v;
  return t;
}

InstrumentEstimate estimate_instrument(const HybridModel& model, const ClassicalPoint& x,
                                       double t, double dt, const Operator& rho,
                                       const Operator& a, const BinSpec& bins, long N,
                                       std::uint64_t seed) {
  if (bins.empty()) throw ConfigError("estimate_instrument: empty bin spec");
  require_hermitian(a, "estimate_instrument: a");
  const long steps = steps_for(t, dt);
  TrajectorySimulator sim(model, dt, Mode::Q);
  const long nb = bins.total();
  std::vector<BatchMean> cells(nb + 1);
  for (long i = 0; i < N; ++i) {
    const TrajectoryState st = propagate(sim, x, rho, steps, seed, i);
    const double v = (st.sigma * a).trace().real();
    long idx = bins.index(st.x);
    if (idx < 0) idx = nb;
    const int b = batch_of(i, N);
    for (long c = 0; c <= nb; ++c) cells[c].add(b, c == idx ? v : 0.0);
  }
  InstrumentEstimate est;
  est.bins = bins;
  est.samples = N;
  est.value.resize(nb);
  est.stderr_.resize(nb);
  for (long c = 0; c < nb; ++c) {
    const Estimate e = cells[c].estimate();
    est.value[c] = e.value;
    est.stderr_[c] = e.stderr_;
  }
  const Estimate ov = cells[nb].estimate();
  est.overflow = ov.value;
  est.overflow_stderr = ov.stderr_;

  double total_abs = std::abs(est.overflow);
  for (double v : est.value) total_abs += std::abs(v);
  if (std::abs(est.overflow) > 0.01 * std::max(1.0, total_abs)) {
    throw NumericalError("estimate_instrument: overflow mass " + std::to_string(est.overflow) +
                         " exceeds 1%, bin box is misconfigured");
  }
  return est;
}

BinSpec default_bins(const HybridModel& model, const ClassicalPoint& x, double t, double dt,
                     long pilot, std::uint64_t seed, int per_axis) {
  const long steps = steps_for(t, dt);
  TrajectorySimulator sim(model, dt, Mode::Q);
  ClassicalPoint lo = x, hi = x;
  const Operator rho = maximally_mixed(model.n);
  for (long i = 0; i < pilot; ++i) {
    const TrajectoryState st = propagate(sim, x, rho, steps, seed ^ 0xB1A5ull, i);
    lo = lo.cwiseMin(st.x);
    hi = hi.cwiseMax(st.x);
  }
  for (int i = 0; i < model.s; ++i) {
    const double pad = 0.1 * std::max(hi(i) - lo(i), 1e-6);
    lo(i) -= pad;
    hi(i) += pad;
  }
  return BinSpec::uniform(lo, hi, per_axis);
}

namespace {

struct FirstLegSample {
  ClassicalPoint x;
  Operator sigma;
};

/// Composes the two legs through an intermediate bin partition, propagating
/// the conditional states from their weighted mean points.
void compose_through_bins(const HybridModel& model, const std::vector<FirstLegSample>& leg1,
                          const BinSpec& zbins, double t, double dt, const Operator& a,
                          const BinSpec& ebins, long N2, std::uint64_t seed,
                          long& index_counter, std::vector<double>& value,
                          std::vector<double>& var, double& skipped_weight) {
  const long nz = zbins.total();
  const long ne = ebins.total();
  const long N1 = static_cast<long>(leg1.size());
  const int n = model.n;
  std::vector<double> wz(nz + 1, 0.0);
  std::vector<Operator> state(nz + 1, Operator::Zero(n, n));
  std::vector<ClassicalPoint> xmean(nz + 1, ClassicalPoint::Zero(model.s));
  for (const auto& s : leg1) {
    long idx = zbins.index(s.x);
    if (idx < 0) idx = nz;
    const double w = s.sigma.trace().real();
    wz[idx] += w;
    state[idx] += s.sigma;
    xmean[idx] += w * s.x;
  }
  value.assign(ne + 1, 0.0);
  var.assign(ne + 1, 0.0);
  skipped_weight = wz[nz];  // overflow of the intermediate partition
  TrajectorySimulator sim(model, dt, Mode::Q);
  const long steps = steps_for(t, dt);
  for (long z = 0; z < nz; ++z) {
    const double mass = wz[z] / N1;
    if (!(wz[z] > 1e-6 * N1 / std::max<long>(1, nz))) {
      skipped_weight += wz[z];
      continue;
    }
    const ClassicalPoint rep = xmean[z] / wz[z];
    Operator rho_z = hermitize(state[z] / state[z].trace().real());
    std::vector<BatchMean> cells(ne + 1);
    for (long i = 0; i < N2; ++i) {
      const TrajectoryState st = propagate(sim, rep, rho_z, steps, seed, index_counter + i);
      const double v = (st.sigma * a).trace().real();
      long idx = ebins.index(st.x);
      if (idx < 0) idx = ne;
      const int b = batch_of(i, N2);
      for (long c = 0; c <= ne; ++c) cells[c].add(b, c == idx ? v : 0.0);
    }
    index_counter += N2;
    for (long c = 0; c <= ne; ++c) {
      const Estimate e = cells[c].estimate();
      value[c] += mass * e.value;
      var[c] += mass * mass * e.stderr_ * e.stderr_;
    }
  }
}

}  // namespace

CheckReport chapman_kolmogorov_check(const HybridModel& model, const ClassicalPoint& x,
                                     double t, double tprime, double dt, const Operator& rho,
                                     const Operator& a, const BinSpec& bins, long N,
                                     std::uint64_t seed) {
  require_hermitian(a, "chapman_kolmogorov_check: a");
  // Direct estimate of the t+t' instrument.
  const InstrumentEstimate direct =
      estimate_instrument(model, x, t + tprime, dt, rho, a, bins, N, seed);

  // First leg to t', keeping endpoint states.
  const long steps1 = steps_for(tprime, dt);
  TrajectorySimulator sim(model, dt, Mode::Q);
  std::vector<FirstLegSample> leg1(N);
  for (long i = 0; i < N; ++i) {
    const TrajectoryState st = propagate(sim, x, rho, steps1, seed ^ 0x5EC0ull, i);
    leg1[i] = {st.x, st.sigma};
  }

  const long ne = bins.total();
  const long N2 = std::max<long>(500, N / 8);
  long index_counter = 0;
  std::vector<double> comp, comp_var;
  double skipped = 0.0;
  compose_through_bins(model, leg1, bins, t, dt, a, bins, N2, seed ^ 0xC0117ull, index_counter,
                       comp, comp_var, skipped);

  // Empirical discretization bound: repeat with a doubled intermediate grid.
  BinSpec fine = bins;
  fine.count = 2 * bins.count;
  std::vector<double> comp2, comp2_var;
  double skipped2 = 0.0;
  compose_through_bins(model, leg1, fine, t, dt, a, bins, N2, seed ^ 0xF13Eull, index_counter,
                       comp2, comp2_var, skipped2);

  const double a_scale = a.norm();
  double worst = 0.0, worst_bound = 1.0;
  bool pass = true;
  nlohmann::json bins_detail = nlohmann::json::array();
  for (long c = 0; c <= ne; ++c) {
    const double d = c < ne ? direct.value[c] : direct.overflow;
    const double sd = c < ne ? direct.stderr_[c] : direct.overflow_stderr;
    const double disc = std::abs(comp2[c] - comp[c]);
    const double skip_bound = (std::max(skipped, skipped2) / N) * a_scale;
    const double dev = std::abs(d - comp2[c]);
    const double bound =
        3.0 * std::sqrt(sd * sd + comp2_var[c]) + disc + skip_bound + 1e-9;
    if (dev > bound) pass = false;
    if (dev - bound > worst - worst_bound) {
      worst = dev;
      worst_bound = bound;
    }
    if (d != 0.0 || comp2[c] != 0.0) {
      bins_detail.push_back({{"bin", c == ne ? -1 : c},
                             {"direct", d},
                             {"composed", comp2[c]},
                             {"bound", bound}});
    }
  }
  CheckReport report;
  report.name = "chapman_kolmogorov";
  report.estimate = worst;
  report.stderr_ = 0.0;
  report.tolerance = worst_bound;
  report.pass = pass;
  report.details = {{"t", t},        {"t_prime", tprime}, {"samples", N},
                    {"leg2_samples", N2},                 {"cells", bins_detail}};
  return report;
}

ComplexEstimate characteristic_operator(const HybridModel& model, const ClassicalPoint& x,
                                        double t, double dt, const Operator& rho,
                                        const Operator& a, const Eigen::VectorXd& k, long N,
                                        std::uint64_t seed) {
  require_hermitian(a, "characteristic_operator: a");
  if (k.size() != model.s) throw DimensionError("characteristic_operator: wave vector size");
  const long steps = steps_for(t, dt);
  TrajectorySimulator sim(model, dt, Mode::Q);
  BatchMean re, im;
  for (long i = 0; i < N; ++i) {
    const TrajectoryState st = propagate(sim, x, rho, steps, seed, i);
    const Complex v = (st.sigma * a).trace().real() * std::exp(kI * k.dot(st.x));
    const int b = batch_of(i, N);
    re.add(b, v.real());
    im.add(b, v.imag());
  }
  const Estimate er = re.estimate();
  const Estimate ei = im.estimate();
  return {Complex(er.value, ei.value), std::hypot(er.stderr_, ei.stderr_)};
}

}  // namespace qctraj
