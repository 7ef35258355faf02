#include "qctraj/ensemble.hpp"

#include "qctraj/entanglement.hpp"

#include <cmath>

namespace qctraj {

long BinSpec::total() const {
  long t = 1;
  for (Eigen::Index i = 0; i < count.size(); ++i) t *= count(i);
  return count.size() == 0 ? 0 : t;
}

long BinSpec::index(const ClassicalPoint& x) const {
  if (x.size() != count.size()) {
    throw DimensionError("BinSpec: point dimension mismatch");
  }
  long flat = 0;
  for (Eigen::Index i = 0; i < count.size(); ++i) {
    if (x(i) < lo(i) || x(i) >= hi(i)) return -1;
    const double w = (hi(i) - lo(i)) / count(i);
    long idx = static_cast<long>((x(i) - lo(i)) / w);
    if (idx >= count(i)) idx = count(i) - 1;  // right edge
    flat = flat * count(i) + idx;
  }
  return flat;
}

ClassicalPoint BinSpec::center(long flat_index) const {
  auto [blo, bhi] = bounds(flat_index);
  return 0.5 * (blo + bhi);
}

std::pair<ClassicalPoint, ClassicalPoint> BinSpec::bounds(long flat_index) const {
  const Eigen::Index s = count.size();
  ClassicalPoint blo(s), bhi(s);
  long rest = flat_index;
  for (Eigen::Index i = s - 1; i >= 0; --i) {
    const long idx = rest % count(i);
    rest /= count(i);
    const double w = (hi(i) - lo(i)) / count(i);
    blo(i) = lo(i) + idx * w;
    bhi(i) = blo(i) + w;
  }
  return {blo, bhi};
}

BinSpec BinSpec::uniform(const ClassicalPoint& lo, const ClassicalPoint& hi, int per_axis) {
  if (lo.size() != hi.size() || per_axis < 1) {
    throw ConfigError("BinSpec: invalid bounds or bin count");
  }
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!(lo(i) < hi(i))) throw ConfigError("BinSpec: lo must be below hi");
  }
  BinSpec b;
  b.lo = lo;
  b.hi = hi;
  b.count = Eigen::VectorXi::Constant(lo.size(), per_axis);
  return b;
}

EnsembleAccumulator::EnsembleAccumulator(int dim, int batches, BinSpec bins)
    : dim_(dim), batches_(batches), bins_(std::move(bins)) {
  if (batches < 1) throw ConfigError("EnsembleAccumulator: need at least one batch");
  batch_count_.assign(batches, 0);
  batch_weight_.assign(batches, 0.0);
  state_sum_.assign(batches, Operator::Zero(dim, dim));
  if (!bins_.empty()) {
    hist_.assign(batches, Eigen::VectorXd::Zero(bins_.total() + 1));
  }
}

void EnsembleAccumulator::add_state(const Operator& sigma_hat, double weight, int batch) {
  state_sum_[batch] += weight * sigma_hat;
  add_count(weight, batch);
}

void EnsembleAccumulator::add_count(double weight, int batch) {
  ++batch_count_[batch];
  ++count_;
  batch_weight_[batch] += weight;
  weight_sq_sum_ += weight * weight;
}

void EnsembleAccumulator::add_point(const ClassicalPoint& x, double weight, int batch) {
  if (bins_.empty()) throw ConfigError("EnsembleAccumulator: no bins configured");
  const long idx = bins_.index(x);
  hist_[batch](idx < 0 ? bins_.total() : idx) += weight;
}

void EnsembleAccumulator::add_scalar(const std::string& name, double value, double weight,
                                     int batch) {
  auto& m = scalars_[name];
  if (m.sum.empty()) {
    m.sum.assign(batches_, 0.0);
    m.sumsq.assign(batches_, 0.0);
    m.cnt.assign(batches_, 0);
  }
  m.sum[batch] += weight * value;
  m.sumsq[batch] += weight * value * value;
  ++m.cnt[batch];
}

void EnsembleAccumulator::merge(const EnsembleAccumulator& other) {
  if (other.count_ == 0) return;
  if (count_ == 0 && dim_ == 0) {
    *this = other;
    return;
  }
  if (dim_ != other.dim_ || batches_ != other.batches_) {
    throw DimensionError("EnsembleAccumulator: incompatible merge");
  }
  count_ += other.count_;
  weight_sq_sum_ += other.weight_sq_sum_;
  for (int b = 0; b < batches_; ++b) {
    batch_count_[b] += other.batch_count_[b];
    batch_weight_[b] += other.batch_weight_[b];
    state_sum_[b] += other.state_sum_[b];
    if (!hist_.empty() && !other.hist_.empty()) hist_[b] += other.hist_[b];
  }
  for (const auto& [name, m] : other.scalars_) {
    auto& mine = scalars_[name];
    if (mine.sum.empty()) {
      mine = m;
    } else {
      for (int b = 0; b < batches_; ++b) {
        mine.sum[b] += m.sum[b];
        mine.sumsq[b] += m.sumsq[b];
        mine.cnt[b] += m.cnt[b];
      }
    }
  }
}

double EnsembleAccumulator::weight_sum() const {
  double w = 0.0;
  for (double b : batch_weight_) w += b;
  return w;
}

Operator EnsembleAccumulator::mean_state() const {
  if (count_ == 0) throw NumericalError("EnsembleAccumulator: empty ensemble");
  Operator sum = Operator::Zero(dim_, dim_);
  for (const auto& s : state_sum_) sum += s;
  return hermitize(sum / static_cast<double>(count_));
}

double EnsembleAccumulator::mean_state_stderr() const {
  const Operator mean = mean_state();
  double var = 0.0;
  int used = 0;
  for (int b = 0; b < batches_; ++b) {
    if (batch_count_[b] == 0) continue;
    const Operator mb = hermitize(state_sum_[b] / static_cast<double>(batch_count_[b]));
    const double d = trace_distance(mb, mean);
    var += d * d;
    ++used;
  }
  if (used < 2) return 0.0;
  return std::sqrt(var / (static_cast<double>(used) * (used - 1)));
}

Operator EnsembleAccumulator::conditional_state() const {
  const double w = weight_sum();
  if (!(w > tol::eps_weight)) {
    throw NumericalError("EnsembleAccumulator: vanishing total weight");
  }
  Operator sum = Operator::Zero(dim_, dim_);
  for (const auto& s : state_sum_) sum += s;
  return hermitize(sum / w);
}

double EnsembleAccumulator::effective_samples() const {
  const double w = weight_sum();
  return weight_sq_sum_ > 0 ? w * w / weight_sq_sum_ : 0.0;
}

Estimate EnsembleAccumulator::batch_estimate(const std::vector<double>& sums,
                                             const std::vector<long>& cnts) const {
  double total = 0.0;
  long n = 0;
  for (int b = 0; b < batches_; ++b) {
    total += sums[b];
    n += cnts[b];
  }
  if (n == 0) return {0.0, 0.0};
  const double mean = total / n;
  double var = 0.0;
  int used = 0;
  for (int b = 0; b < batches_; ++b) {
    if (cnts[b] == 0) continue;
    const double mb = sums[b] / cnts[b];
    var += (mb - mean) * (mb - mean);
    ++used;
  }
  const double se = used >= 2 ? std::sqrt(var / (static_cast<double>(used) * (used - 1))) : 0.0;
  return {mean, se};
}

Estimate EnsembleAccumulator::scalar(const std::string& name) const {
  auto it = scalars_.find(name);
  if (it == scalars_.end()) throw ConfigError("EnsembleAccumulator: no scalar '" + name + "'");
  return batch_estimate(it->second.sum, it->second.cnt);
}

std::vector<Estimate> EnsembleAccumulator::histogram() const {
  if (hist_.empty()) throw ConfigError("EnsembleAccumulator: no bins configured");
  const long nb = bins_.total();
  std::vector<Estimate> out(nb);
  std::vector<double> sums(batches_);
  for (long i = 0; i < nb; ++i) {
    for (int b = 0; b < batches_; ++b) sums[b] = hist_[b](i);
    out[i] = batch_estimate(sums, batch_count_);
  }
  return out;
}

Estimate EnsembleAccumulator::overflow() const {
  if (hist_.empty()) throw ConfigError("EnsembleAccumulator: no bins configured");
  std::vector<double> sums(batches_);
  for (int b = 0; b < batches_; ++b) sums[b] = hist_[b](bins_.total());
  return batch_estimate(sums, batch_count_);
}

namespace {

long shared_step(std::span<const TrajectoryPath> paths, double t) {
  if (paths.empty()) throw NumericalError("empty ensemble");
  const long step = paths[0].step_of_time(t);
  for (const auto& p : paths) {
    if (p.dt != paths[0].dt || p.steps != paths[0].steps) {
      throw NumericalError("paths do not share a grid");
    }
  }
  return step;
}

int batch_of(size_t i, size_t n, int batches) {
  const size_t chunk = (n + batches - 1) / batches;
  return static_cast<int>(i / chunk);
}

double path_weight(const TrajectoryPath& p, long step) {
  return p.mode == Mode::Q ? p.weight[step] : 1.0;
}

}  // namespace

Operator a_priori_state(std::span<const TrajectoryPath> paths, double t) {
  const long step = shared_step(paths, t);
  const int n = static_cast<int>(paths[0].state_at_step(step).rows());
  EnsembleAccumulator acc(n);
  for (size_t i = 0; i < paths.size(); ++i) {
    acc.add_state(paths[i].state_at_step(step), path_weight(paths[i], step),
                  batch_of(i, paths.size(), acc.batches()));
  }
  return acc.mean_state();
}

ConditionalEstimate a_posteriori_state(std::span<const TrajectoryPath> paths,
                                       const PathPredicate& predicate, double t) {
  const long step = shared_step(paths, t);
  std::vector<const TrajectoryPath*> matched;
  for (const auto& p : paths) {
    if (predicate(p)) matched.push_back(&p);
  }
  if (matched.empty()) throw NumericalError("a_posteriori_state: no matching trajectories");
  const int n = static_cast<int>(matched[0]->state_at_step(step).rows());
  EnsembleAccumulator acc(n);
  for (size_t i = 0; i < matched.size(); ++i) {
    acc.add_state(matched[i]->state_at_step(step), path_weight(*matched[i], step),
                  batch_of(i, matched.size(), acc.batches()));
  }
  ConditionalEstimate est;
  est.mean_state = acc.conditional_state();
  est.effective_samples = acc.effective_samples();
  est.matches = static_cast<long>(matched.size());
  for (const auto* p : matched) {
    if (path_weight(*p, step) > tol::eps_weight) {
      est.max_spread =
          std::max(est.max_spread, trace_distance(p->state_at_step(step), est.mean_state));
    }
  }
  return est;
}

Estimate mean_concurrence(std::span<const TrajectoryPath> paths, double t) {
  const long step = shared_step(paths, t);
  EnsembleAccumulator acc(4);
  for (size_t i = 0; i < paths.size(); ++i) {
    const double w = path_weight(paths[i], step);
    const int b = batch_of(i, paths.size(), acc.batches());
    if (!(w > tol::eps_weight)) {
      // Zero-weight branches carry no state; they contribute weight zero.
      acc.add_scalar("C", 0.0, 0.0, b);
      continue;
    }
    const Operator& sh = paths[i].state_at_step(step);
    if (sh.rows() != 4) throw DimensionError("mean_concurrence: need a two-qubit ensemble");
    acc.add_scalar("C", concurrence_of_pure_density(sh), w, b);
  }
  return acc.scalar("C");
}

Histogram classical_marginal(std::span<const TrajectoryPath> paths, double t,
                             const BinSpec& bins) {
  if (bins.empty()) throw ConfigError("classical_marginal: empty bin spec");
  const long step = shared_step(paths, t);
  EnsembleAccumulator acc(1, EnsembleAccumulator::kDefaultBatches, bins);
  for (size_t i = 0; i < paths.size(); ++i) {
    const int b = batch_of(i, paths.size(), acc.batches());
    const double w = path_weight(paths[i], step);
    acc.add_count(w, b);
    acc.add_point(paths[i].x[step], w, b);
  }
  Histogram h;
  h.bins = bins;
  h.mass = acc.histogram();
  h.overflow = acc.overflow();
  h.samples = static_cast<long>(paths.size());
  return h;
}

PathPredicate same_jump_record(const TrajectoryPath& reference) {
  std::vector<JumpEvent> ref = reference.jumps;
  return [ref](const TrajectoryPath& p) {
    if (p.jumps.size() != ref.size()) return false;
    for (size_t i = 0; i < ref.size(); ++i) {
      if (p.jumps[i].step != ref[i].step || p.jumps[i].channel != ref[i].channel) return false;
    }
    return true;
  };
}

PathPredicate no_jump_by_step(long step) {
  return [step](const TrajectoryPath& p) {
    for (const auto& j : p.jumps) {
      if (j.step < step) return false;
    }
    return true;
  };
}

}  // namespace qctraj
