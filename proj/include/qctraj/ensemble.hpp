#pragma once

#include "qctraj/engine.hpp"

#include <functional>
#include <map>
#include <span>
#include <string>

namespace qctraj {

/// Uniform bins per classical coordinate; out-of-box points go to the
/// overflow cell (index -1).
struct BinSpec {
  Eigen::VectorXd lo, hi;
  Eigen::VectorXi count;

  bool empty() const { return count.size() == 0; }
  long total() const;
  long index(const ClassicalPoint& x) const;
  ClassicalPoint center(long flat_index) const;
  std::pair<ClassicalPoint, ClassicalPoint> bounds(long flat_index) const;

  static BinSpec uniform(const ClassicalPoint& lo, const ClassicalPoint& hi, int per_axis);
};

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Mergeable sufficient statistics over an ensemble of trajectories:
/// weighted state mean, classical histogram and named scalar moments, all
/// held per batch so that batch-means standard errors come for free.
/// merge() is commutative and associative up to floating point reordering
/// (agreement within ~1e-12); counts and weights are exact.
class EnsembleAccumulator {
 public:
  static constexpr int kDefaultBatches = 32;

  EnsembleAccumulator() = default;
  EnsembleAccumulator(int dim, int batches = kDefaultBatches, BinSpec bins = {});

  void add_state(const Operator& sigma_hat, double weight, int batch);
  /// Counts a sample without a state contribution.
  void add_count(double weight, int batch);
  void add_point(const ClassicalPoint& x, double weight, int batch);
  void add_scalar(const std::string& name, double value, double weight, int batch);

  void merge(const EnsembleAccumulator& other);

  long count() const { return count_; }
  double weight_sum() const;
  int batches() const { return batches_; }
  const BinSpec& bins() const { return bins_; }

  /// Mean state sum(w sigma_hat)/count, Hermitized.
  Operator mean_state() const;
  /// Batch spread of the mean state in trace norm.
  double mean_state_stderr() const;
  /// Weighted mean of sigma_hat over the accumulated weight (conditional mean).
  Operator conditional_state() const;
  double effective_samples() const;

  Estimate scalar(const std::string& name) const;
  std::vector<Estimate> histogram() const;  // per-bin mass (weighted, /count)
  Estimate overflow() const;

 private:
  int dim_ = 0;
  int batches_ = 0;
  long count_ = 0;
  BinSpec bins_;
  std::vector<long> batch_count_;
  std::vector<double> batch_weight_;
  std::vector<Operator> state_sum_;          // per batch
  std::vector<Eigen::VectorXd> hist_;        // per batch, size total()+1 (overflow last)
  struct ScalarMoments {
    std::vector<double> sum, sumsq;
    std::vector<long> cnt;
  };
  std::map<std::string, ScalarMoments> scalars_;
  double weight_sq_sum_ = 0.0;

  Estimate batch_estimate(const std::vector<double>& sums,
                          const std::vector<long>& cnts) const;
};

using PathPredicate = std::function<bool(const TrajectoryPath&)>;

/// Mean state at time t: Q mode averages the unnormalized sigma (the weight
/// carries the density), P mode averages sigma_hat directly.
Operator a_priori_state(std::span<const TrajectoryPath> paths, double t);

struct ConditionalEstimate {
  Operator mean_state;
  double effective_samples = 0.0;
  long matches = 0;
  double max_spread = 0.0;  // largest trace distance of a member from the mean
};

/// State conditioned on recorded path data (jump record, binned classical
/// endpoint, ...). Throws if no trajectory matches.
ConditionalEstimate a_posteriori_state(std::span<const TrajectoryPath> paths,
                                       const PathPredicate& predicate, double t);

/// Weighted mean of the pure-state concurrence at time t; requires dim 4 and
/// pure recorded states (within the purity tolerance).
Estimate mean_concurrence(std::span<const TrajectoryPath> paths, double t);

struct Histogram {
  BinSpec bins;
  std::vector<Estimate> mass;
  Estimate overflow;
  long samples = 0;
};

Histogram classical_marginal(std::span<const TrajectoryPath> paths, double t,
                             const BinSpec& bins);

/// Predicate matching trajectories whose full jump record equals the given one.
PathPredicate same_jump_record(const TrajectoryPath& reference);

/// Predicate matching trajectories with no jump up to and including `step`.
PathPredicate no_jump_by_step(long step);

}  // namespace qctraj
