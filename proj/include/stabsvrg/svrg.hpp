#pragma once

#include "stabsvrg/objective.hpp"
#include "stabsvrg/rng.hpp"
#include "stabsvrg/trace.hpp"

#include <Eigen/Core>

#include <vector>

namespace stabsvrg {

struct SvrgConfig {
  int epoch_length = 1;   // m
  int minibatch = 1;      // b
  double step_size = 0.1; // eta
  int epochs = 1;         // S

  /// b >= m^2 is required whenever the epoch decrease guarantee is claimed;
  /// plain runs only need positive parameters.
  void validate() const;
};

/// Epoch-local state of the variance-reduced estimator: the snapshot, its
/// full gradient, and the stabilizing shift (zero outside super epochs).
struct EpochContext {
  Eigen::VectorXd snapshot;
  Eigen::VectorXd snapshot_gradient;
  Eigen::VectorXd shift;
};

/// v = (1/b) sum_{i in batch} (grad f_i(x) - grad f_i(snapshot)) +
///     snapshot_gradient - shift.
/// Charges 2 * |batch| component-gradient evaluations to the counter. At
/// x == snapshot the per-sample differences cancel exactly and the result is
/// bit-equal to snapshot_gradient - shift.
Eigen::VectorXd gradient_estimate(const FiniteSumObjective& obj, const Eigen::VectorXd& x,
                                  const EpochContext& ctx, const std::vector<int>& batch,
                                  GradCounter& counter);

/// Minibatch SVRG: S epochs of exactly m steps, full gradient at each epoch
/// start. Non-finite iterates abort with a diverged trace; an exhausted
/// counter budget stops the run before the next charged operation.
RunTrace svrg_run(const FiniteSumObjective& obj, const Eigen::VectorXd& x0,
                  const SvrgConfig& config, Rng& rng, GradCounter& counter,
                  TraceLevel level = TraceLevel::snapshots);

struct RandomStopResult {
  Eigen::VectorXd x_stop;
  int t_stop = 0;  // uniform on {1, ..., m}
  bool diverged = false;
};

/// One epoch that stops after inner step t with probability 1/(m - (t - 1)),
/// which is equivalent to finishing the epoch and returning a uniformly
/// random iterate of it.
RandomStopResult svrg_epoch_random_stop(const FiniteSumObjective& obj, const Eigen::VectorXd& x0,
                                        const SvrgConfig& config, Rng& rng, GradCounter& counter);

}  // namespace stabsvrg
