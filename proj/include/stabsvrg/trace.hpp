#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace stabsvrg {

enum class RunStatus { completed, budget_exhausted, diverged };

enum class SuperEpochExit { open, distance, step_cap };

enum class TraceLevel { snapshots, steps };

/// Count of single-component gradient evaluations. One full gradient costs n;
/// one estimator call costs 2b (each sampled component is evaluated at the
/// iterate and at the snapshot). Work must be gated on !exhausted() before it
/// is charged, so a run overshoots its budget by at most one accounting unit.
class GradCounter {
 public:
  GradCounter() = default;
  explicit GradCounter(long long budget) : budget_(budget) {}

  void add_full_gradient(int n) { count_ += n; }
  void add_estimate(int b) { count_ += 2LL * b; }

  long long count() const { return count_; }
  long long budget() const { return budget_; }
  bool has_budget() const { return budget_ >= 0; }
  bool exhausted() const { return budget_ >= 0 && count_ >= budget_; }

 private:
  long long count_ = 0;
  long long budget_ = -1;  // -1 = unlimited
};

struct SnapshotRecord {
  long long step = 0;  // global inner-step index at epoch start
  int epoch = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  long long sg_count = 0;
  bool in_super_epoch = false;
  Eigen::VectorXd point;
};

struct StepRecord {
  long long step = 0;
  int epoch = 0;
  double f = 0.0;
  long long sg_count = 0;
  bool in_super_epoch = false;
};

struct SuperEpochSpan {
  long long entry_step = 0;  // global step index of the anchor epoch start
  int entry_epoch = 0;
  long long exit_step = -1;
  SuperEpochExit exit_reason = SuperEpochExit::open;
  double f_anchor = 0.0;
  double anchor_grad_norm = 0.0;
  double perturbation_norm = 0.0;  // ||xi|| actually drawn, <= delta
  double f_exit = 0.0;
  double exit_distance = 0.0;  // ||x_exit - anchor||
  Eigen::VectorXd anchor;
};

struct RandomStopRecord {
  long long step = 0;  // global step index at which the epoch stopped
  int epoch = 0;
  int t_stop = 0;  // inner index in [1, m]
};

struct RunTrace {
  std::vector<SnapshotRecord> snapshots;
  std::vector<StepRecord> steps;  // populated at TraceLevel::steps
  std::vector<SuperEpochSpan> super_epochs;
  std::vector<RandomStopRecord> random_stops;

  Eigen::VectorXd final_point;
  double final_f = 0.0;
  RunStatus status = RunStatus::completed;
  bool domain_violation = false;
  long long total_sg = 0;
  long long total_steps = 0;
  std::uint64_t seed = 0;

  bool empty() const {
    return snapshots.empty() && steps.empty() && super_epochs.empty() && random_stops.empty();
  }

  /// Checks the structural invariants (monotone counters, increasing steps,
  /// matched super-epoch spans); throws std::logic_error on violation.
  void validate() const;
};

const char* to_string(RunStatus status);
const char* to_string(SuperEpochExit reason);

}  // namespace stabsvrg
