#include "stabsvrg/svrg.hpp"

#include "stabsvrg/parallel.hpp"

#include <cmath>
#include <stdexcept>

namespace stabsvrg {

void SvrgConfig::validate() const {
  if (epoch_length < 1) throw std::invalid_argument("SvrgConfig: epoch_length must be >= 1");
  if (minibatch < 1) throw std::invalid_argument("SvrgConfig: minibatch must be >= 1");
  if (!(step_size >= 0.0) || !std::isfinite(step_size))
    throw std::invalid_argument("SvrgConfig: step_size must be finite and >= 0");
  if (epochs < 1) throw std::invalid_argument("SvrgConfig: epochs must be >= 1");
}

Eigen::VectorXd gradient_estimate(const FiniteSumObjective& obj, const Eigen::VectorXd& x,
                                  const EpochContext& ctx, const std::vector<int>& batch,
                                  GradCounter& counter) {
  const int b = static_cast<int>(batch.size());
  if (b == 0) throw std::invalid_argument("gradient_estimate: empty minibatch");
  const int d = obj.dim();

  // Accumulate only the per-sample differences; the snapshot gradient is
  // added once after averaging. This keeps the x == snapshot case exact.
  Eigen::VectorXd diff_sum(d);
  parallel::sum_terms(
      b, d,
      [&](int k, auto& acc, Eigen::VectorXd& scratch) {
        const int i = batch[static_cast<std::size_t>(k)];
        obj.component_gradient(i, x, scratch);
        acc += scratch;
        obj.component_gradient(i, ctx.snapshot, scratch);
        acc -= scratch;
      },
      diff_sum);
  counter.add_estimate(b);

  Eigen::VectorXd v = diff_sum / static_cast<double>(b) + ctx.snapshot_gradient;
  if (ctx.shift.size() > 0) v -= ctx.shift;
  return v;
}

RunTrace svrg_run(const FiniteSumObjective& obj, const Eigen::VectorXd& x0,
                  const SvrgConfig& config, Rng& rng, GradCounter& counter, TraceLevel level) {
  config.validate();
  if (!x0.allFinite()) throw std::invalid_argument("svrg_run: x0 must be finite");
  if (x0.size() != obj.dim()) throw std::invalid_argument("svrg_run: x0 has wrong dimension");

  const int n = obj.component_count();
  Rng batch_rng = rng.fork("minibatch");

  RunTrace trace;
  trace.seed = rng.seed();
  trace.status = RunStatus::completed;

  Eigen::VectorXd x = x0;
  EpochContext ctx;
  ctx.shift = Eigen::VectorXd::Zero(obj.dim());
  long long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (counter.exhausted()) {
      trace.status = RunStatus::budget_exhausted;
      break;
    }
    ctx.snapshot = x;
    obj.full_gradient(ctx.snapshot, ctx.snapshot_gradient);
    counter.add_full_gradient(n);
    trace.snapshots.push_back({step, epoch, obj.value(x), ctx.snapshot_gradient.norm(),
                               counter.count(), false, x});

    bool stop = false;
    for (int t = 1; t <= config.epoch_length; ++t) {
      if (counter.exhausted()) {
        trace.status = RunStatus::budget_exhausted;
        stop = true;
        break;
      }
      const std::vector<int> batch = sample_minibatch(n, config.minibatch, batch_rng);
      const Eigen::VectorXd v = gradient_estimate(obj, x, ctx, batch, counter);
      x -= config.step_size * v;
      ++step;
      if (!x.allFinite()) {
        trace.status = RunStatus::diverged;
        stop = true;
        break;
      }
      if (!obj.in_domain(x)) trace.domain_violation = true;
      if (level == TraceLevel::steps)
        trace.steps.push_back({step, epoch, obj.value(x), counter.count(), false});
    }
    if (stop) break;
  }

  trace.final_point = x;
  trace.final_f = x.allFinite() ? obj.value(x) : std::numeric_limits<double>::quiet_NaN();
  trace.total_sg = counter.count();
  trace.total_steps = step;
  return trace;
}

RandomStopResult svrg_epoch_random_stop(const FiniteSumObjective& obj, const Eigen::VectorXd& x0,
                                        const SvrgConfig& config, Rng& rng,
                                        GradCounter& counter) {
  config.validate();
  if (!x0.allFinite()) throw std::invalid_argument("svrg_epoch_random_stop: x0 must be finite");

  const int n = obj.component_count();
  Rng batch_rng = rng.fork("minibatch");
  Rng stop_rng = rng.fork("stop");

  EpochContext ctx;
  ctx.snapshot = x0;
  ctx.shift = Eigen::VectorXd::Zero(obj.dim());
  obj.full_gradient(ctx.snapshot, ctx.snapshot_gradient);
  counter.add_full_gradient(n);

  Eigen::VectorXd x = x0;
  RandomStopResult result;
  for (int t = 1; t <= config.epoch_length; ++t) {
    if (counter.exhausted()) break;
    const std::vector<int> batch = sample_minibatch(n, config.minibatch, batch_rng);
    const Eigen::VectorXd v = gradient_estimate(obj, x, ctx, batch, counter);
    x -= config.step_size * v;
    result.t_stop = t;
    if (!x.allFinite()) {
      result.diverged = true;
      break;
    }
    if (random_stop_draw(config.epoch_length, t, stop_rng)) break;
  }
  result.x_stop = x;
  return result;
}

}  // namespace stabsvrg
