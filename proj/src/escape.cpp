#include "stabsvrg/escape.hpp"

#include "stabsvrg/svrg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace stabsvrg {

void EscapeConfig::validate() const {
  if (epoch_length < 1) throw std::invalid_argument("EscapeConfig: epoch_length must be >= 1");
  if (minibatch < 1) throw std::invalid_argument("EscapeConfig: minibatch must be >= 1");
  if (!(step_size > 0.0) || !std::isfinite(step_size))
    throw std::invalid_argument("EscapeConfig: step_size must be positive");
  if (!(perturbation_radius >= 0.0) || !std::isfinite(perturbation_radius))
    throw std::invalid_argument("EscapeConfig: perturbation_radius must be >= 0");
  if (super_epoch_cap < 1) throw std::invalid_argument("EscapeConfig: super_epoch_cap must be >= 1");
  if (!(gradient_threshold > 0.0))
    throw std::invalid_argument("EscapeConfig: gradient_threshold must be positive");
  if (!(distance_threshold > 0.0))
    throw std::invalid_argument("EscapeConfig: distance_threshold must be positive");
  if (!(distance_threshold > perturbation_radius))
    throw std::invalid_argument(
        "EscapeConfig: distance_threshold must exceed the perturbation radius, otherwise a "
        "super epoch can terminate inside the perturbation ball");
}

EscapeConfig default_parameters(long long n, double lipschitz_l, double rho, double rho_prime,
                                double epsilon, EscapeVariant variant,
                                const EscapeConstants& constants) {
  if (n < 1) throw std::invalid_argument("default_parameters: n must be >= 1");
  if (!(lipschitz_l > 0.0)) throw std::invalid_argument("default_parameters: L must be positive");
  if (!(rho > 0.0)) throw std::invalid_argument("default_parameters: rho must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("default_parameters: epsilon must be positive");
  if (!(rho_prime >= rho))
    throw std::invalid_argument("default_parameters: rho_prime must be >= rho");

  EscapeConfig cfg;
  cfg.constants = constants;
  const double nd = static_cast<double>(n);
  long long b = static_cast<long long>(std::ceil(constants.c_b * std::cbrt(nd * nd)));
  b = std::max<long long>(1, std::min<long long>(b, n));
  cfg.minibatch = static_cast<int>(b);
  cfg.epoch_length = static_cast<int>((n + b - 1) / b);
  cfg.step_size = constants.c_eta / lipschitz_l;
  const double sqrt_rho_eps = std::sqrt(rho * epsilon);
  cfg.super_epoch_cap =
      static_cast<long long>(std::ceil(constants.c_t * lipschitz_l / sqrt_rho_eps));
  cfg.gradient_threshold = constants.c_g * epsilon;

  const double m = static_cast<double>(cfg.epoch_length);
  if (variant == EscapeVariant::stabilized) {
    cfg.perturbation_radius =
        constants.c_delta * std::min(std::sqrt(epsilon / rho), m * sqrt_rho_eps / rho_prime);
    cfg.distance_threshold = constants.c_l * std::sqrt(epsilon / rho);
  } else {
    const double worst = std::max(rho, rho_prime / m);
    cfg.perturbation_radius =
        constants.c_delta *
        std::min(std::pow(rho, 1.5) * std::sqrt(epsilon) / (worst * worst),
                 std::pow(rho, 0.75) * std::pow(epsilon, 0.75) / (worst * std::sqrt(lipschitz_l)));
    cfg.distance_threshold = constants.c_l * sqrt_rho_eps / worst;
  }
  cfg.validate();
  return cfg;
}

namespace {

RunTrace run_escape(const FiniteSumObjective& obj, const Eigen::VectorXd& x0,
                    const EscapeConfig& config, Rng& rng, GradCounter& counter,
                    EscapeVariant variant, TraceLevel level) {
  config.validate();
  if (!x0.allFinite()) throw std::invalid_argument("escape run: x0 must be finite");
  if (x0.size() != obj.dim()) throw std::invalid_argument("escape run: x0 has wrong dimension");
  if (!counter.has_budget())
    throw std::invalid_argument("escape run: a stochastic-gradient budget is required");

  const int n = obj.component_count();
  const int d = obj.dim();
  Rng batch_rng = rng.fork("minibatch");
  Rng perturb_rng = rng.fork("perturbation");
  Rng stop_rng = rng.fork("stop");

  RunTrace trace;
  trace.seed = rng.seed();
  trace.status = RunStatus::completed;

  Eigen::VectorXd x = x0;
  long long step = 0;

  SuperEpochState state;
  state.v_shift = Eigen::VectorXd::Zero(d);

  EpochContext ctx;
  ctx.shift = Eigen::VectorXd::Zero(d);

  bool running = true;
  for (int epoch = 0; running; ++epoch) {
    if (!x.allFinite()) {
      trace.status = RunStatus::diverged;
      break;
    }
    if (counter.exhausted()) {
      trace.status = RunStatus::budget_exhausted;
      break;
    }
    obj.full_gradient(x, ctx.snapshot_gradient);
    counter.add_full_gradient(n);
    const double grad_norm = ctx.snapshot_gradient.norm();
    const double f_x = obj.value(x);
    trace.snapshots.push_back({step, epoch, f_x, grad_norm, counter.count(), state.active, x});

    if (!state.active && grad_norm <= config.gradient_threshold) {
      state.active = true;
      state.anchor = x;
      state.t_init = step;
      if (variant == EscapeVariant::stabilized) state.v_shift = ctx.snapshot_gradient;
      x = sample_ball(x, config.perturbation_radius, perturb_rng);

      SuperEpochSpan span;
      span.entry_step = step;
      span.entry_epoch = epoch;
      span.f_anchor = f_x;
      span.anchor_grad_norm = grad_norm;
      span.perturbation_norm = (x - state.anchor).norm();
      span.anchor = state.anchor;
      trace.super_epochs.push_back(std::move(span));

      // The epoch's snapshot is the perturbed point; the estimator needs the
      // full gradient there.
      if (counter.exhausted()) {
        trace.status = RunStatus::budget_exhausted;
        break;
      }
      obj.full_gradient(x, ctx.snapshot_gradient);
      counter.add_full_gradient(n);
    }
    ctx.snapshot = x;
    ctx.shift = state.active ? state.v_shift : Eigen::VectorXd::Zero(d);

    for (int t = 1; t <= config.epoch_length; ++t) {
      if (counter.exhausted()) {
        trace.status = RunStatus::budget_exhausted;
        running = false;
        break;
      }
      const std::vector<int> batch = sample_minibatch(n, config.minibatch, batch_rng);
      const Eigen::VectorXd v = gradient_estimate(obj, x, ctx, batch, counter);
      x -= config.step_size * v;
      ++step;
      if (!x.allFinite()) {
        trace.status = RunStatus::diverged;
        running = false;
        break;
      }
      if (!obj.in_domain(x)) trace.domain_violation = true;
      if (level == TraceLevel::steps)
        trace.steps.push_back({step, epoch, obj.value(x), counter.count(), state.active});

      if (state.active) {
        const double distance = (x - state.anchor).norm();
        const bool far_enough = distance >= config.distance_threshold;
        const bool capped = step - state.t_init >= config.super_epoch_cap;
        if (far_enough || capped) {
          auto& span = trace.super_epochs.back();
          span.exit_step = step;
          span.exit_reason = far_enough ? SuperEpochExit::distance : SuperEpochExit::step_cap;
          span.f_exit = obj.value(x);
          span.exit_distance = distance;
          state.active = false;
          state.v_shift.setZero();
          break;
        }
      } else if (random_stop_draw(config.epoch_length, t, stop_rng)) {
        trace.random_stops.push_back({step, epoch, t});
        break;
      }
    }
  }

  trace.final_point = x;
  trace.final_f = x.allFinite() ? obj.value(x) : std::numeric_limits<double>::quiet_NaN();
  trace.total_sg = counter.count();
  trace.total_steps = step;
  return trace;
}

}  // namespace

RunTrace perturbed_svrg(const FiniteSumObjective& obj, const Eigen::VectorXd& x0,
                        const EscapeConfig& config, Rng& rng, GradCounter& counter,
                        TraceLevel level) {
  return run_escape(obj, x0, config, rng, counter, EscapeVariant::perturbed, level);
}

RunTrace stabilized_svrg(const FiniteSumObjective& obj, const Eigen::VectorXd& x0,
                         const EscapeConfig& config, Rng& rng, GradCounter& counter,
                         TraceLevel level) {
  return run_escape(obj, x0, config, rng, counter, EscapeVariant::stabilized, level);
}

SuperEpochOutcome super_epoch_outcome(const RunTrace& trace, std::size_t entry_index) {
  if (entry_index >= trace.super_epochs.size())
    throw std::invalid_argument("super_epoch_outcome: no super epoch at this index");
  const SuperEpochSpan& span = trace.super_epochs[entry_index];
  if (span.exit_reason == SuperEpochExit::open)
    throw std::invalid_argument("super_epoch_outcome: super epoch still open at end of run");
  return {span.exit_reason == SuperEpochExit::distance, span.f_exit - span.f_anchor};
}

}  // namespace stabsvrg
