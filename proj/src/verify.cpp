#include "stabsvrg/verify.hpp"

#include "stabsvrg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stabsvrg {

namespace {

Eigen::VectorXd fd_gradient_of(const std::function<double(const Eigen::VectorXd&)>& f,
                               const Eigen::VectorXd& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_gradient: step must be positive");
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double xj = x[j];
    probe[j] = xj + h;
    const double fp = f(probe);
    probe[j] = xj - h;
    const double fm = f(probe);
    probe[j] = xj;
    grad[j] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

Eigen::VectorXd hvp_of(const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& grad,
                       const Eigen::VectorXd& x, const Eigen::VectorXd& v, double h) {
  const double vnorm = v.norm();
  if (vnorm == 0.0) throw std::invalid_argument("hvp: direction must be nonzero");
  if (h == 0.0) h = fd_hvp_step(x);
  if (!(h > 0.0)) throw std::invalid_argument("hvp: step must be positive");
  const Eigen::VectorXd unit = v / vnorm;
  Eigen::VectorXd gp(x.size()), gm(x.size());
  grad(x + h * unit, gp);
  grad(x - h * unit, gm);
  return (vnorm / (2.0 * h)) * (gp - gm);
}

}  // namespace

Eigen::VectorXd fd_gradient(const FiniteSumObjective& obj, const Eigen::VectorXd& x, double h) {
  return fd_gradient_of([&](const Eigen::VectorXd& p) { return obj.value(p); }, x, h);
}

Eigen::VectorXd fd_component_gradient(const FiniteSumObjective& obj, int i,
                                      const Eigen::VectorXd& x, double h) {
  return fd_gradient_of([&](const Eigen::VectorXd& p) { return obj.component_value(i, p); }, x,
                        h);
}

Eigen::VectorXd hvp(const FiniteSumObjective& obj, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& v, double h) {
  return hvp_of([&](const Eigen::VectorXd& p, Eigen::VectorXd& g) { obj.full_gradient(p, g); }, x,
                v, h);
}

Eigen::VectorXd component_hvp(const FiniteSumObjective& obj, int i, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& v, double h) {
  return hvp_of(
      [&](const Eigen::VectorXd& p, Eigen::VectorXd& g) { obj.component_gradient(i, p, g); }, x,
      v, h);
}

EigenEstimate smallest_eigenvalue(const FiniteSumObjective& obj, const Eigen::VectorXd& x,
                                  double tol, int max_iters, Rng& rng) {
  if (!(tol > 0.0)) throw std::invalid_argument("smallest_eigenvalue: tol must be positive");
  if (max_iters < 1) throw std::invalid_argument("smallest_eigenvalue: max_iters must be >= 1");
  const Eigen::Index d = x.size();

  // Shift so the smallest eigenvalue of H becomes the dominant one of
  // sigma I - H; sigma must be at least the spectral radius of H.
  double sigma;
  if (obj.lipschitz_l()) {
    sigma = 1.1 * *obj.lipschitz_l();
  } else {
    Eigen::VectorXd probe(d);
    for (Eigen::Index j = 0; j < d; ++j) probe[j] = rng.normal();
    probe.normalize();
    double radius = 0.0;
    for (int it = 0; it < 30; ++it) {
      Eigen::VectorXd hp = hvp(obj, x, probe);
      radius = hp.norm();
      if (radius == 0.0) break;
      probe = hp / radius;
    }
    sigma = 1.5 * std::max(radius, 1e-12);
  }

  EigenEstimate estimate;
  double mu = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  int total_iters = 0;
  // A converged negative Rayleigh quotient means the shift undershot the
  // spectral radius (the dominant eigenvalue of sigma I - H sits at the
  // wrong end); grow sigma and restart.
  for (int attempt = 0; attempt < 4; ++attempt) {
    Eigen::VectorXd u(d);
    for (Eigen::Index j = 0; j < d; ++j) u[j] = rng.normal();
    u.normalize();
    estimate.converged = false;
    while (total_iters < max_iters) {
      ++total_iters;
      const Eigen::VectorXd shifted = sigma * u - hvp(obj, x, u);  // (sigma I - H) u
      mu = u.dot(shifted);
      residual = (shifted - mu * u).norm();
      if (residual <= tol * std::max(1.0, std::abs(mu))) {
        estimate.converged = true;
        break;
      }
      const double norm = shifted.norm();
      if (norm == 0.0) {  // H u = sigma u exactly: fully degenerate spectrum
        mu = 0.0;
        residual = 0.0;
        estimate.converged = true;
        break;
      }
      u = shifted / norm;
    }
    if (!estimate.converged || mu >= -tol * std::max(1.0, std::abs(mu))) break;
    sigma *= 3.0;
  }
  estimate.value = sigma - mu;
  estimate.error_bound = estimate.converged ? std::max(residual, tol) : residual;
  estimate.iterations = total_iters;
  return estimate;
}

StationarityReport certify(const FiniteSumObjective& obj, const Eigen::VectorXd& x,
                           double epsilon, double rho, Rng& rng) {
  if (!(epsilon > 0.0) || !(rho > 0.0))
    throw std::invalid_argument("certify: epsilon and rho must be positive");
  StationarityReport report;
  report.epsilon = epsilon;
  report.rho = rho;
  report.in_domain = obj.in_domain(x);
  report.grad_norm = obj.full_gradient(x).norm();

  const EigenEstimate eig = smallest_eigenvalue(obj, x, 1e-6, 10000, rng);
  report.lambda_min_estimate = eig.value;
  report.lambda_min_error_bound = eig.error_bound;
  report.eig_converged = eig.converged;

  const double curvature_floor = -std::sqrt(rho * epsilon);
  if (report.grad_norm <= epsilon) {
    report.verdict = (report.lambda_min_estimate + report.lambda_min_error_bound >=
                      curvature_floor)
                         ? Stationarity::second_order
                         : Stationarity::first_order;
  } else {
    report.verdict = Stationarity::neither;
  }
  return report;
}

const char* to_string(Stationarity verdict) {
  switch (verdict) {
    case Stationarity::neither: return "neither";
    case Stationarity::first_order: return "first_order";
    case Stationarity::second_order: return "second_order";
  }
  return "unknown";
}

VarianceProbeResult variance_probe(const FiniteSumObjective& obj, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& snapshot, int b, int trials, Rng& rng,
                                   std::optional<double> lipschitz_l) {
  if (trials < 100) throw std::invalid_argument("variance_probe: needs trials >= 100");
  if (b < 1) throw std::invalid_argument("variance_probe: minibatch must be >= 1");
  const double distance = (x - snapshot).norm();
  if (distance == 0.0)
    throw std::invalid_argument("variance_probe: x must differ from the snapshot");
  const double l = lipschitz_l ? *lipschitz_l : obj.lipschitz_l().value_or(0.0);
  if (!(l > 0.0))
    throw std::invalid_argument("variance_probe: needs a Lipschitz constant (declared or given)");

  EpochContext ctx;
  ctx.snapshot = snapshot;
  ctx.snapshot_gradient = obj.full_gradient(snapshot);
  ctx.shift = Eigen::VectorXd::Zero(obj.dim());
  const Eigen::VectorXd grad = obj.full_gradient(x);

  GradCounter scratch;
  const double scale = std::sqrt(static_cast<double>(b)) / (l * distance);
  std::vector<double> ratios;
  ratios.reserve(static_cast<std::size_t>(trials));
  double mean_err_sq = 0.0;
  Eigen::VectorXd mean_estimate = Eigen::VectorXd::Zero(obj.dim());
  Eigen::VectorXd sq_sum = Eigen::VectorXd::Zero(obj.dim());
  const int n = obj.component_count();
  for (int trial = 0; trial < trials; ++trial) {
    const std::vector<int> batch = sample_minibatch(n, b, rng);
    const Eigen::VectorXd v = gradient_estimate(obj, x, ctx, batch, scratch);
    const double err = (v - grad).norm();
    ratios.push_back(scale * err);
    mean_err_sq += err * err;
    mean_estimate += v;
    sq_sum += v.cwiseProduct(v);
  }
  mean_err_sq /= static_cast<double>(trials);
  mean_estimate /= static_cast<double>(trials);
  const Eigen::VectorXd variance =
      (sq_sum / trials - mean_estimate.cwiseProduct(mean_estimate)).cwiseMax(0.0);
  const Eigen::VectorXd component_se = (variance / trials).cwiseSqrt();

  VarianceProbeResult result;
  result.p50 = stats::percentile(ratios, 50.0);
  result.p90 = stats::percentile(ratios, 90.0);
  result.p99 = stats::percentile(ratios, 99.0);
  result.max = *std::max_element(ratios.begin(), ratios.end());
  result.mean_ratio = 0.0;
  for (double r : ratios) result.mean_ratio += r;
  result.mean_ratio /= static_cast<double>(trials);
  result.mean_error_sq = mean_err_sq;
  result.mean_estimate = mean_estimate;
  result.component_se = component_se;
  result.gradient = grad;
  result.distance = distance;
  result.lipschitz_l = l;
  result.minibatch = b;
  result.trials = trials;
  return result;
}

std::vector<CoupledStepRecord> coupled_variance_probe(const FiniteSumObjective& obj,
                                                      const CoupledPair& pair, int steps,
                                                      const SvrgConfig& config, Rng& rng) {
  if (steps < 1) throw std::invalid_argument("coupled_variance_probe: steps must be >= 1");
  if (pair.start.size() != obj.dim() || pair.start_prime.size() != obj.dim())
    throw std::invalid_argument("coupled_variance_probe: start points have wrong dimension");
  const int n = obj.component_count();
  const int m = config.epoch_length;
  Rng batch_rng = rng.fork("minibatch");
  GradCounter scratch;

  Eigen::VectorXd x = pair.start;
  Eigen::VectorXd xp = pair.start_prime;
  EpochContext ctx, ctxp;
  ctx.shift = Eigen::VectorXd::Zero(obj.dim());
  ctxp.shift = ctx.shift;

  std::vector<CoupledStepRecord> records;
  records.reserve(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    if (!x.allFinite() || !xp.allFinite()) break;  // truncated record
    if (t % m == 0) {
      ctx.snapshot = x;
      obj.full_gradient(x, ctx.snapshot_gradient);
      ctxp.snapshot = xp;
      obj.full_gradient(xp, ctxp.snapshot_gradient);
    }
    const std::vector<int> batch = sample_minibatch(n, config.minibatch, batch_rng);
    const Eigen::VectorXd v = gradient_estimate(obj, x, ctx, batch, scratch);
    const Eigen::VectorXd vp = gradient_estimate(obj, xp, ctxp, batch, scratch);
    const Eigen::VectorXd xi = v - obj.full_gradient(x);
    const Eigen::VectorXd xip = vp - obj.full_gradient(xp);

    CoupledStepRecord rec;
    rec.t = t;
    rec.batch = batch;
    rec.xi_diff = xi - xip;
    rec.xi_diff_norm = rec.xi_diff.norm();
    const Eigen::VectorXd w = x - xp;
    const Eigen::VectorXd ws = ctx.snapshot - ctxp.snapshot;
    rec.w_minus_ws = w - ws;
    rec.w_minus_ws_norm = rec.w_minus_ws.norm();
    rec.w_norm = w.norm();
    rec.ws_norm = ws.norm();
    rec.p_t = std::max({(ctx.snapshot - pair.anchor).norm(), (ctxp.snapshot - pair.anchor).norm(),
                        (x - pair.anchor).norm(), (xp - pair.anchor).norm()});
    records.push_back(std::move(rec));

    x -= config.step_size * v;
    xp -= config.step_size * vp;
  }
  return records;
}

EmpiricalConstants estimate_constants(const FiniteSumObjective& obj, const DomainSampler& sampler,
                                      int pairs, Rng& rng) {
  if (pairs < 10) throw std::invalid_argument("estimate_constants: needs pairs >= 10");
  const int n = obj.component_count();
  const int d = obj.dim();
  const int probed_components = std::min(n, 8);

  EmpiricalConstants out;
  Eigen::VectorXd gx(d), gy(d);

  // Ratio ||D v|| / ||v|| maximized over a few power-iteration refinements of
  // v, where D maps v to the difference of Hessian-vector products at x and y.
  const auto operator_ratio = [&](const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>&
                                      apply) {
    Eigen::VectorXd v(d);
    for (Eigen::Index j = 0; j < d; ++j) v[j] = rng.normal();
    v.normalize();
    double best = 0.0;
    for (int it = 0; it < 5; ++it) {
      const Eigen::VectorXd dv = apply(v);
      const double norm = dv.norm();
      best = std::max(best, norm);
      if (norm < 1e-14) break;
      v = dv / norm;
    }
    return best;
  };

  for (int p = 0; p < pairs; ++p) {
    const Eigen::VectorXd x = sampler(rng);
    Eigen::VectorXd direction(d);
    for (Eigen::Index j = 0; j < d; ++j) direction[j] = rng.normal();
    direction.normalize();
    const double radius = 1e-3 * (1.0 + x.norm());
    const Eigen::VectorXd y = x + radius * direction;
    const double dist = (x - y).norm();

    // L over nearby pairs and an independent wide pair.
    for (int k = 0; k < probed_components; ++k) {
      const int i = rng.uniform_index(n);
      obj.component_gradient(i, x, gx);
      obj.component_gradient(i, y, gy);
      out.lipschitz_l = std::max(out.lipschitz_l, (gx - gy).norm() / dist);
    }
    const Eigen::VectorXd wide = sampler(rng);
    const double wide_dist = (x - wide).norm();
    if (wide_dist > 0.0) {
      const int i = rng.uniform_index(n);
      obj.component_gradient(i, x, gx);
      obj.component_gradient(i, wide, gy);
      out.lipschitz_l = std::max(out.lipschitz_l, (gx - gy).norm() / wide_dist);
    }

    const double rho_candidate =
        operator_ratio([&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
          return hvp(obj, x, v) - hvp(obj, y, v);
        }) /
        dist;
    out.rho = std::max(out.rho, rho_candidate);

    const int i = rng.uniform_index(n);
    const double rho_prime_candidate =
        operator_ratio([&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
          return component_hvp(obj, i, x, v) - component_hvp(obj, i, y, v);
        }) /
        dist;
    out.rho_prime = std::max(out.rho_prime, rho_prime_candidate);
  }
  return out;
}

}  // namespace stabsvrg
