#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "stabsvrg/verify.hpp"

#include "stabsvrg/bounded_saddle.hpp"
#include "stabsvrg/matrix_sensing.hpp"
#include "stabsvrg/quadratic_ensemble.hpp"
#include "stabsvrg/stats.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <Eigen/Dense>

using namespace stabsvrg;
using test_util::random_vector;
using test_util::rel_err;

TEST_CASE("fd gradient is exact on linear and quadratic functions") {
  Eigen::VectorXd g(3);
  g << 1.0, -2.0, 0.5;
  const QuadraticEnsemble linear({Eigen::MatrixXd::Zero(3, 3)}, g);
  Rng rng(90);
  const Eigen::VectorXd x = random_vector(3, rng);
  CHECK(rel_err(fd_gradient(linear, x, 0.5), g) < 1e-12);

  const QuadraticEnsemble quad = test_util::saddle_ensemble(5, 3, 1.0, 0.2, 91);
  const Eigen::VectorXd y = random_vector(5, rng);
  CHECK(rel_err(fd_gradient(quad, y, 1e-3), quad.full_gradient(y)) < 1e-9);
  CHECK_THROWS_AS(fd_gradient(quad, y, 0.0), std::invalid_argument);
}

TEST_CASE("hvp: exact on quadratics, rejects zero directions") {
  const QuadraticEnsemble quad = test_util::saddle_ensemble(6, 4, 1.0, 0.3, 92);
  Rng rng(93);
  const Eigen::VectorXd x = random_vector(6, rng);
  const Eigen::VectorXd v = random_vector(6, rng);
  CHECK(rel_err(hvp(quad, x, v), quad.mean_matrix() * v) < 1e-10);
  CHECK_THROWS_AS(hvp(quad, x, Eigen::VectorXd::Zero(6)), std::invalid_argument);
}

TEST_CASE("hvp agrees with the sensing Hessian form and is symmetric") {
  Rng rng(94);
  const MatrixSensingInstance inst = MatrixSensingInstance::make(5, 1, 50, rng);
  const Eigen::VectorXd xu = random_vector(inst.dim(), rng, 0.5);
  const Eigen::VectorXd xz = random_vector(inst.dim(), rng);
  const double form = inst.hessian_form(inst.unflatten(xu), inst.unflatten(xz));
  CHECK(rel_err(xz.dot(hvp(inst, xu, xz)), form) < 1e-4);

  const Eigen::VectorXd u1 = random_vector(inst.dim(), rng);
  const Eigen::VectorXd u2 = random_vector(inst.dim(), rng);
  const double lhs = u2.dot(hvp(inst, xu, u1));
  const double rhs = u1.dot(hvp(inst, xu, u2));
  CHECK(rel_err(lhs, rhs) < 1e-6);
}

TEST_CASE("smallest eigenvalue: known spectra") {
  Eigen::MatrixXd h(2, 2);
  h << 1.0, 0.0, 0.0, -1.0;
  const QuadraticEnsemble diag({h}, Eigen::VectorXd::Zero(2));
  Rng rng(95);
  const EigenEstimate est = smallest_eigenvalue(diag, Eigen::VectorXd::Zero(2), 1e-10, 5000, rng);
  CHECK(est.converged);
  CHECK(std::abs(est.value + 1.0) < 1e-8);

  const QuadraticEnsemble identity({Eigen::MatrixXd::Identity(3, 3)}, Eigen::VectorXd::Zero(3));
  const EigenEstimate one = smallest_eigenvalue(identity, Eigen::VectorXd::Zero(3), 1e-8, 100, rng);
  CHECK(one.converged);
  CHECK(std::abs(one.value - 1.0) < 1e-8);
}

TEST_CASE("smallest eigenvalue: matches the dense eigensolver") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const QuadraticEnsemble ensemble = test_util::saddle_ensemble(50, 5, 0.7, 0.4, 96 + seed);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dense(ensemble.mean_matrix());
    const double want = dense.eigenvalues().minCoeff();
    Rng rng(200 + seed);
    const EigenEstimate est =
        smallest_eigenvalue(ensemble, Eigen::VectorXd::Zero(50), 1e-7, 20000, rng);
    CHECK(std::abs(est.value - want) < 1e-3);
    // Sandwich: the dense value lies inside the reported interval.
    CHECK(want >= est.value - est.error_bound - 1e-9);
    CHECK(want <= est.value + est.error_bound + 1e-9);
  }
}

TEST_CASE("smallest eigenvalue: recovers when the declared shift undershoots") {
  // At x2 = 2.4 sqrt(gamma) the curvature exceeds the declared constant, so
  // the first shift is too small; the estimator must regrow it instead of
  // reporting the top of the spectrum.
  Rng make_rng(205);
  const double gamma = 1.0;
  const BoundedSaddle2D saddle(gamma, 6, 0.0, make_rng);
  Eigen::VectorXd x(2);
  x << 0.0, 2.4 * std::sqrt(gamma);
  const Eigen::Matrix2d h = saddle.mean_hessian(x);
  const double want = std::min(h(0, 0), h(1, 1));
  REQUIRE(h(1, 1) > *saddle.lipschitz_l());  // the shift genuinely undershoots
  Rng rng(206);
  const EigenEstimate est = smallest_eigenvalue(saddle, x, 1e-8, 20000, rng);
  CHECK(est.converged);
  CHECK(std::abs(est.value - want) < 1e-3);
}

TEST_CASE("certify: closed-form minimum and saddle of the bounded objective") {
  Rng make_rng(97);
  const double gamma = 1.0;
  const BoundedSaddle2D saddle(gamma, 8, 0.0, make_rng);
  Eigen::VectorXd minimum(2);
  minimum << 0.0, std::sqrt(gamma);
  Rng rng(98);
  const StationarityReport at_min = certify(saddle, minimum, 1e-2, 6.0, rng);
  CHECK(at_min.verdict == Stationarity::second_order);
  CHECK(at_min.in_domain);

  Rng rng2(99);
  const StationarityReport at_saddle =
      certify(saddle, Eigen::VectorXd::Zero(2), 1e-2, 6.0, rng2);
  CHECK(at_saddle.verdict == Stationarity::first_order);  // curvature fails
  CHECK(at_saddle.grad_norm <= 1e-2);
  CHECK(at_saddle.lambda_min_estimate + at_saddle.lambda_min_error_bound <
        -std::sqrt(6.0 * 1e-2));

  // Purity: identical seeds give identical reports.
  Rng ra(123), rb(123);
  const StationarityReport r1 = certify(saddle, minimum, 1e-2, 6.0, ra);
  const StationarityReport r2 = certify(saddle, minimum, 1e-2, 6.0, rb);
  CHECK(r1.grad_norm == r2.grad_norm);
  CHECK(r1.lambda_min_estimate == r2.lambda_min_estimate);
  CHECK(r1.lambda_min_error_bound == r2.lambda_min_error_bound);
}

TEST_CASE("certify: out-of-domain points are flagged") {
  Rng rng(100);
  const MatrixSensingInstance inst = MatrixSensingInstance::make(4, 1, 30, rng);
  const Eigen::VectorXd far = 10.0 * random_vector(inst.dim(), rng).normalized() * 4.0;
  Rng cert_rng(101);
  const StationarityReport report = certify(inst, far, 1e-2, 52.8, cert_rng);
  CHECK(!report.in_domain);
}

TEST_CASE("variance probe: degenerate cases and stability in b") {
  const QuadraticEnsemble ensemble = test_util::saddle_ensemble(8, 30, 1.0, 0.5, 102);
  Rng rng(103);
  const Eigen::VectorXd snapshot = random_vector(8, rng);
  const Eigen::VectorXd x = snapshot + random_vector(8, rng, 0.4);
  CHECK_THROWS_AS(variance_probe(ensemble, snapshot, snapshot, 8, 200, rng),
                  std::invalid_argument);

  const QuadraticEnsemble no_spread = test_util::saddle_ensemble(8, 30, 1.0, 0.0, 104);
  const VarianceProbeResult zero = variance_probe(no_spread, x, snapshot, 8, 200, rng);
  CHECK(zero.max < 1e-12);  // identical components; only accumulation round-off remains

  // The sqrt(b) normalization keeps the 99th percentile flat across batch sizes.
  double p99[3];
  int k = 0;
  const double z = stats::normal_quantile(1.0 - 0.01 / (2.0 * 8));  // joint 99% over d = 8
  for (int b : {25, 100, 400}) {
    const VarianceProbeResult r = variance_probe(ensemble, x, snapshot, b, 500, rng);
    p99[k++] = r.p99;
    // Unbiasedness: the mean estimate lies in the componentwise confidence
    // ellipsoid around the true gradient.
    for (int j = 0; j < 8; ++j)
      CHECK(std::abs(r.mean_estimate[j] - r.gradient[j]) <= z * r.component_se[j] + 1e-12);
  }
  CHECK(p99[0] < 2.5 * p99[2]);
  CHECK(p99[2] < 2.5 * p99[0]);
}

TEST_CASE("coupled probe: identical starts stay identical") {
  const QuadraticEnsemble ensemble = test_util::saddle_ensemble(6, 12, 1.0, 0.5, 105);
  Rng rng(106);
  CoupledPair pair;
  pair.anchor = Eigen::VectorXd::Zero(6);
  pair.start = random_vector(6, rng, 0.1);
  pair.start_prime = pair.start;
  SvrgConfig config{.epoch_length = 5, .minibatch = 4, .step_size = 0.02, .epochs = 1};
  const auto records = coupled_variance_probe(ensemble, pair, 25, config, rng);
  REQUIRE(records.size() == 25);
  for (const auto& rec : records) {
    CHECK(rec.w_norm == 0.0);
    CHECK(rec.xi_diff_norm == 0.0);
  }
}

TEST_CASE("coupled probe: quadratic identity is exact") {
  const QuadraticEnsemble ensemble = test_util::saddle_ensemble(8, 15, 1.0, 0.6, 107);
  Rng rng(108);
  CoupledPair pair;
  pair.anchor = Eigen::VectorXd::Zero(8);
  pair.start = random_vector(8, rng, 0.05);
  pair.start_prime = pair.start + random_vector(8, rng, 0.01);
  SvrgConfig config{.epoch_length = 6, .minibatch = 5, .step_size = 0.03, .epochs = 1};
  const auto records = coupled_variance_probe(ensemble, pair, 30, config, rng);
  REQUIRE(records.size() == 30);
  for (const auto& rec : records) {
    Eigen::VectorXd want = Eigen::VectorXd::Zero(8);
    for (int i : rec.batch)
      want += (ensemble.component_matrix(i) - ensemble.mean_matrix()) * rec.w_minus_ws;
    want /= static_cast<double>(rec.batch.size());
    CHECK((rec.xi_diff - want).norm() <= 1e-12 * std::max(1.0, want.norm()));
  }
}

TEST_CASE("coupled probe: sensing errors respect the fitted two-regime bound") {
  Rng rng(109);
  const MatrixSensingInstance inst = MatrixSensingInstance::make(6, 1, 200, rng);
  Rng cons_rng(110);
  const EmpiricalConstants consts = estimate_constants(
      inst,
      [&](Rng& r) {
        Eigen::VectorXd x(inst.dim());
        for (int i = 0; i < inst.dim(); ++i) x[i] = 0.4 * r.normal();
        return x;
      },
      10, cons_rng);

  SvrgConfig config{.epoch_length = 8, .minibatch = 16, .step_size = 0.005, .epochs = 1};
  const auto bound = [&](const CoupledStepRecord& r) {
    const double two_sided =
        std::min(consts.lipschitz_l * r.w_minus_ws_norm +
                     consts.rho_prime * r.p_t * (r.w_norm + r.ws_norm),
                 consts.lipschitz_l * (r.w_norm + r.ws_norm));
    return two_sided / std::sqrt(static_cast<double>(config.minibatch));
  };

  // Fit c as the pooled 99th percentile of the error-to-bound ratio, then
  // check its coverage on the pool and, with margin, on a held-out run.
  const Eigen::VectorXd anchor = inst.flatten(inst.ground_truth());
  const auto run_records = [&](std::uint64_t seed) {
    Rng run_rng(seed);
    CoupledPair pair;
    pair.anchor = anchor;
    pair.start = anchor + random_vector(inst.dim(), run_rng, 0.02);
    pair.start_prime = pair.start + random_vector(inst.dim(), run_rng, 0.005);
    return coupled_variance_probe(inst, pair, 40, config, run_rng);
  };

  std::vector<double> pool_ratios;
  for (std::uint64_t seed : {111ULL, 500ULL, 501ULL, 502ULL, 503ULL})
    for (const auto& rec : run_records(seed))
      if (bound(rec) > 0.0) pool_ratios.push_back(rec.xi_diff_norm / bound(rec));
  REQUIRE(pool_ratios.size() >= 190);
  const double c_fit = stats::percentile(pool_ratios, 99.0);
  CHECK(c_fit > 0.0);
  CHECK(c_fit < 2.0);  // an O(1) constant, not a blowup

  int pool_covered = 0;
  for (double r : pool_ratios) pool_covered += r <= c_fit ? 1 : 0;
  CHECK(pool_covered >= static_cast<int>(pool_ratios.size()) * 99 / 100);

  int fresh_covered = 0, fresh_total = 0;
  for (const auto& rec : run_records(777)) {
    ++fresh_total;
    if (rec.xi_diff_norm <= 2.0 * c_fit * bound(rec) + 1e-15) ++fresh_covered;
  }
  CHECK(fresh_total == 40);
  CHECK(fresh_covered >= 39);
}

TEST_CASE("estimated constants: quadratics have constant Hessians") {
  const QuadraticEnsemble ensemble = test_util::saddle_ensemble(8, 12, 1.0, 0.4, 112);
  Rng rng(113);
  const EmpiricalConstants consts = estimate_constants(
      ensemble, [](Rng& r) { return test_util::random_vector(8, r); }, 10, rng);
  CHECK(consts.rho <= 1e-6);
  CHECK(consts.rho_prime <= 1e-6);
  CHECK(consts.lipschitz_l <= *ensemble.lipschitz_l() * (1.0 + 1e-9));
  CHECK(consts.lipschitz_l > 0.2 * *ensemble.lipschitz_l());

  Eigen::VectorXd g(4);
  g << 1.0, 2.0, 3.0, 4.0;
  const QuadraticEnsemble linear({Eigen::MatrixXd::Zero(4, 4)}, g);
  Rng rng2(114);
  const EmpiricalConstants flat = estimate_constants(
      linear, [](Rng& r) { return test_util::random_vector(4, r); }, 10, rng2);
  CHECK(flat.lipschitz_l <= 1e-9);
}
