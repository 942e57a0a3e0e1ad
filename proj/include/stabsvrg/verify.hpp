#pragma once

#include "stabsvrg/objective.hpp"
#include "stabsvrg/rng.hpp"
#include "stabsvrg/svrg.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <vector>

namespace stabsvrg {

// Finite-difference step defaults: a standard trade-off between truncation
// and round-off at 64-bit precision.
inline double fd_gradient_step(const Eigen::VectorXd& x) { return 1e-5 * (1.0 + x.norm()); }
inline double fd_hvp_step(const Eigen::VectorXd& x) { return 1e-4 * (1.0 + x.norm()); }

/// Central-difference gradient of the average function (oracle; exact on
/// quadratics up to round-off).
Eigen::VectorXd fd_gradient(const FiniteSumObjective& obj, const Eigen::VectorXd& x, double h);

/// Central-difference gradient of a single component.
Eigen::VectorXd fd_component_gradient(const FiniteSumObjective& obj, int i,
                                      const Eigen::VectorXd& x, double h);

/// Hessian-vector product of the average function via central differences of
/// the gradient along v/||v||, rescaled by ||v||.
Eigen::VectorXd hvp(const FiniteSumObjective& obj, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& v, double h = 0.0);

/// Same for a single component.
Eigen::VectorXd component_hvp(const FiniteSumObjective& obj, int i, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& v, double h = 0.0);

struct EigenEstimate {
  double value = 0.0;        // smallest-eigenvalue estimate
  double error_bound = 0.0;  // residual-based bound, wide when not converged
  bool converged = false;
  int iterations = 0;
};

/// Smallest eigenvalue of the Hessian at x via power iteration on the
/// shifted operator sigma I - H (sigma = 1.1 L), using only Hessian-vector
/// products. The error bound is the eigenpair residual norm.
EigenEstimate smallest_eigenvalue(const FiniteSumObjective& obj, const Eigen::VectorXd& x,
                                  double tol, int max_iters, Rng& rng);

enum class Stationarity { neither, first_order, second_order };

struct StationarityReport {
  double grad_norm = 0.0;
  double lambda_min_estimate = 0.0;
  double lambda_min_error_bound = 0.0;
  double epsilon = 0.0;
  double rho = 0.0;
  Stationarity verdict = Stationarity::neither;
  bool in_domain = true;   // constants are only declared inside the domain
  bool eig_converged = false;
};

/// Checks x against the (epsilon, sqrt(rho epsilon)) thresholds:
/// second_order needs grad_norm <= epsilon and
/// lambda_min_estimate + error_bound >= -sqrt(rho epsilon); first_order needs
/// only the gradient condition. Pure: same inputs and seed give the same
/// report.
StationarityReport certify(const FiniteSumObjective& obj, const Eigen::VectorXd& x,
                           double epsilon, double rho, Rng& rng);

const char* to_string(Stationarity verdict);

struct VarianceProbeResult {
  double p50 = 0.0;  // percentiles of sqrt(b) ||v - grad f(x)|| / (L dist)
  double p90 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
  double mean_ratio = 0.0;
  double mean_error_sq = 0.0;       // mean ||v - grad f(x)||^2
  Eigen::VectorXd mean_estimate;    // mean of v across trials
  Eigen::VectorXd component_se;     // per-coordinate standard error of the mean
  Eigen::VectorXd gradient;         // grad f(x)
  double distance = 0.0;            // ||x - snapshot||
  double lipschitz_l = 0.0;
  int minibatch = 0;
  int trials = 0;
};

/// Distribution of the normalized estimator error at a fixed (x, snapshot)
/// pair over independent minibatches; the 99th percentile is the empirical
/// variance constant used by the conditional decrease tests.
VarianceProbeResult variance_probe(const FiniteSumObjective& obj, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& snapshot, int b, int trials, Rng& rng,
                                   std::optional<double> lipschitz_l = std::nullopt);

/// Two iterate sequences sharing minibatch draws, differing only in their
/// starting points; their difference isolates the estimator noise structure.
struct CoupledPair {
  Eigen::VectorXd start;
  Eigen::VectorXd start_prime;
  Eigen::VectorXd anchor;
};

struct CoupledStepRecord {
  int t = 0;
  double xi_diff_norm = 0.0;     // ||xi_t - xi_t'||
  double w_minus_ws_norm = 0.0;  // ||w_t - w_s(t)||
  double w_norm = 0.0;           // ||w_t||
  double ws_norm = 0.0;          // ||w_s(t)||
  double p_t = 0.0;              // max distance of the four points to anchor
  std::vector<int> batch;        // shared minibatch of this step
  Eigen::VectorXd xi_diff;       // xi_t - xi_t'
  Eigen::VectorXd w_minus_ws;    // w_t - w_s(t)
};

/// Runs both sequences in lockstep under SVRG dynamics (shared batches,
/// snapshots refreshed every m steps) and records the per-step quantities of
/// the coupled-variance bound. Truncates on divergence.
std::vector<CoupledStepRecord> coupled_variance_probe(const FiniteSumObjective& obj,
                                                      const CoupledPair& pair, int steps,
                                                      const SvrgConfig& config, Rng& rng);

struct EmpiricalConstants {
  double lipschitz_l = 0.0;     // L
  double rho = 0.0;             // average-function Hessian Lipschitz
  double rho_prime = 0.0;       // component Hessian Lipschitz
};

using DomainSampler = std::function<Eigen::VectorXd(Rng&)>;

/// Empirical lower bounds on (L, rho, rho') from sampled point pairs. The
/// Hessian-difference direction is refined by a few power-iteration steps so
/// the bound tracks the operator norm instead of a random slice.
EmpiricalConstants estimate_constants(const FiniteSumObjective& obj, const DomainSampler& sampler,
                                      int pairs, Rng& rng);

}  // namespace stabsvrg
