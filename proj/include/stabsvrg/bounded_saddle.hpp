#pragma once

#include "stabsvrg/objective.hpp"
#include "stabsvrg/rng.hpp"

#include <Eigen/Core>

#include <vector>

namespace stabsvrg {

/// Two-dimensional strict-saddle objective
///   f(x) = 0.5 x1^2 - (gamma/2) x2^2 + 0.25 x2^4,
/// split into n components by zero-sum quadratic noise 0.5 x' E_i x.
///
/// The origin is a strict saddle (lambda_min of the Hessian is -gamma) and
/// the global minima sit at (0, +-sqrt(gamma)) with value -gamma^2/4, so full
/// escape-to-minimum runs can be certified. Constants are declared on the
/// admissible ball ||x|| <= 3 sqrt(gamma).
class BoundedSaddle2D final : public FiniteSumObjective {
 public:
  BoundedSaddle2D(double gamma, int components, double spread, Rng& rng);

  /// Rebuild from stored noise matrices (deserialization).
  BoundedSaddle2D(double gamma, std::vector<Eigen::Matrix2d> noise);

  using FiniteSumObjective::component_gradient;
  using FiniteSumObjective::full_gradient;

  int component_count() const override { return static_cast<int>(noise_.size()); }
  int dim() const override { return 2; }

  double component_value(int i, const Eigen::VectorXd& x) const override;
  void component_gradient(int i, const Eigen::VectorXd& x, Eigen::VectorXd& grad) const override;

  double value(const Eigen::VectorXd& x) const override;
  void full_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const override;

  bool in_domain(const Eigen::VectorXd& x) const override;
  std::optional<double> optimum_value() const override;

  double gamma() const { return gamma_; }
  const Eigen::Matrix2d& noise_matrix(int i) const;

  /// Hessian of the average function at x (analytic).
  Eigen::Matrix2d mean_hessian(const Eigen::VectorXd& x) const;

 private:
  void declare_constants();

  double gamma_;
  double domain_radius_;
  std::vector<Eigen::Matrix2d> noise_;
};

}  // namespace stabsvrg
