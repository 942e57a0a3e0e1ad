#pragma once

#include "stabsvrg/objective.hpp"
#include "stabsvrg/rng.hpp"

#include <Eigen/Core>

#include <vector>

namespace stabsvrg {

/// Ensemble of quadratic components f_i(x) = 0.5 x' H_i x + g' x with
/// symmetric H_i. Individual Hessians are constant, so the component
/// Hessian-Lipschitz constant is exactly zero; this is the extreme case the
/// coupled-sequence identities are checked against.
class QuadraticEnsemble final : public FiniteSumObjective {
 public:
  QuadraticEnsemble(std::vector<Eigen::MatrixXd> components, Eigen::VectorXd linear);

  using FiniteSumObjective::component_gradient;
  using FiniteSumObjective::full_gradient;

  int component_count() const override { return static_cast<int>(components_.size()); }
  int dim() const override { return static_cast<int>(linear_.size()); }

  double component_value(int i, const Eigen::VectorXd& x) const override;
  void component_gradient(int i, const Eigen::VectorXd& x, Eigen::VectorXd& grad) const override;

  // Closed forms through the mean matrix.
  double value(const Eigen::VectorXd& x) const override;
  void full_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const override;

  std::optional<double> optimum_value() const override;

  const Eigen::MatrixXd& component_matrix(int i) const;
  const Eigen::MatrixXd& mean_matrix() const { return mean_; }
  const Eigen::VectorXd& linear_term() const { return linear_; }

 private:
  std::vector<Eigen::MatrixXd> components_;
  Eigen::MatrixXd mean_;
  Eigen::VectorXd linear_;
};

struct QuadraticEnsembleOptions {
  int dim = 2;
  int components = 1;
  double gamma = 1.0;     // prescribed -lambda_min of the mean matrix
  double spread = 0.0;    // operator-norm scale of the zero-sum noise
  double l_cap = 1e3;     // construction fails if any ||H_i|| exceeds this
};

/// Mean matrix with lambda_min = -gamma (remaining eigenvalues in [0.25, 1])
/// under a random rotation; component noise N_i is symmetric, scaled to
/// operator norm `spread`, with the last one set to minus the sum of the
/// others so the noise cancels exactly.
QuadraticEnsemble make_quadratic_ensemble(const QuadraticEnsembleOptions& opts, Rng& rng);

}  // namespace stabsvrg
