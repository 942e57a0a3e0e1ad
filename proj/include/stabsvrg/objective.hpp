#pragma once

#include <Eigen/Core>

#include <optional>

namespace stabsvrg {

/// Finite-sum objective f(x) = (1/n) sum_i f_i(x).
///
/// Objectives are immutable after construction; concurrent read-only
/// evaluation from multiple workers is safe. The default value/full_gradient
/// average the components through block-deterministic reductions, so results
/// do not depend on the thread count.
class FiniteSumObjective {
 public:
  virtual ~FiniteSumObjective() = default;

  virtual int component_count() const = 0;
  virtual int dim() const = 0;

  virtual double component_value(int i, const Eigen::VectorXd& x) const = 0;
  virtual void component_gradient(int i, const Eigen::VectorXd& x,
                                  Eigen::VectorXd& grad) const = 0;

  virtual double value(const Eigen::VectorXd& x) const;
  virtual void full_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;

  Eigen::VectorXd component_gradient(int i, const Eigen::VectorXd& x) const;
  Eigen::VectorXd full_gradient(const Eigen::VectorXd& x) const;

  /// Admissible domain; algorithms record (never enforce) violations.
  virtual bool in_domain(const Eigen::VectorXd& x) const;

  /// Known optimal value f*, when available analytically.
  virtual std::optional<double> optimum_value() const;

  // Declared smoothness constants; empty when unknown.
  std::optional<double> lipschitz_l() const { return lipschitz_l_; }
  std::optional<double> hessian_lipschitz() const { return hessian_lipschitz_; }
  std::optional<double> component_hessian_lipschitz() const {
    return component_hessian_lipschitz_;
  }

 protected:
  void check_component_index(int i) const;

  std::optional<double> lipschitz_l_;                  // L
  std::optional<double> hessian_lipschitz_;            // rho (average function)
  std::optional<double> component_hessian_lipschitz_;  // rho' (individual)
};

}  // namespace stabsvrg
