#pragma once

#include "stabsvrg/objective.hpp"

#include <Eigen/Core>

#include <utility>

namespace stabsvrg {

/// View of a base objective with a linear term removed around an anchor:
///   f_hat_i(x) = f_i(x) - <shift, x - anchor>.
/// When shift = grad f(anchor), the anchor becomes an exact first-order
/// stationary point of the average. Smoothness constants are unchanged.
class ShiftedObjective final : public FiniteSumObjective {
 public:
  ShiftedObjective(const FiniteSumObjective& base, Eigen::VectorXd anchor, Eigen::VectorXd shift)
      : base_(base), anchor_(std::move(anchor)), shift_(std::move(shift)) {
    lipschitz_l_ = base.lipschitz_l();
    hessian_lipschitz_ = base.hessian_lipschitz();
    component_hessian_lipschitz_ = base.component_hessian_lipschitz();
  }

  using FiniteSumObjective::component_gradient;
  using FiniteSumObjective::full_gradient;

  int component_count() const override { return base_.component_count(); }
  int dim() const override { return base_.dim(); }

  double component_value(int i, const Eigen::VectorXd& x) const override {
    return base_.component_value(i, x) - shift_.dot(x - anchor_);
  }

  void component_gradient(int i, const Eigen::VectorXd& x, Eigen::VectorXd& grad) const override {
    base_.component_gradient(i, x, grad);
    grad -= shift_;
  }

  double value(const Eigen::VectorXd& x) const override {
    return base_.value(x) - shift_.dot(x - anchor_);
  }

  void full_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const override {
    base_.full_gradient(x, grad);
    grad -= shift_;
  }

  bool in_domain(const Eigen::VectorXd& x) const override { return base_.in_domain(x); }

 private:
  const FiniteSumObjective& base_;
  Eigen::VectorXd anchor_;
  Eigen::VectorXd shift_;
};

}  // namespace stabsvrg
