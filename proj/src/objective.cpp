#include "stabsvrg/objective.hpp"

#include "stabsvrg/parallel.hpp"

#include <stdexcept>

namespace stabsvrg {

double FiniteSumObjective::value(const Eigen::VectorXd& x) const {
  const int n = component_count();
  const double total =
      parallel::sum_scalars(n, [&](int i) { return component_value(i, x); });
  return total / static_cast<double>(n);
}

void FiniteSumObjective::full_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
  const int n = component_count();
  parallel::sum_terms(
      n, dim(),
      [&](int i, auto& acc, Eigen::VectorXd& scratch) {
        component_gradient(i, x, scratch);
        acc += scratch;
      },
      grad);
  grad /= static_cast<double>(n);
}

Eigen::VectorXd FiniteSumObjective::component_gradient(int i, const Eigen::VectorXd& x) const {
  Eigen::VectorXd grad(dim());
  component_gradient(i, x, grad);
  return grad;
}

Eigen::VectorXd FiniteSumObjective::full_gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd grad(dim());
  full_gradient(x, grad);
  return grad;
}

bool FiniteSumObjective::in_domain(const Eigen::VectorXd&) const { return true; }

std::optional<double> FiniteSumObjective::optimum_value() const { return std::nullopt; }

void FiniteSumObjective::check_component_index(int i) const {
  if (i < 0 || i >= component_count())
    throw std::out_of_range("FiniteSumObjective: component index out of range");
}

}  // namespace stabsvrg
