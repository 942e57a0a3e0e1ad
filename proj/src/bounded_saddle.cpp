#include "stabsvrg/bounded_saddle.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace stabsvrg {

BoundedSaddle2D::BoundedSaddle2D(double gamma, int components, double spread, Rng& rng)
    : gamma_(gamma), domain_radius_(3.0 * std::sqrt(gamma)) {
  if (gamma <= 0.0) throw std::invalid_argument("BoundedSaddle2D: gamma must be positive");
  if (components < 1) throw std::invalid_argument("BoundedSaddle2D: needs components >= 1");
  if (spread < 0.0) throw std::invalid_argument("BoundedSaddle2D: spread must be >= 0");

  noise_.assign(static_cast<std::size_t>(components), Eigen::Matrix2d::Zero());
  if (spread > 0.0 && components > 1) {
    Eigen::Matrix2d sum = Eigen::Matrix2d::Zero();
    for (int i = 0; i + 1 < components; ++i) {
      Eigen::Matrix2d g;
      g << rng.normal(), rng.normal(), rng.normal(), rng.normal();
      Eigen::Matrix2d sym = 0.5 * (g + g.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(sym, Eigen::EigenvaluesOnly);
      sym *= spread / eig.eigenvalues().cwiseAbs().maxCoeff();
      noise_[static_cast<std::size_t>(i)] = sym;
      sum += sym;
    }
    noise_.back() = -sum;
  }
  declare_constants();
}

BoundedSaddle2D::BoundedSaddle2D(double gamma, std::vector<Eigen::Matrix2d> noise)
    : gamma_(gamma), domain_radius_(3.0 * std::sqrt(gamma)), noise_(std::move(noise)) {
  if (gamma <= 0.0) throw std::invalid_argument("BoundedSaddle2D: gamma must be positive");
  if (noise_.empty()) throw std::invalid_argument("BoundedSaddle2D: needs components >= 1");
  declare_constants();
}

void BoundedSaddle2D::declare_constants() {
  // Curvature along x2 ranges over [-gamma, 5.75 gamma] on the operating ball
  // ||x|| <= 1.5 sqrt(gamma) that standard runs stay inside.
  double max_noise = 0.0;
  for (const auto& e : noise_) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(e, Eigen::EigenvaluesOnly);
    max_noise = std::max(max_noise, eig.eigenvalues().cwiseAbs().maxCoeff());
  }
  lipschitz_l_ = std::max(1.0, 5.75 * gamma_) + max_noise;
  hessian_lipschitz_ = 6.0;
  component_hessian_lipschitz_ = 6.0;
}

double BoundedSaddle2D::component_value(int i, const Eigen::VectorXd& x) const {
  check_component_index(i);
  return value(x) + 0.5 * x.dot(noise_[static_cast<std::size_t>(i)] * x);
}

void BoundedSaddle2D::component_gradient(int i, const Eigen::VectorXd& x,
                                         Eigen::VectorXd& grad) const {
  check_component_index(i);
  full_gradient(x, grad);
  grad += noise_[static_cast<std::size_t>(i)] * x;
}

double BoundedSaddle2D::value(const Eigen::VectorXd& x) const {
  const double x1 = x[0];
  const double x2 = x[1];
  return 0.5 * x1 * x1 - 0.5 * gamma_ * x2 * x2 + 0.25 * x2 * x2 * x2 * x2;
}

void BoundedSaddle2D::full_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
  grad.resize(2);
  grad[0] = x[0];
  grad[1] = -gamma_ * x[1] + x[1] * x[1] * x[1];
}

bool BoundedSaddle2D::in_domain(const Eigen::VectorXd& x) const {
  return x.norm() <= domain_radius_;
}

std::optional<double> BoundedSaddle2D::optimum_value() const {
  return -0.25 * gamma_ * gamma_;
}

const Eigen::Matrix2d& BoundedSaddle2D::noise_matrix(int i) const {
  check_component_index(i);
  return noise_[static_cast<std::size_t>(i)];
}

Eigen::Matrix2d BoundedSaddle2D::mean_hessian(const Eigen::VectorXd& x) const {
  Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = -gamma_ + 3.0 * x[1] * x[1];
  return h;
}

}  // namespace stabsvrg
