#include "stabsvrg/quadratic_ensemble.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace stabsvrg {

namespace {

double spectral_norm(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd random_symmetric(int d, Rng& rng) {
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
  return 0.5 * (m + m.transpose());
}

Eigen::MatrixXd random_rotation(int d, Rng& rng) {
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
  return Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
}

}  // namespace

QuadraticEnsemble::QuadraticEnsemble(std::vector<Eigen::MatrixXd> components,
                                     Eigen::VectorXd linear)
    : components_(std::move(components)), linear_(std::move(linear)) {
  if (components_.empty())
    throw std::invalid_argument("QuadraticEnsemble: needs at least one component");
  const Eigen::Index d = linear_.size();
  if (d < 1) throw std::invalid_argument("QuadraticEnsemble: dimension must be positive");
  for (const auto& h : components_) {
    if (h.rows() != d || h.cols() != d)
      throw std::invalid_argument("QuadraticEnsemble: component shape mismatch");
    if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + h.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("QuadraticEnsemble: components must be symmetric");
  }
  mean_ = Eigen::MatrixXd::Zero(d, d);
  for (const auto& h : components_) mean_ += h;
  mean_ /= static_cast<double>(components_.size());

  double l = 0.0;
  for (const auto& h : components_) l = std::max(l, spectral_norm(h));
  lipschitz_l_ = l;
  hessian_lipschitz_ = 0.0;
  component_hessian_lipschitz_ = 0.0;
}

double QuadraticEnsemble::component_value(int i, const Eigen::VectorXd& x) const {
  check_component_index(i);
  return 0.5 * x.dot(components_[static_cast<std::size_t>(i)] * x) + linear_.dot(x);
}

void QuadraticEnsemble::component_gradient(int i, const Eigen::VectorXd& x,
                                           Eigen::VectorXd& grad) const {
  check_component_index(i);
  grad = components_[static_cast<std::size_t>(i)] * x + linear_;
}

double QuadraticEnsemble::value(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(mean_ * x) + linear_.dot(x);
}

void QuadraticEnsemble::full_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
  grad = mean_ * x + linear_;
}

std::optional<double> QuadraticEnsemble::optimum_value() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mean_);
  if (eig.eigenvalues().minCoeff() <= 0.0) return std::nullopt;  // unbounded or flat
  const Eigen::VectorXd x_star = -eig.eigenvectors() *
                                 eig.eigenvalues().cwiseInverse().asDiagonal() *
                                 (eig.eigenvectors().transpose() * linear_);
  return 0.5 * x_star.dot(mean_ * x_star) + linear_.dot(x_star);
}

const Eigen::MatrixXd& QuadraticEnsemble::component_matrix(int i) const {
  check_component_index(i);
  return components_[static_cast<std::size_t>(i)];
}

QuadraticEnsemble make_quadratic_ensemble(const QuadraticEnsembleOptions& opts, Rng& rng) {
  if (opts.dim < 2 || opts.dim > 200)
    throw std::invalid_argument("make_quadratic_ensemble: dim must be in [2, 200]");
  if (opts.components < 1)
    throw std::invalid_argument("make_quadratic_ensemble: needs at least one component");
  if (opts.gamma <= 0.0) throw std::invalid_argument("make_quadratic_ensemble: gamma > 0");
  if (opts.spread < 0.0) throw std::invalid_argument("make_quadratic_ensemble: spread >= 0");

  const int d = opts.dim;
  const int n = opts.components;

  Eigen::VectorXd eigenvalues(d);
  eigenvalues[0] = -opts.gamma;
  for (int i = 1; i < d; ++i) eigenvalues[i] = 0.25 + 0.75 * rng.uniform01();
  const Eigen::MatrixXd q = random_rotation(d, rng);
  const Eigen::MatrixXd mean = q * eigenvalues.asDiagonal() * q.transpose();

  std::vector<Eigen::MatrixXd> components;
  components.reserve(static_cast<std::size_t>(n));
  if (opts.spread == 0.0 || n == 1) {
    for (int i = 0; i < n; ++i) components.push_back(mean);
  } else {
    Eigen::MatrixXd noise_sum = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i + 1 < n; ++i) {
      Eigen::MatrixXd noise = random_symmetric(d, rng);
      noise *= opts.spread / spectral_norm(noise);
      noise_sum += noise;
      components.push_back(mean + noise);
    }
    components.push_back(mean - noise_sum);
  }

  QuadraticEnsemble ensemble(std::move(components), Eigen::VectorXd::Zero(d));
  if (ensemble.lipschitz_l().value() > opts.l_cap)
    throw std::invalid_argument(
        "make_quadratic_ensemble: spread pushes a component Lipschitz constant past l_cap");
  return ensemble;
}

}  // namespace stabsvrg
