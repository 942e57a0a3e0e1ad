#include "stabsvrg/matrix_sensing.hpp"

#include "stabsvrg/parallel.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace stabsvrg {

namespace {

// <A, B> = sum_ij A_ij B_ij.
inline double frob_inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.cwiseProduct(b).sum();
}

// <A, U Z'> = sum_k u_k' A z_k, without materializing the d x d outer product.
inline double inner_outer(const Eigen::MatrixXd& a, const Eigen::MatrixXd& u,
                          const Eigen::MatrixXd& z) {
  return (a * z).cwiseProduct(u).sum();
}

double operator_norm(const Eigen::MatrixXd& u) {
  if (u.cols() == 1) return u.col(0).norm();
  return Eigen::JacobiSVD<Eigen::MatrixXd>(u).singularValues()(0);
}

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

}  // namespace

MatrixSensingInstance MatrixSensingInstance::make(int d, int r, int n, Rng& rng) {
  if (d < 1 || r < 1 || r > d)
    throw std::invalid_argument("MatrixSensingInstance: requires 1 <= r <= d");
  if (n < 1) throw std::invalid_argument("MatrixSensingInstance: n must be positive");
  Eigen::MatrixXd u_star = random_matrix(d, r, rng);
  u_star /= operator_norm(u_star);
  std::vector<Eigen::MatrixXd> sensing;
  sensing.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sensing.push_back(random_matrix(d, d, rng));
  MatrixSensingInstance instance(std::move(u_star), std::move(sensing));
  instance.estimate_lipschitz(rng);
  return instance;
}

MatrixSensingInstance MatrixSensingInstance::make_with_ground_truth(const Eigen::MatrixXd& u_star,
                                                                    int n, Rng& rng) {
  if (u_star.rows() < 1 || u_star.cols() < 1 || u_star.cols() > u_star.rows())
    throw std::invalid_argument("MatrixSensingInstance: ground truth must be d x r, r <= d");
  if (n < 1) throw std::invalid_argument("MatrixSensingInstance: n must be positive");
  std::vector<Eigen::MatrixXd> sensing;
  sensing.reserve(static_cast<std::size_t>(n));
  const int d = static_cast<int>(u_star.rows());
  for (int i = 0; i < n; ++i) sensing.push_back(random_matrix(d, d, rng));
  MatrixSensingInstance instance(u_star, std::move(sensing));
  instance.estimate_lipschitz(rng);
  return instance;
}

MatrixSensingInstance MatrixSensingInstance::from_parts(Eigen::MatrixXd u_star,
                                                        std::vector<Eigen::MatrixXd> sensing,
                                                        double lipschitz_l) {
  MatrixSensingInstance instance(std::move(u_star), std::move(sensing));
  instance.lipschitz_l_ = lipschitz_l;
  return instance;
}

MatrixSensingInstance::MatrixSensingInstance(Eigen::MatrixXd u_star,
                                             std::vector<Eigen::MatrixXd> sensing)
    : rows_(static_cast<int>(u_star.rows())),
      rank_(static_cast<int>(u_star.cols())),
      u_star_(std::move(u_star)),
      sensing_(std::move(sensing)) {
  m_star_ = u_star_ * u_star_.transpose();
  const int n = static_cast<int>(sensing_.size());
  observations_.resize(n);
  // b_i reuses the residual's inner-product expression, so residual(U*) and
  // therefore value and gradient at U* vanish exactly.
  for (int i = 0; i < n; ++i)
    observations_[i] = inner_outer(sensing_[static_cast<std::size_t>(i)], u_star_, u_star_);

  // rho on the ||U|| <= 4 ball, from the restricted-isometry bound with
  // delta = 0.1.
  hessian_lipschitz_ = 48.0 * 1.1;
  component_hessian_lipschitz_ = std::max(*hessian_lipschitz_, 3.0 * rows_);
}

void MatrixSensingInstance::estimate_lipschitz(Rng& rng) {
  // Empirical lower estimate of L on the operating region, with headroom.
  const int n = component_count();
  double l = 0.0;
  Eigen::VectorXd gx(dim()), gy(dim());
  for (int trial = 0; trial < 16; ++trial) {
    Eigen::MatrixXd u = random_matrix(rows_, rank_, rng);
    u *= (0.5 + 1.5 * rng.uniform01()) / operator_norm(u);
    Eigen::MatrixXd step = random_matrix(rows_, rank_, rng);
    step *= 1e-3 / step.norm();
    const Eigen::VectorXd x = flatten(u);
    const Eigen::VectorXd y = flatten(u + step);
    const int i = rng.uniform_index(n);
    component_gradient(i, x, gx);
    component_gradient(i, y, gy);
    l = std::max(l, (gx - gy).norm() / (x - y).norm());
  }
  lipschitz_l_ = 1.5 * l;
}

double MatrixSensingInstance::residual(int i, const Eigen::MatrixXd& u) const {
  check_component_index(i);
  return inner_outer(sensing_[static_cast<std::size_t>(i)], u, u) - observations_[i];
}

double MatrixSensingInstance::component_value(int i, const Eigen::VectorXd& x) const {
  const double res = residual(i, unflatten(x));
  return 0.5 * res * res;
}

void MatrixSensingInstance::component_gradient(int i, const Eigen::VectorXd& x,
                                               Eigen::VectorXd& grad) const {
  check_component_index(i);
  const Eigen::MatrixXd u = unflatten(x);
  const Eigen::MatrixXd& a = sensing_[static_cast<std::size_t>(i)];
  const double res = inner_outer(a, u, u) - observations_[i];
  grad.resize(dim());
  Eigen::Map<Eigen::MatrixXd>(grad.data(), rows_, rank_) =
      res * (a * u + a.transpose() * u);
}

double MatrixSensingInstance::value(const Eigen::VectorXd& x) const {
  const Eigen::MatrixXd u = unflatten(x);
  const int n = component_count();
  const double total = parallel::sum_scalars(n, [&](int i) {
    const double res = residual(i, u);
    return res * res;
  });
  return 0.5 * total / static_cast<double>(n);
}

bool MatrixSensingInstance::in_domain(const Eigen::VectorXd& x) const {
  return operator_norm(unflatten(x)) <= 4.0;
}

double MatrixSensingInstance::hessian_form(const Eigen::MatrixXd& u,
                                           const Eigen::MatrixXd& z) const {
  const int n = component_count();
  const double total = parallel::sum_scalars(n, [&](int i) {
    return component_hessian_form(i, u, z);
  });
  return total / static_cast<double>(n);
}

double MatrixSensingInstance::component_hessian_form(int i, const Eigen::MatrixXd& u,
                                                     const Eigen::MatrixXd& z) const {
  check_component_index(i);
  const Eigen::MatrixXd& a = sensing_[static_cast<std::size_t>(i)];
  // <UZ' + ZU', A_i> equals <UZ', A_i + A_i'>.
  const double cross = inner_outer(a, u, z) + inner_outer(a, z, u);
  const double res = inner_outer(a, u, u) - observations_[i];  // <UU' - M*, A_i>
  const double zz = inner_outer(a, z, z);                      // <ZZ', A_i>
  return cross * cross + 2.0 * res * zz;
}

double MatrixSensingInstance::measurement_form(const Eigen::MatrixXd& b,
                                               const Eigen::MatrixXd& b_prime) const {
  const int n = component_count();
  const double total = parallel::sum_scalars(n, [&](int i) {
    const Eigen::MatrixXd& a = sensing_[static_cast<std::size_t>(i)];
    return frob_inner(a, b) * frob_inner(a, b_prime);
  });
  return total / static_cast<double>(n);
}

std::pair<double, double> MatrixSensingInstance::rip_probe(int rank_cap, int trials,
                                                           Rng& rng) const {
  if (rank_cap < 1 || rank_cap > rows_)
    throw std::invalid_argument("rip_probe: rank_cap must be in [1, d]");
  if (trials < 1) throw std::invalid_argument("rip_probe: trials must be positive");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    const Eigen::MatrixXd p = random_matrix(rows_, rank_cap, rng);
    const Eigen::MatrixXd q = random_matrix(rows_, rank_cap, rng);
    Eigen::MatrixXd b = p * q.transpose();
    b /= b.norm();
    const double deviation = measurement_form(b, b) - 1.0;
    lo = std::min(lo, deviation);
    hi = std::max(hi, deviation);
  }
  return {lo, hi};
}

Eigen::MatrixXd MatrixSensingInstance::unflatten(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) throw std::invalid_argument("MatrixSensingInstance: bad vector length");
  return Eigen::Map<const Eigen::MatrixXd>(x.data(), rows_, rank_);
}

Eigen::VectorXd MatrixSensingInstance::flatten(const Eigen::MatrixXd& u) const {
  if (u.rows() != rows_ || u.cols() != rank_)
    throw std::invalid_argument("MatrixSensingInstance: bad factor shape");
  return Eigen::Map<const Eigen::VectorXd>(u.data(), dim());
}

const Eigen::MatrixXd& MatrixSensingInstance::sensing_matrix(int i) const {
  check_component_index(i);
  return sensing_[static_cast<std::size_t>(i)];
}

double MatrixSensingInstance::observation(int i) const {
  check_component_index(i);
  return observations_[i];
}

}  // namespace stabsvrg
