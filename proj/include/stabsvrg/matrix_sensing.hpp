#pragma once

#include "stabsvrg/objective.hpp"
#include "stabsvrg/rng.hpp"

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace stabsvrg {

/// Symmetric matrix sensing: recover M* = U* U*' from linear measurements
/// b_i = <A_i, M*> with Gaussian sensing matrices A_i, through
///   f_i(U) = 0.5 (<A_i, U U'> - b_i)^2,   f = (1/n) sum f_i.
///
/// The variable is the d x r factor U, exposed to the optimizers as a flat
/// vector of length d*r (column-major); the objective owns the reshape. The
/// admissible domain is the operator-norm ball ||U|| <= 4; iterates leaving
/// it are flagged in the trace, never clamped.
class MatrixSensingInstance final : public FiniteSumObjective {
 public:
  /// Random instance; sensing matrices have i.i.d. standard Gaussian entries
  /// and the ground truth is normalized to spectral norm 1.
  static MatrixSensingInstance make(int d, int r, int n, Rng& rng);

  /// Same, but with a caller-supplied ground truth (d x r, any norm).
  static MatrixSensingInstance make_with_ground_truth(const Eigen::MatrixXd& u_star, int n,
                                                      Rng& rng);

  /// Rebuilds an instance from stored parts (deserialization); lipschitz_l
  /// is the previously estimated constant.
  static MatrixSensingInstance from_parts(Eigen::MatrixXd u_star,
                                          std::vector<Eigen::MatrixXd> sensing,
                                          double lipschitz_l);

  using FiniteSumObjective::component_gradient;
  using FiniteSumObjective::full_gradient;

  int component_count() const override { return static_cast<int>(sensing_.size()); }
  int dim() const override { return rows_ * rank_; }
  int rows() const { return rows_; }
  int rank() const { return rank_; }

  double component_value(int i, const Eigen::VectorXd& x) const override;
  void component_gradient(int i, const Eigen::VectorXd& x, Eigen::VectorXd& grad) const override;
  double value(const Eigen::VectorXd& x) const override;

  bool in_domain(const Eigen::VectorXd& x) const override;
  std::optional<double> optimum_value() const override { return 0.0; }

  /// <A_i, U U'> - b_i.
  double residual(int i, const Eigen::MatrixXd& u) const;

  /// Hessian quadratic form of the average objective in direction Z:
  ///   (UZ' + ZU') : H : (UZ' + ZU') + 2 (UU' - M*) : H : ZZ'
  /// with B : H : B' = (1/n) sum_i <A_i, B><A_i, B'>.
  double hessian_form(const Eigen::MatrixXd& u, const Eigen::MatrixXd& z) const;

  /// Component form: <UZ', A_i + A_i'>^2
  ///   + 0.5 <UU' - M*, A_i + A_i'><ZZ', A_i + A_i'>.
  double component_hessian_form(int i, const Eigen::MatrixXd& u, const Eigen::MatrixXd& z) const;

  /// B : H : B' for arbitrary (not necessarily symmetric) B, B'.
  double measurement_form(const Eigen::MatrixXd& b, const Eigen::MatrixXd& b_prime) const;

  /// Monte-Carlo isometry probe: min/max of B:H:B - 1 over `trials` random
  /// Frobenius-normalized matrices of rank <= rank_cap. A lower bound on the
  /// restricted-isometry constant, not a certificate.
  std::pair<double, double> rip_probe(int rank_cap, int trials, Rng& rng) const;

  Eigen::MatrixXd unflatten(const Eigen::VectorXd& x) const;
  Eigen::VectorXd flatten(const Eigen::MatrixXd& u) const;

  const Eigen::MatrixXd& sensing_matrix(int i) const;
  const Eigen::MatrixXd& ground_truth() const { return u_star_; }
  const Eigen::MatrixXd& target() const { return m_star_; }
  double observation(int i) const;

 private:
  MatrixSensingInstance(Eigen::MatrixXd u_star, std::vector<Eigen::MatrixXd> sensing);

  void estimate_lipschitz(Rng& rng);

  int rows_ = 0;
  int rank_ = 0;
  Eigen::MatrixXd u_star_;
  Eigen::MatrixXd m_star_;
  std::vector<Eigen::MatrixXd> sensing_;
  Eigen::VectorXd observations_;
};

}  // namespace stabsvrg
