#pragma once

#include "stabsvrg/quadratic_ensemble.hpp"
#include "stabsvrg/rng.hpp"

#include <Eigen/Core>

#include <cmath>

namespace test_util {

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1e-300, std::abs(want));
}

inline double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return (got - want).norm() / std::max(1e-300, want.norm());
}

inline Eigen::VectorXd random_vector(int d, stabsvrg::Rng& rng, double scale = 1.0) {
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x[i] = scale * rng.normal();
  return x;
}

inline stabsvrg::QuadraticEnsemble saddle_ensemble(int d, int n, double gamma, double spread,
                                                   std::uint64_t seed) {
  stabsvrg::QuadraticEnsembleOptions opts;
  opts.dim = d;
  opts.components = n;
  opts.gamma = gamma;
  opts.spread = spread;
  stabsvrg::Rng rng(seed);
  return stabsvrg::make_quadratic_ensemble(opts, rng);
}

}  // namespace test_util
