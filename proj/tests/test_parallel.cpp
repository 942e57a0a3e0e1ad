#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "stabsvrg/parallel.hpp"

#include "stabsvrg/rng.hpp"

#include <doctest.h>

using namespace stabsvrg;

namespace {

// Deliberately order-sensitive terms so any reduction-order change shows up.
double term_value(int i, int j) {
  return std::sin(0.1 * i + 0.01 * j) * std::exp(-1e-4 * i) + 1e-7 * i * i;
}

}  // namespace

TEST_CASE("vector reduction: serial and parallel paths are bit-identical") {
  for (int n : {0, 1, 7, 31, 32, 33, 100, 1000}) {
    const int dim = 17;
    Eigen::VectorXd serial_out, parallel_out;
    const auto add = [&](int i, auto& acc, Eigen::VectorXd& scratch) {
      for (int j = 0; j < dim; ++j) scratch[j] = term_value(i, j);
      acc += scratch;
    };
    parallel::sum_terms(n, dim, add, serial_out, parallel::Exec::serial);
    parallel::sum_terms(n, dim, add, parallel_out, parallel::Exec::parallel);
    REQUIRE(serial_out.size() == dim);
    CHECK((serial_out.array() == parallel_out.array()).all());
    if (n == 0) CHECK(serial_out.norm() == 0.0);
  }
}

TEST_CASE("scalar reduction: serial and parallel paths are bit-identical") {
  for (int n : {1, 5, 64, 999}) {
    const auto term = [&](int i) { return term_value(i, 3); };
    const double serial_sum = parallel::sum_scalars(n, term, parallel::Exec::serial);
    const double parallel_sum = parallel::sum_scalars(n, term, parallel::Exec::parallel);
    CHECK(serial_sum == parallel_sum);
  }
}

TEST_CASE("global switch changes nothing about the values") {
  const int n = 500, dim = 9;
  const auto add = [&](int i, auto& acc, Eigen::VectorXd& scratch) {
    for (int j = 0; j < dim; ++j) scratch[j] = term_value(i, j);
    acc += scratch;
  };
  Eigen::VectorXd on_out, off_out;
  parallel::set_enabled(true);
  parallel::sum_terms(n, dim, add, on_out);
  parallel::set_enabled(false);
  parallel::sum_terms(n, dim, add, off_out);
  parallel::set_enabled(true);
  CHECK((on_out.array() == off_out.array()).all());
}
