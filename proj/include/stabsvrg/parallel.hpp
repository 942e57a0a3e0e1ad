#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <vector>

namespace stabsvrg::parallel {

// Partial sums are accumulated per fixed-size block and then folded in block
// order, so a reduction yields the same bits for any thread count (including
// the serial path). Tests and the benchmark rely on this equivalence.
inline constexpr int kBlockSize = 32;

enum class Exec { serial, parallel };

// Process-wide switch consulted by the Exec-less overloads.
bool enabled();
void set_enabled(bool on);

// Number of OpenMP threads used by parallel reductions. 0 = library default.
int thread_count();
void set_thread_count(int n);

namespace detail {
bool run_parallel(Exec exec, int items);
}

// Sums add_term(i, acc, scratch) over i in [0, n); acc is a dim-sized column
// the term must be added into, scratch is a reusable dim-sized work vector.
template <typename AddTerm>
void sum_terms(int n, int dim, AddTerm&& add_term, Eigen::VectorXd& out, Exec exec) {
  const int nblocks = n <= 0 ? 0 : (n + kBlockSize - 1) / kBlockSize;
  Eigen::MatrixXd partials = Eigen::MatrixXd::Zero(dim, std::max(nblocks, 1));
  if (detail::run_parallel(exec, n)) {
#pragma omp parallel for schedule(static)
    for (int blk = 0; blk < nblocks; ++blk) {
      Eigen::VectorXd scratch(dim);
      auto acc = partials.col(blk);
      const int hi = std::min(n, (blk + 1) * kBlockSize);
      for (int i = blk * kBlockSize; i < hi; ++i) add_term(i, acc, scratch);
    }
  } else {
    for (int blk = 0; blk < nblocks; ++blk) {
      Eigen::VectorXd scratch(dim);
      auto acc = partials.col(blk);
      const int hi = std::min(n, (blk + 1) * kBlockSize);
      for (int i = blk * kBlockSize; i < hi; ++i) add_term(i, acc, scratch);
    }
  }
  out.setZero(dim);
  for (int blk = 0; blk < nblocks; ++blk) out += partials.col(blk);
}

template <typename AddTerm>
void sum_terms(int n, int dim, AddTerm&& add_term, Eigen::VectorXd& out) {
  sum_terms(n, dim, std::forward<AddTerm>(add_term), out,
            enabled() ? Exec::parallel : Exec::serial);
}

// Scalar reduction with the same block-deterministic contract.
template <typename Term>
double sum_scalars(int n, Term&& term, Exec exec) {
  const int nblocks = n <= 0 ? 0 : (n + kBlockSize - 1) / kBlockSize;
  std::vector<double> partials(static_cast<std::size_t>(std::max(nblocks, 1)), 0.0);
  if (detail::run_parallel(exec, n)) {
#pragma omp parallel for schedule(static)
    for (int blk = 0; blk < nblocks; ++blk) {
      double acc = 0.0;
      const int hi = std::min(n, (blk + 1) * kBlockSize);
      for (int i = blk * kBlockSize; i < hi; ++i) acc += term(i);
      partials[static_cast<std::size_t>(blk)] = acc;
    }
  } else {
    for (int blk = 0; blk < nblocks; ++blk) {
      double acc = 0.0;
      const int hi = std::min(n, (blk + 1) * kBlockSize);
      for (int i = blk * kBlockSize; i < hi; ++i) acc += term(i);
      partials[static_cast<std::size_t>(blk)] = acc;
    }
  }
  double total = 0.0;
  for (int blk = 0; blk < nblocks; ++blk) total += partials[static_cast<std::size_t>(blk)];
  return total;
}

template <typename Term>
double sum_scalars(int n, Term&& term) {
  return sum_scalars(n, std::forward<Term>(term), enabled() ? Exec::parallel : Exec::serial);
}

}  // namespace stabsvrg::parallel
