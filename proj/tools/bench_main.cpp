// Benchmark of the block-deterministic reduction kernels: serial reference
// vs OpenMP, on the full gradient and the minibatch estimator. Both paths
// fold partial sums in block order, so the outputs must agree bit for bit;
// the benchmark checks that while it times them.

#include "stabsvrg/matrix_sensing.hpp"
#include "stabsvrg/parallel.hpp"
#include "stabsvrg/quadratic_ensemble.hpp"
#include "stabsvrg/svrg.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

namespace {

using namespace stabsvrg;
using Clock = std::chrono::steady_clock;

double time_ms(int reps, const std::function<void()>& fn) {
  fn();  // warm up
  const auto start = Clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto stop = Clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

struct BenchCase {
  std::string name;
  std::function<Eigen::VectorXd()> eval;
};

void run_case(const BenchCase& bench, int reps) {
  parallel::set_enabled(false);
  Eigen::VectorXd serial_out;
  const double serial_ms = time_ms(reps, [&] { serial_out = bench.eval(); });

  parallel::set_enabled(true);
  Eigen::VectorXd parallel_out;
  const double parallel_ms = time_ms(reps, [&] { parallel_out = bench.eval(); });

  const bool identical = serial_out.size() == parallel_out.size() &&
                         (serial_out.array() == parallel_out.array()).all();
  std::printf("%-34s %10.3f %10.3f %8.2fx   %s\n", bench.name.c_str(), serial_ms, parallel_ms,
              serial_ms / parallel_ms, identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP reduction benchmark"};
  int sensing_d = 32, sensing_r = 2, sensing_n = 1500;
  int ensemble_d = 96, ensemble_n = 400;
  int reps = 20, threads = 0;
  app.add_option("--sensing-d", sensing_d, "sensing rows");
  app.add_option("--sensing-r", sensing_r, "sensing rank");
  app.add_option("--sensing-n", sensing_n, "sensing measurements");
  app.add_option("--ensemble-d", ensemble_d, "ensemble dimension");
  app.add_option("--ensemble-n", ensemble_n, "ensemble components");
  app.add_option("--reps", reps, "repetitions per timing");
  app.add_option("--threads", threads, "OpenMP threads (0 = default)");
  CLI11_PARSE(app, argc, argv);

  if (threads > 0) parallel::set_thread_count(threads);

  Rng rng(12345);
  Rng sensing_rng = rng.fork("sensing");
  const MatrixSensingInstance sensing =
      MatrixSensingInstance::make(sensing_d, sensing_r, sensing_n, sensing_rng);
  Rng ensemble_rng = rng.fork("ensemble");
  QuadraticEnsembleOptions opts;
  opts.dim = ensemble_d;
  opts.components = ensemble_n;
  opts.gamma = 0.5;
  opts.spread = 0.3;
  const QuadraticEnsemble ensemble = make_quadratic_ensemble(opts, ensemble_rng);

  Rng point_rng = rng.fork("points");
  Eigen::VectorXd u(sensing.dim());
  for (int i = 0; i < sensing.dim(); ++i) u[i] = 0.2 * point_rng.normal();
  Eigen::VectorXd snapshot_u = u;
  for (int i = 0; i < sensing.dim(); ++i) snapshot_u[i] += 0.01 * point_rng.normal();
  Eigen::VectorXd x(ensemble.dim());
  for (int i = 0; i < ensemble.dim(); ++i) x[i] = point_rng.normal();

  const int b = static_cast<int>(std::cbrt(static_cast<double>(sensing_n) * sensing_n));
  Rng batch_rng = rng.fork("batch");
  const std::vector<int> batch = sample_minibatch(sensing_n, b, batch_rng);
  EpochContext ctx;
  ctx.snapshot = snapshot_u;
  ctx.snapshot_gradient = sensing.full_gradient(snapshot_u);
  ctx.shift = Eigen::VectorXd::Zero(sensing.dim());

  std::printf("%-34s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");
  run_case({"sensing full_gradient (n=" + std::to_string(sensing_n) + ")",
            [&] { return sensing.full_gradient(u); }},
           reps);
  run_case({"sensing estimator (b=" + std::to_string(b) + ")",
            [&] {
              GradCounter counter;
              return gradient_estimate(sensing, u, ctx, batch, counter);
            }},
           reps);
  run_case({"ensemble full_gradient (n=" + std::to_string(ensemble_n) + ")",
            [&] {
              // Component-averaged path (the closed form skips the reduction).
              Eigen::VectorXd grad(ensemble.dim());
              parallel::sum_terms(
                  ensemble.component_count(), ensemble.dim(),
                  [&](int i, auto& acc, Eigen::VectorXd& scratch) {
                    ensemble.component_gradient(i, x, scratch);
                    acc += scratch;
                  },
                  grad);
              grad /= ensemble.component_count();
              return grad;
            }},
           reps);
  return 0;
}
