// Experiment harness for the variance-reduced saddle-escape algorithms.
//
// Subcommands: run, compare, certify, probe, constants. Specs are JSON files
// (see README); CLI flags override spec fields. Exit codes: 0 on success,
// 2 on a spec error, 3 when every seed of a run diverged.

#include "stabsvrg/harness.hpp"
#include "stabsvrg/matrix_sensing.hpp"
#include "stabsvrg/parallel.hpp"
#include "stabsvrg/stats.hpp"
#include "stabsvrg/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;
using namespace stabsvrg;

constexpr int kExitOk = 0;
constexpr int kExitSpecError = 2;
constexpr int kExitAllDiverged = 3;

ExperimentSpec load_spec(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw SpecError("cannot read spec file " + path);
  json j;
  try {
    file >> j;
  } catch (const json::exception& e) {
    throw SpecError(std::string("spec file ") + path + ": " + e.what());
  }
  return ExperimentSpec::from_json(j);
}

void apply_overrides(ExperimentSpec& spec, const std::vector<std::uint64_t>& seeds,
                     long long budget) {
  if (!seeds.empty()) spec.seeds = seeds;
  if (budget >= 0) spec.budget = budget;
}

void write_output(const json& doc, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream file(out_path);
  if (!file) throw std::runtime_error("cannot write " + out_path);
  file << doc.dump(2) << '\n';
}

int cmd_run(const std::string& spec_path, const std::vector<std::uint64_t>& seeds,
            long long budget, const std::string& out_dir, const std::string& format,
            const std::string& save_instance_path) {
  ExperimentSpec spec = load_spec(spec_path);
  apply_overrides(spec, seeds, budget);

  if (!save_instance_path.empty()) {
    const auto obj = build_objective(spec.objective);
    save_instance(*obj, spec.objective, save_instance_path);
    std::cout << "instance written to " << save_instance_path << '\n';
  }

  const std::vector<RunTrace> traces = run(spec);
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  int diverged = 0;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const RunTrace& trace = traces[i];
    trace.validate();
    if (trace.status == RunStatus::diverged) ++diverged;
    std::cout << "seed " << spec.seeds[i] << ": status=" << to_string(trace.status)
              << " steps=" << trace.total_steps << " sg=" << trace.total_sg
              << " final_f=" << trace.final_f
              << " super_epochs=" << trace.super_epochs.size()
              << (trace.domain_violation ? " domain_violation" : "") << '\n';
    if (!out_dir.empty()) {
      const std::string stem = out_dir + "/trace_seed" + std::to_string(spec.seeds[i]);
      if (format == "csv" || format == "both") export_trace_csv(trace, stem + ".csv");
      if (format == "structured" || format == "both")
        export_trace_json(trace, spec, stem + ".json");
    }
  }
  return diverged == static_cast<int>(traces.size()) ? kExitAllDiverged : kExitOk;
}

int cmd_compare(const std::vector<std::string>& spec_paths,
                const std::vector<std::uint64_t>& seeds, long long budget,
                const std::string& out_path) {
  std::vector<ExperimentSpec> specs;
  for (const auto& path : spec_paths) {
    specs.push_back(load_spec(path));
    apply_overrides(specs.back(), seeds, budget);
  }
  const std::vector<CompareRow> rows = compare(specs);
  const std::string table = format_compare_table(rows);
  std::cout << table;
  if (!out_path.empty()) {
    std::ofstream file(out_path);
    if (!file) throw std::runtime_error("cannot write " + out_path);
    file << table;
  }
  return kExitOk;
}

int cmd_certify(const std::string& trace_path, double epsilon_flag, double rho_flag,
                bool all_snapshots, const std::string& out_path) {
  const ImportedTrace imported = import_trace_json(trace_path);
  const auto obj = build_objective(imported.spec.objective);

  double epsilon = epsilon_flag;
  if (epsilon <= 0.0 && imported.spec.certify) epsilon = imported.spec.certify->epsilon;
  if (epsilon <= 0.0 && imported.spec.derive) epsilon = imported.spec.derive->epsilon;
  if (epsilon <= 0.0) throw SpecError("certify: epsilon neither given nor in the spec");
  double rho = rho_flag;
  if (rho <= 0.0 && imported.spec.certify && imported.spec.certify->rho)
    rho = *imported.spec.certify->rho;
  if (rho <= 0.0) rho = obj->hessian_lipschitz().value_or(0.0);
  if (rho <= 0.0) throw SpecError("certify: rho neither given nor declared");

  Rng base(Rng::mix(imported.trace.seed, 0x43455254ULL));
  json reports = json::array();
  const auto report_json = [&](long long step, const StationarityReport& r) {
    return json{{"step", step},
                {"grad_norm", r.grad_norm},
                {"lambda_min_estimate", r.lambda_min_estimate},
                {"lambda_min_error_bound", r.lambda_min_error_bound},
                {"epsilon", r.epsilon},
                {"rho", r.rho},
                {"verdict", to_string(r.verdict)},
                {"in_domain", r.in_domain},
                {"eig_converged", r.eig_converged}};
  };
  if (all_snapshots) {
    for (const auto& snap : imported.trace.snapshots) {
      Rng rng = base.fork(static_cast<std::uint64_t>(snap.step));
      reports.push_back(report_json(snap.step, certify(*obj, snap.point, epsilon, rho, rng)));
    }
  } else {
    Rng rng = base.fork(static_cast<std::uint64_t>(imported.trace.total_steps));
    reports.push_back(report_json(imported.trace.total_steps,
                                  certify(*obj, imported.trace.final_point, epsilon, rho, rng)));
  }
  write_output(json{{"trace", trace_path}, {"reports", reports}}, out_path);
  return kExitOk;
}

int cmd_probe_ball(int d, double radius, int draws, std::uint64_t seed,
                   const std::string& out_path) {
  Rng rng(seed);
  std::vector<double> radial;
  radial.reserve(static_cast<std::size_t>(draws));
  const Eigen::VectorXd center = Eigen::VectorXd::Zero(d);
  double max_norm = 0.0;
  for (int i = 0; i < draws; ++i) {
    const Eigen::VectorXd xi = sample_ball(center, radius, rng);
    const double r = xi.norm() / radius;
    max_norm = std::max(max_norm, xi.norm());
    radial.push_back(std::pow(r, d));  // uniform on [0, 1] under the ball law
  }
  const double ks = stats::ks_statistic_uniform(radial);
  write_output(json{{"probe", "ball"},
                    {"d", d},
                    {"radius", radius},
                    {"draws", draws},
                    {"ks_statistic_radial", ks},
                    {"max_norm", max_norm}},
               out_path);
  return kExitOk;
}

int cmd_probe_stop(int m, int trials, std::uint64_t seed, const std::string& out_path) {
  Rng rng(seed);
  std::vector<double> counts(static_cast<std::size_t>(m), 0.0);
  for (int trial = 0; trial < trials; ++trial) {
    for (int t = 1; t <= m; ++t) {
      if (random_stop_draw(m, t, rng)) {
        counts[static_cast<std::size_t>(t - 1)] += 1.0;
        break;
      }
    }
  }
  const std::vector<double> expected(static_cast<std::size_t>(m),
                                     static_cast<double>(trials) / m);
  const double stat = stats::chi_square_stat(counts, expected);
  const double p = stats::chi_square_sf(stat, m - 1);
  write_output(json{{"probe", "stop"},
                    {"m", m},
                    {"trials", trials},
                    {"chi_square", stat},
                    {"p_value", p},
                    {"counts", counts}},
               out_path);
  return kExitOk;
}

int cmd_probe_variance(const std::string& spec_path, int b, int trials, std::uint64_t seed,
                       const std::string& out_path) {
  const ExperimentSpec spec = load_spec(spec_path);
  const auto obj = build_objective(spec.objective);
  const DomainSampler sampler = default_domain_sampler(spec.objective, *obj);
  Rng rng(seed);
  const Eigen::VectorXd snapshot = sampler(rng);
  Eigen::VectorXd direction(obj->dim());
  for (int i = 0; i < obj->dim(); ++i) direction[i] = rng.normal();
  direction.normalize();
  const Eigen::VectorXd x = snapshot + 0.1 * (1.0 + snapshot.norm()) * direction;
  const VarianceProbeResult result = variance_probe(*obj, x, snapshot, b, trials, rng);
  write_output(json{{"probe", "variance"},
                    {"minibatch", result.minibatch},
                    {"trials", result.trials},
                    {"distance", result.distance},
                    {"lipschitz_l", result.lipschitz_l},
                    {"ratio_p50", result.p50},
                    {"ratio_p90", result.p90},
                    {"ratio_p99", result.p99},
                    {"ratio_max", result.max},
                    {"mean_error_sq", result.mean_error_sq}},
               out_path);
  return kExitOk;
}

int cmd_probe_coupled(const std::string& spec_path, int steps, int m, int b, double eta,
                      double offset, std::uint64_t seed, const std::string& out_path) {
  const ExperimentSpec spec = load_spec(spec_path);
  const auto obj = build_objective(spec.objective);
  Rng rng(seed);
  CoupledPair pair;
  pair.anchor = spec.start ? *spec.start : Eigen::VectorXd::Zero(obj->dim());
  Rng perturb = rng.fork("perturbation");
  pair.start = sample_ball(pair.anchor, offset, perturb);
  Eigen::VectorXd direction(obj->dim());
  for (int i = 0; i < obj->dim(); ++i) direction[i] = rng.normal();
  direction.normalize();
  pair.start_prime = pair.start + 0.25 * offset * direction;

  SvrgConfig config;
  config.epoch_length = m;
  config.minibatch = b;
  config.step_size = eta;
  config.epochs = 1;
  const auto records = coupled_variance_probe(*obj, pair, steps, config, rng);
  json recs = json::array();
  for (const auto& r : records) {
    recs.push_back(json{{"t", r.t},
                        {"xi_diff_norm", r.xi_diff_norm},
                        {"w_minus_ws_norm", r.w_minus_ws_norm},
                        {"w_norm", r.w_norm},
                        {"ws_norm", r.ws_norm},
                        {"p_t", r.p_t}});
  }
  write_output(json{{"probe", "coupled"}, {"steps", steps}, {"records", recs}}, out_path);
  return kExitOk;
}

int cmd_probe_rip(const std::string& spec_path, int rank_cap, int trials, std::uint64_t seed,
                  const std::string& out_path) {
  const ExperimentSpec spec = load_spec(spec_path);
  const auto obj = build_objective(spec.objective);
  const auto* sensing = dynamic_cast<const MatrixSensingInstance*>(obj.get());
  if (sensing == nullptr) throw SpecError("probe rip: objective must be matrix_sensing");
  Rng rng(seed);
  const auto [lo, hi] = sensing->rip_probe(rank_cap, trials, rng);
  write_output(json{{"probe", "rip"},
                    {"rank_cap", rank_cap},
                    {"trials", trials},
                    {"delta_lower", lo},
                    {"delta_upper", hi}},
               out_path);
  return kExitOk;
}

int cmd_constants(const std::string& spec_path, int pairs, std::uint64_t seed,
                  const std::string& out_path) {
  const ExperimentSpec spec = load_spec(spec_path);
  const auto obj = build_objective(spec.objective);
  Rng rng(seed);
  const EmpiricalConstants c =
      estimate_constants(*obj, default_domain_sampler(spec.objective, *obj), pairs, rng);
  json declared;
  declared["lipschitz_l"] = obj->lipschitz_l() ? json(*obj->lipschitz_l()) : json();
  declared["rho"] = obj->hessian_lipschitz() ? json(*obj->hessian_lipschitz()) : json();
  declared["rho_prime"] =
      obj->component_hessian_lipschitz() ? json(*obj->component_hessian_lipschitz()) : json();
  write_output(json{{"pairs", pairs},
                    {"lipschitz_l_emp", c.lipschitz_l},
                    {"rho_emp", c.rho},
                    {"rho_prime_emp", c.rho_prime},
                    {"declared", declared}},
               out_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"minibatch SVRG, Perturbed SVRG and Stabilized SVRG experiment harness"};
  app.require_subcommand(1);
  app.fallthrough();

  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = library default)");
  bool serial = false;
  app.add_flag("--serial", serial, "disable parallel reductions (same results, slower)");

  std::string spec_path, out_dir, out_path, format = "structured", trace_path;
  std::vector<std::string> spec_paths;
  std::vector<std::uint64_t> seeds;
  long long budget = -1;
  std::uint64_t seed = 1;
  std::string save_instance_path;

  auto* run_cmd = app.add_subcommand("run", "run an experiment spec, one trace per seed");
  run_cmd->add_option("--spec", spec_path, "experiment spec (JSON)")->required();
  run_cmd->add_option("--seeds", seeds, "override run seeds");
  run_cmd->add_option("--seed", seed, "single-seed override");
  run_cmd->add_option("--budget", budget, "override stochastic-gradient budget");
  run_cmd->add_option("--out-dir", out_dir, "directory for trace files");
  run_cmd->add_option("--format", format, "trace format: csv | structured | both");
  run_cmd->add_option("--save-instance", save_instance_path,
                      "also write the objective instance to this path");

  auto* compare_cmd =
      app.add_subcommand("compare", "run several specs on one objective and tabulate");
  compare_cmd->add_option("--spec", spec_paths, "experiment specs (repeatable)")->required();
  compare_cmd->add_option("--seeds", seeds, "override run seeds for all specs");
  compare_cmd->add_option("--budget", budget, "override budget for all specs");
  compare_cmd->add_option("--out", out_path, "also write the table to this file");

  auto* certify_cmd = app.add_subcommand("certify", "stationarity reports for a stored trace");
  certify_cmd->add_option("--trace", trace_path, "structured trace file")->required();
  double epsilon_flag = 0.0, rho_flag = 0.0;
  certify_cmd->add_option("--epsilon", epsilon_flag, "accuracy target");
  certify_cmd->add_option("--rho", rho_flag, "Hessian-Lipschitz constant");
  bool all_snapshots = false;
  certify_cmd->add_flag("--all-snapshots", all_snapshots, "certify every snapshot, not just the final point");
  certify_cmd->add_option("--out", out_path, "write the reports to this file");

  auto* probe_cmd = app.add_subcommand("probe", "statistical probes of the building blocks");
  std::string kind;
  probe_cmd->add_option("--kind", kind, "ball | stop | variance | coupled | rip")->required();
  probe_cmd->add_option("--spec", spec_path, "experiment spec (objective part is used)");
  probe_cmd->add_option("--seed", seed, "probe seed");
  probe_cmd->add_option("--out", out_path, "write the probe record to this file");
  int probe_d = 3, probe_draws = 10000, probe_m = 8, probe_trials = 1000, probe_b = 32;
  int probe_steps = 50, probe_rank = 2;
  double probe_radius = 1.0, probe_eta = 0.01, probe_offset = 0.01;
  probe_cmd->add_option("--d", probe_d, "ball: dimension");
  probe_cmd->add_option("--radius", probe_radius, "ball: radius");
  probe_cmd->add_option("--draws", probe_draws, "ball: number of draws");
  probe_cmd->add_option("--m", probe_m, "stop/coupled: epoch length");
  probe_cmd->add_option("--trials", probe_trials, "stop/variance/rip: trials");
  probe_cmd->add_option("--b", probe_b, "variance/coupled: minibatch size");
  probe_cmd->add_option("--steps", probe_steps, "coupled: lockstep steps");
  probe_cmd->add_option("--eta", probe_eta, "coupled: step size");
  probe_cmd->add_option("--offset", probe_offset, "coupled: initial perturbation radius");
  probe_cmd->add_option("--rank", probe_rank, "rip: probe rank cap");

  auto* constants_cmd =
      app.add_subcommand("constants", "empirical (L, rho, rho') lower bounds for an objective");
  constants_cmd->add_option("--spec", spec_path, "experiment spec (objective part is used)")
      ->required();
  int pairs = 30;
  constants_cmd->add_option("--pairs", pairs, "sampled point pairs");
  constants_cmd->add_option("--seed", seed, "sampling seed");
  constants_cmd->add_option("--out", out_path, "write the estimates to this file");

  CLI11_PARSE(app, argc, argv);

  if (threads > 0) stabsvrg::parallel::set_thread_count(threads);
  if (serial) stabsvrg::parallel::set_enabled(false);

  try {
    if (run_cmd->parsed()) {
      if (seeds.empty() && run_cmd->count("--seed") > 0) seeds.push_back(seed);
      return cmd_run(spec_path, seeds, budget, out_dir, format, save_instance_path);
    }
    if (compare_cmd->parsed()) return cmd_compare(spec_paths, seeds, budget, out_path);
    if (certify_cmd->parsed())
      return cmd_certify(trace_path, epsilon_flag, rho_flag, all_snapshots, out_path);
    if (probe_cmd->parsed()) {
      if (kind == "ball") return cmd_probe_ball(probe_d, probe_radius, probe_draws, seed, out_path);
      if (kind == "stop") return cmd_probe_stop(probe_m, probe_trials, seed, out_path);
      if (kind == "variance")
        return cmd_probe_variance(spec_path, probe_b, probe_trials, seed, out_path);
      if (kind == "coupled")
        return cmd_probe_coupled(spec_path, probe_steps, probe_m, probe_b, probe_eta,
                                 probe_offset, seed, out_path);
      if (kind == "rip") return cmd_probe_rip(spec_path, probe_rank, probe_trials, seed, out_path);
      throw SpecError("probe: unknown kind " + kind);
    }
    if (constants_cmd->parsed()) return cmd_constants(spec_path, pairs, seed, out_path);
  } catch (const SpecError& e) {
    std::cerr << "spec error: " << e.what() << '\n';
    return kExitSpecError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
