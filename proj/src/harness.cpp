#include "stabsvrg/harness.hpp"

#include "stabsvrg/bounded_saddle.hpp"
#include "stabsvrg/matrix_sensing.hpp"
#include "stabsvrg/quadratic_ensemble.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace stabsvrg {

namespace {

using nlohmann::json;

constexpr const char* kInstanceMagic = "stabsvrg.instance";
constexpr const char* kTraceMagic = "stabsvrg.trace";
constexpr int kFormatVersion = 1;

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out;
  out["rows"] = m.rows();
  out["cols"] = m.cols();
  json data = json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) data.push_back(m(i, j));
  out["data"] = std::move(data);
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw SpecError("instance file: matrix payload size mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = data[k++].get<double>();
  return m;
}

json constants_to_json(const EscapeConstants& c) {
  return json{{"c_b", c.c_b},         {"c_eta", c.c_eta}, {"c_delta", c.c_delta},
              {"c_t", c.c_t},         {"c_g", c.c_g},     {"c_l", c.c_l}};
}

EscapeConstants constants_from_json(const json& j) {
  EscapeConstants c;
  c.c_b = j.value("c_b", c.c_b);
  c.c_eta = j.value("c_eta", c.c_eta);
  c.c_delta = j.value("c_delta", c.c_delta);
  c.c_t = j.value("c_t", c.c_t);
  c.c_g = j.value("c_g", c.c_g);
  c.c_l = j.value("c_l", c.c_l);
  return c;
}

json escape_config_to_json(const EscapeConfig& c) {
  json out{{"epoch_length", c.epoch_length},
           {"minibatch", c.minibatch},
           {"step_size", c.step_size},
           {"perturbation_radius", c.perturbation_radius},
           {"super_epoch_cap", c.super_epoch_cap},
           {"gradient_threshold", c.gradient_threshold},
           {"distance_threshold", c.distance_threshold}};
  if (c.budget >= 0) out["budget"] = c.budget;
  out["constants"] = constants_to_json(c.constants);
  return out;
}

EscapeConfig escape_config_from_json(const json& j) {
  EscapeConfig c;
  try {
    c.epoch_length = j.at("epoch_length").get<int>();
    c.minibatch = j.at("minibatch").get<int>();
    c.step_size = j.at("step_size").get<double>();
    c.perturbation_radius = j.at("perturbation_radius").get<double>();
    c.super_epoch_cap = j.at("super_epoch_cap").get<long long>();
    c.gradient_threshold = j.at("gradient_threshold").get<double>();
    c.distance_threshold = j.at("distance_threshold").get<double>();
  } catch (const json::exception& e) {
    throw SpecError(std::string("escape config: ") + e.what());
  }
  c.budget = j.value("budget", -1LL);
  if (j.contains("constants")) c.constants = constants_from_json(j.at("constants"));
  return c;
}

json svrg_config_to_json(const SvrgConfig& c) {
  return json{{"epoch_length", c.epoch_length},
              {"minibatch", c.minibatch},
              {"step_size", c.step_size},
              {"epochs", c.epochs}};
}

SvrgConfig svrg_config_from_json(const json& j) {
  SvrgConfig c;
  try {
    c.epoch_length = j.at("epoch_length").get<int>();
    c.minibatch = j.at("minibatch").get<int>();
    c.step_size = j.at("step_size").get<double>();
    c.epochs = j.at("epochs").get<int>();
  } catch (const json::exception& e) {
    throw SpecError(std::string("svrg config: ") + e.what());
  }
  return c;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvRow {
  long long step = 0;
  int priority = 0;
  std::string line;
};

void push_row(std::vector<CsvRow>& rows, long long step, int priority, const std::string& f,
              const std::string& grad_norm, const std::string& sg, const std::string& epoch,
              bool super_flag, const char* event) {
  std::ostringstream line;
  line << step << ',' << f << ',' << grad_norm << ',' << sg << ',' << epoch << ','
       << (super_flag ? 1 : 0) << ',' << event;
  rows.push_back({step, priority, line.str()});
}

json trace_to_json(const RunTrace& trace) {
  json out;
  out["status"] = to_string(trace.status);
  out["domain_violation"] = trace.domain_violation;
  out["total_sg"] = trace.total_sg;
  out["total_steps"] = trace.total_steps;
  out["seed"] = trace.seed;
  out["final"] = json{{"point", vector_to_json(trace.final_point)}, {"f", trace.final_f}};

  json snaps = json::array();
  for (const auto& s : trace.snapshots) {
    snaps.push_back(json{{"step", s.step},
                         {"epoch", s.epoch},
                         {"f", s.f},
                         {"grad_norm", s.grad_norm},
                         {"sg_count", s.sg_count},
                         {"super_epoch", s.in_super_epoch},
                         {"point", vector_to_json(s.point)}});
  }
  out["snapshots"] = std::move(snaps);

  json steps = json::array();
  for (const auto& s : trace.steps) {
    steps.push_back(json{{"step", s.step},
                         {"epoch", s.epoch},
                         {"f", s.f},
                         {"sg_count", s.sg_count},
                         {"super_epoch", s.in_super_epoch}});
  }
  out["steps"] = std::move(steps);

  json spans = json::array();
  for (const auto& s : trace.super_epochs) {
    spans.push_back(json{{"entry_step", s.entry_step},
                         {"entry_epoch", s.entry_epoch},
                         {"exit_step", s.exit_step},
                         {"exit_reason", to_string(s.exit_reason)},
                         {"f_anchor", s.f_anchor},
                         {"anchor_grad_norm", s.anchor_grad_norm},
                         {"perturbation_norm", s.perturbation_norm},
                         {"f_exit", s.f_exit},
                         {"exit_distance", s.exit_distance},
                         {"anchor", vector_to_json(s.anchor)}});
  }
  out["super_epochs"] = std::move(spans);

  json stops = json::array();
  for (const auto& s : trace.random_stops)
    stops.push_back(json{{"step", s.step}, {"epoch", s.epoch}, {"t_stop", s.t_stop}});
  out["random_stops"] = std::move(stops);
  return out;
}

RunStatus status_from_string(const std::string& s) {
  if (s == "completed") return RunStatus::completed;
  if (s == "budget_exhausted") return RunStatus::budget_exhausted;
  if (s == "diverged") return RunStatus::diverged;
  throw SpecError("trace file: unknown status " + s);
}

SuperEpochExit exit_from_string(const std::string& s) {
  if (s == "open") return SuperEpochExit::open;
  if (s == "distance") return SuperEpochExit::distance;
  if (s == "step_cap") return SuperEpochExit::step_cap;
  throw SpecError("trace file: unknown exit reason " + s);
}

RunTrace trace_from_json(const json& j) {
  RunTrace trace;
  trace.status = status_from_string(j.at("status").get<std::string>());
  trace.domain_violation = j.at("domain_violation").get<bool>();
  trace.total_sg = j.at("total_sg").get<long long>();
  trace.total_steps = j.at("total_steps").get<long long>();
  trace.seed = j.at("seed").get<std::uint64_t>();
  trace.final_point = vector_from_json(j.at("final").at("point"));
  trace.final_f = j.at("final").at("f").get<double>();
  for (const auto& s : j.at("snapshots")) {
    trace.snapshots.push_back({s.at("step").get<long long>(), s.at("epoch").get<int>(),
                               s.at("f").get<double>(), s.at("grad_norm").get<double>(),
                               s.at("sg_count").get<long long>(),
                               s.at("super_epoch").get<bool>(),
                               vector_from_json(s.at("point"))});
  }
  for (const auto& s : j.at("steps")) {
    trace.steps.push_back({s.at("step").get<long long>(), s.at("epoch").get<int>(),
                           s.at("f").get<double>(), s.at("sg_count").get<long long>(),
                           s.at("super_epoch").get<bool>()});
  }
  for (const auto& s : j.at("super_epochs")) {
    SuperEpochSpan span;
    span.entry_step = s.at("entry_step").get<long long>();
    span.entry_epoch = s.at("entry_epoch").get<int>();
    span.exit_step = s.at("exit_step").get<long long>();
    span.exit_reason = exit_from_string(s.at("exit_reason").get<std::string>());
    span.f_anchor = s.at("f_anchor").get<double>();
    span.anchor_grad_norm = s.at("anchor_grad_norm").get<double>();
    span.perturbation_norm = s.at("perturbation_norm").get<double>();
    span.f_exit = s.at("f_exit").get<double>();
    span.exit_distance = s.at("exit_distance").get<double>();
    span.anchor = vector_from_json(s.at("anchor"));
    trace.super_epochs.push_back(std::move(span));
  }
  for (const auto& s : j.at("random_stops")) {
    trace.random_stops.push_back(
        {s.at("step").get<long long>(), s.at("epoch").get<int>(), s.at("t_stop").get<int>()});
  }
  return trace;
}

}  // namespace

ExperimentSpec ExperimentSpec::from_json(const json& j) {
  ExperimentSpec spec;
  try {
    const auto& obj = j.at("objective");
    spec.objective.kind = obj.at("kind").get<std::string>();
    spec.objective.instance_seed = obj.value("instance_seed", 0ULL);
    spec.objective.params = obj.value("params", json::object());

    spec.algorithm = algorithm_from_string(j.value("algorithm", std::string("stabilized")));

    if (j.contains("parameters")) {
      const auto& params = j.at("parameters");
      if (params.contains("escape")) spec.escape_config = escape_config_from_json(params.at("escape"));
      if (params.contains("derive")) {
        DeriveSpec derive;
        derive.epsilon = params.at("derive").value("epsilon", 1e-2);
        if (params.at("derive").contains("constants"))
          derive.constants = constants_from_json(params.at("derive").at("constants"));
        spec.derive = derive;
      }
      if (params.contains("svrg")) spec.svrg_config = svrg_config_from_json(params.at("svrg"));
    }

    spec.seeds.clear();
    if (j.contains("seeds")) {
      for (const auto& s : j.at("seeds")) spec.seeds.push_back(s.get<std::uint64_t>());
    } else if (j.contains("seed")) {
      spec.seeds.push_back(j.at("seed").get<std::uint64_t>());
    } else {
      spec.seeds.push_back(1);
    }
    if (spec.seeds.empty()) throw SpecError("spec: seeds must not be empty");

    spec.budget = j.value("budget", -1LL);
    const std::string level = j.value("trace_level", std::string("snapshots"));
    if (level == "snapshots") {
      spec.trace_level = TraceLevel::snapshots;
    } else if (level == "steps") {
      spec.trace_level = TraceLevel::steps;
    } else {
      throw SpecError("spec: unknown trace_level " + level);
    }

    if (j.contains("certify")) {
      CertifySpec c;
      c.epsilon = j.at("certify").at("epsilon").get<double>();
      if (j.at("certify").contains("rho")) c.rho = j.at("certify").at("rho").get<double>();
      spec.certify = c;
    }
    if (j.contains("start")) spec.start = vector_from_json(j.at("start"));
  } catch (const json::exception& e) {
    throw SpecError(std::string("spec: ") + e.what());
  }
  return spec;
}

json ExperimentSpec::to_json() const {
  json j;
  j["objective"] = json{{"kind", objective.kind},
                        {"instance_seed", objective.instance_seed},
                        {"params", objective.params}};
  j["algorithm"] = to_string(algorithm);
  json params = json::object();
  if (escape_config) params["escape"] = escape_config_to_json(*escape_config);
  if (derive) {
    params["derive"] =
        json{{"epsilon", derive->epsilon}, {"constants", constants_to_json(derive->constants)}};
  }
  if (svrg_config) params["svrg"] = svrg_config_to_json(*svrg_config);
  if (!params.empty()) j["parameters"] = std::move(params);
  j["seeds"] = seeds;
  if (budget >= 0) j["budget"] = budget;
  j["trace_level"] = trace_level == TraceLevel::steps ? "steps" : "snapshots";
  if (certify) {
    json c{{"epsilon", certify->epsilon}};
    if (certify->rho) c["rho"] = *certify->rho;
    j["certify"] = std::move(c);
  }
  if (start) j["start"] = vector_to_json(*start);
  return j;
}

std::unique_ptr<FiniteSumObjective> build_objective(const ObjectiveSpec& spec) {
  Rng rng = Rng(spec.instance_seed).fork("instance");
  const json& p = spec.params;
  try {
    if (spec.kind == "quadratic_ensemble") {
      QuadraticEnsembleOptions opts;
      opts.dim = p.value("d", 2);
      opts.components = p.value("n", 1);
      opts.gamma = p.value("gamma", 1.0);
      opts.spread = p.value("spread", 0.0);
      opts.l_cap = p.value("l_cap", 1e3);
      return std::make_unique<QuadraticEnsemble>(make_quadratic_ensemble(opts, rng));
    }
    if (spec.kind == "bounded_saddle") {
      return std::make_unique<BoundedSaddle2D>(p.value("gamma", 1.0), p.value("n", 1),
                                               p.value("spread", 0.0), rng);
    }
    if (spec.kind == "matrix_sensing") {
      return std::make_unique<MatrixSensingInstance>(MatrixSensingInstance::make(
          p.value("d", 10), p.value("r", 1), p.value("n", 100), rng));
    }
    if (spec.kind == "instance_file") {
      return load_instance(p.at("path").get<std::string>());
    }
  } catch (const std::invalid_argument& e) {
    throw SpecError(std::string("objective: ") + e.what());
  } catch (const json::exception& e) {
    throw SpecError(std::string("objective params: ") + e.what());
  }
  throw SpecError("objective: unknown kind " + spec.kind);
}

EscapeConfig resolve_escape_config(const ExperimentSpec& spec, const FiniteSumObjective& obj) {
  EscapeConfig cfg;
  if (spec.escape_config) {
    cfg = *spec.escape_config;
  } else if (spec.derive) {
    if (!obj.lipschitz_l() || !obj.hessian_lipschitz() || !obj.component_hessian_lipschitz())
      throw SpecError(
          "spec: deriving parameters needs declared (L, rho, rho') on the objective; give an "
          "explicit escape config instead");
    const EscapeVariant variant = spec.algorithm == Algorithm::perturbed
                                      ? EscapeVariant::perturbed
                                      : EscapeVariant::stabilized;
    try {
      cfg = default_parameters(obj.component_count(), *obj.lipschitz_l(),
                               *obj.hessian_lipschitz(), *obj.component_hessian_lipschitz(),
                               spec.derive->epsilon, variant, spec.derive->constants);
    } catch (const std::invalid_argument& e) {
      throw SpecError(std::string("spec: ") + e.what());
    }
  } else {
    throw SpecError("spec: escape algorithms need parameters.escape or parameters.derive");
  }
  if (spec.budget >= 0) cfg.budget = spec.budget;
  if (cfg.budget < 0) throw SpecError("spec: escape algorithms need a stochastic-gradient budget");
  return cfg;
}

DomainSampler default_domain_sampler(const ObjectiveSpec& spec, const FiniteSumObjective& obj) {
  const int d = obj.dim();
  if (spec.kind == "bounded_saddle") {
    const double gamma = spec.params.value("gamma", 1.0);
    const double radius = 0.75 * std::sqrt(gamma);
    return [d, radius](Rng& rng) {
      return sample_ball(Eigen::VectorXd::Zero(d), radius, rng);
    };
  }
  if (spec.kind == "matrix_sensing") {
    // Random factors with operator norm in [0.5, 2], inside the admissible
    // ball with margin.
    const auto* sensing = dynamic_cast<const MatrixSensingInstance*>(&obj);
    const int rows = sensing ? sensing->rows() : d;
    const int rank = sensing ? sensing->rank() : 1;
    return [rows, rank](Rng& rng) {
      Eigen::MatrixXd u(rows, rank);
      for (int c = 0; c < rank; ++c)
        for (int r = 0; r < rows; ++r) u(r, c) = rng.normal();
      const double norm = rank == 1 ? u.col(0).norm()
                                    : Eigen::JacobiSVD<Eigen::MatrixXd>(u).singularValues()(0);
      u *= (0.5 + 1.5 * rng.uniform01()) / norm;
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(u.data(), rows * rank));
    };
  }
  return [d](Rng& rng) {
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.normal();
    return x;
  };
}

std::vector<RunTrace> run(const ExperimentSpec& spec) {
  const std::unique_ptr<FiniteSumObjective> obj = build_objective(spec.objective);
  Eigen::VectorXd x0 = spec.start ? *spec.start : Eigen::VectorXd::Zero(obj->dim());
  if (x0.size() != obj->dim()) throw SpecError("spec: start point has wrong dimension");

  EscapeConfig escape_cfg;
  SvrgConfig svrg_cfg;
  if (spec.algorithm == Algorithm::svrg) {
    if (!spec.svrg_config) throw SpecError("spec: algorithm svrg needs parameters.svrg");
    svrg_cfg = *spec.svrg_config;
    try {
      svrg_cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw SpecError(std::string("spec: ") + e.what());
    }
  } else {
    escape_cfg = resolve_escape_config(spec, *obj);
    try {
      escape_cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw SpecError(std::string("spec: ") + e.what());
    }
  }

  const int count = static_cast<int>(spec.seeds.size());
  std::vector<RunTrace> traces(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    Rng rng(spec.seeds[static_cast<std::size_t>(i)]);
    auto& slot = traces[static_cast<std::size_t>(i)];
    if (spec.algorithm == Algorithm::svrg) {
      GradCounter counter(spec.budget);
      slot = svrg_run(*obj, x0, svrg_cfg, rng, counter, spec.trace_level);
    } else if (spec.algorithm == Algorithm::perturbed) {
      GradCounter counter(escape_cfg.budget);
      slot = perturbed_svrg(*obj, x0, escape_cfg, rng, counter, spec.trace_level);
    } else {
      GradCounter counter(escape_cfg.budget);
      slot = stabilized_svrg(*obj, x0, escape_cfg, rng, counter, spec.trace_level);
    }
  }
  return traces;
}

long long first_certified_snapshot(const FiniteSumObjective& obj, const RunTrace& trace,
                                   double epsilon, double rho) {
  Rng base(Rng::mix(trace.seed, 0x43455254ULL));  // certification stream per trace
  for (std::size_t idx = 0; idx < trace.snapshots.size(); ++idx) {
    const auto& snap = trace.snapshots[idx];
    if (snap.grad_norm > epsilon) continue;  // cannot be second order
    Rng cert_rng = base.fork(static_cast<std::uint64_t>(snap.step));
    const StationarityReport report = certify(obj, snap.point, epsilon, rho, cert_rng);
    if (report.verdict == Stationarity::second_order && report.in_domain)
      return static_cast<long long>(idx);
  }
  return -1;
}

std::vector<CompareRow> compare(const std::vector<ExperimentSpec>& specs) {
  if (specs.empty()) throw SpecError("compare: needs at least one spec");
  const std::string reference = json{{"kind", specs.front().objective.kind},
                                     {"seed", specs.front().objective.instance_seed},
                                     {"params", specs.front().objective.params}}
                                    .dump();
  for (const auto& spec : specs) {
    const std::string other = json{{"kind", spec.objective.kind},
                                   {"seed", spec.objective.instance_seed},
                                   {"params", spec.objective.params}}
                                  .dump();
    if (other != reference)
      throw SpecError("compare: all specs must share the objective instance");
  }
  const std::unique_ptr<FiniteSumObjective> obj = build_objective(specs.front().objective);

  std::vector<CompareRow> rows;
  for (const auto& spec : specs) {
    double epsilon = 0.0;
    if (spec.certify) {
      epsilon = spec.certify->epsilon;
    } else if (spec.derive) {
      epsilon = spec.derive->epsilon;
    } else {
      throw SpecError("compare: specs need certify.epsilon (or a derive block)");
    }
    double rho = 0.0;
    if (spec.certify && spec.certify->rho) {
      rho = *spec.certify->rho;
    } else if (obj->hessian_lipschitz()) {
      rho = *obj->hessian_lipschitz();
    } else {
      throw SpecError("compare: rho is neither given nor declared by the objective");
    }

    const std::vector<RunTrace> traces = run(spec);
    CompareRow row;
    row.algorithm = to_string(spec.algorithm);
    row.seeds = static_cast<int>(traces.size());
    double sg_sum = 0.0;
    double final_sum = 0.0;
    long long escapes = 0;
    long long closed_spans = 0;
    for (const auto& trace : traces) {
      final_sum += trace.final_f;
      for (const auto& span : trace.super_epochs) {
        if (span.exit_reason == SuperEpochExit::open) continue;
        ++closed_spans;
        if (span.exit_reason == SuperEpochExit::distance) ++escapes;
      }
      const long long idx = first_certified_snapshot(*obj, trace, epsilon, rho);
      if (idx >= 0) {
        ++row.certified;
        sg_sum += static_cast<double>(trace.snapshots[static_cast<std::size_t>(idx)].sg_count);
      }
    }
    row.mean_sg_to_sosp = row.certified > 0
                              ? sg_sum / row.certified
                              : std::numeric_limits<double>::quiet_NaN();
    row.escape_rate = closed_spans > 0
                          ? static_cast<double>(escapes) / static_cast<double>(closed_spans)
                          : std::numeric_limits<double>::quiet_NaN();
    row.mean_final_f = final_sum / static_cast<double>(traces.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_compare_table(const std::vector<CompareRow>& rows) {
  std::ostringstream out;
  out << "algorithm seeds certified mean_sg_to_sosp escape_rate mean_final_f\n";
  for (const auto& row : rows) {
    out << row.algorithm << ' ' << row.seeds << ' ' << row.certified << ' '
        << format_double(row.mean_sg_to_sosp) << ' ' << format_double(row.escape_rate) << ' '
        << format_double(row.mean_final_f) << '\n';
  }
  return out.str();
}

void export_trace_csv(const RunTrace& trace, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw std::runtime_error("export_trace_csv: cannot write " + path);
  file << "step,f,grad_norm_snapshot,sg_count,epoch,super_epoch_flag,event\n";

  std::vector<CsvRow> rows;
  for (const auto& s : trace.snapshots) {
    push_row(rows, s.step, 0, format_double(s.f), format_double(s.grad_norm),
             std::to_string(s.sg_count), std::to_string(s.epoch), s.in_super_epoch, "snapshot");
  }
  for (const auto& s : trace.super_epochs) {
    push_row(rows, s.entry_step, 1, format_double(s.f_anchor),
             format_double(s.anchor_grad_norm), "", std::to_string(s.entry_epoch), true,
             "super_entry");
    if (s.exit_reason != SuperEpochExit::open) {
      push_row(rows, s.exit_step, 3, format_double(s.f_exit), "", "", "", false,
               s.exit_reason == SuperEpochExit::distance ? "super_exit_distance"
                                                         : "super_exit_step_cap");
    }
  }
  for (const auto& s : trace.steps) {
    push_row(rows, s.step, 2, format_double(s.f), "", std::to_string(s.sg_count),
             std::to_string(s.epoch), s.in_super_epoch, "step");
  }
  for (const auto& s : trace.random_stops) {
    push_row(rows, s.step, 3, "", "", "", std::to_string(s.epoch), false, "random_stop");
  }
  std::stable_sort(rows.begin(), rows.end(), [](const CsvRow& a, const CsvRow& b) {
    if (a.step != b.step) return a.step < b.step;
    return a.priority < b.priority;
  });
  for (const auto& row : rows) file << row.line << '\n';
}

void export_trace_json(const RunTrace& trace, const ExperimentSpec& spec,
                       const std::string& path) {
  json out;
  out["format"] = kTraceMagic;
  out["version"] = kFormatVersion;
  out["spec"] = spec.to_json();
  out["spec_hash"] = spec_hash(spec);
  out["trace"] = trace_to_json(trace);
  std::ofstream file(path);
  if (!file) throw std::runtime_error("export_trace_json: cannot write " + path);
  file << out.dump(2) << '\n';
}

ImportedTrace import_trace_json(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("import_trace_json: cannot read " + path);
  json in;
  try {
    file >> in;
    if (in.value("format", std::string()) != kTraceMagic)
      throw SpecError("trace file: bad magic header in " + path);
    if (in.value("version", 0) != kFormatVersion)
      throw SpecError("trace file: unsupported version in " + path);
    ImportedTrace imported;
    imported.spec = ExperimentSpec::from_json(in.at("spec"));
    imported.spec_hash = in.at("spec_hash").get<std::uint64_t>();
    imported.trace = trace_from_json(in.at("trace"));
    return imported;
  } catch (const json::exception& e) {
    throw SpecError(std::string("trace file: ") + e.what());
  }
}

std::uint64_t spec_hash(const ExperimentSpec& spec) { return fnv1a(spec.to_json().dump()); }

void save_instance(const FiniteSumObjective& obj, const ObjectiveSpec& spec,
                   const std::string& path) {
  json out;
  out["format"] = kInstanceMagic;
  out["version"] = kFormatVersion;
  out["kind"] = spec.kind;
  out["instance_seed"] = spec.instance_seed;
  out["params"] = spec.params;
  json data;
  if (const auto* q = dynamic_cast<const QuadraticEnsemble*>(&obj)) {
    data["linear"] = vector_to_json(q->linear_term());
    json comps = json::array();
    for (int i = 0; i < q->component_count(); ++i)
      comps.push_back(matrix_to_json(q->component_matrix(i)));
    data["components"] = std::move(comps);
  } else if (const auto* s = dynamic_cast<const BoundedSaddle2D*>(&obj)) {
    data["gamma"] = s->gamma();
    json noise = json::array();
    for (int i = 0; i < s->component_count(); ++i)
      noise.push_back(matrix_to_json(s->noise_matrix(i)));
    data["noise"] = std::move(noise);
  } else if (const auto* m = dynamic_cast<const MatrixSensingInstance*>(&obj)) {
    data["u_star"] = matrix_to_json(m->ground_truth());
    json sensing = json::array();
    for (int i = 0; i < m->component_count(); ++i)
      sensing.push_back(matrix_to_json(m->sensing_matrix(i)));
    data["sensing"] = std::move(sensing);
    data["lipschitz_l"] = m->lipschitz_l().value_or(0.0);
  } else {
    throw std::invalid_argument("save_instance: unsupported objective type");
  }
  out["data"] = std::move(data);
  std::ofstream file(path);
  if (!file) throw std::runtime_error("save_instance: cannot write " + path);
  file << out.dump() << '\n';
}

std::unique_ptr<FiniteSumObjective> load_instance(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("load_instance: cannot read " + path);
  json in;
  try {
    file >> in;
    if (in.value("format", std::string()) != kInstanceMagic)
      throw SpecError("instance file: bad magic header in " + path);
    if (in.value("version", 0) != kFormatVersion)
      throw SpecError("instance file: unsupported version in " + path);
    const std::string kind = in.at("kind").get<std::string>();
    const json& data = in.at("data");
    if (kind == "quadratic_ensemble") {
      std::vector<Eigen::MatrixXd> comps;
      for (const auto& c : data.at("components")) comps.push_back(matrix_from_json(c));
      return std::make_unique<QuadraticEnsemble>(std::move(comps),
                                                 vector_from_json(data.at("linear")));
    }
    if (kind == "bounded_saddle") {
      std::vector<Eigen::Matrix2d> noise;
      for (const auto& c : data.at("noise")) noise.push_back(matrix_from_json(c));
      return std::make_unique<BoundedSaddle2D>(data.at("gamma").get<double>(), std::move(noise));
    }
    if (kind == "matrix_sensing") {
      std::vector<Eigen::MatrixXd> sensing;
      for (const auto& c : data.at("sensing")) sensing.push_back(matrix_from_json(c));
      return std::make_unique<MatrixSensingInstance>(MatrixSensingInstance::from_parts(
          matrix_from_json(data.at("u_star")), std::move(sensing),
          data.at("lipschitz_l").get<double>()));
    }
    throw SpecError("instance file: unknown kind " + kind);
  } catch (const json::exception& e) {
    throw SpecError(std::string("instance file: ") + e.what());
  }
}

const char* to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::svrg: return "svrg";
    case Algorithm::perturbed: return "perturbed";
    case Algorithm::stabilized: return "stabilized";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "svrg") return Algorithm::svrg;
  if (name == "perturbed") return Algorithm::perturbed;
  if (name == "stabilized") return Algorithm::stabilized;
  throw SpecError("spec: unknown algorithm " + name);
}

}  // namespace stabsvrg
