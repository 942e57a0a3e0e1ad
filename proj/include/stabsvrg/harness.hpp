#pragma once

#include "stabsvrg/escape.hpp"
#include "stabsvrg/objective.hpp"
#include "stabsvrg/svrg.hpp"
#include "stabsvrg/trace.hpp"
#include "stabsvrg/verify.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace stabsvrg {

/// Raised on malformed experiment specs; the CLI maps it to exit code 2.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ObjectiveSpec {
  std::string kind;  // quadratic_ensemble | bounded_saddle | matrix_sensing | instance_file
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t instance_seed = 0;
};

enum class Algorithm { svrg, perturbed, stabilized };

struct DeriveSpec {
  double epsilon = 1e-2;
  EscapeConstants constants;
};

struct CertifySpec {
  double epsilon = 1e-2;
  std::optional<double> rho;  // falls back to the objective's declared value
};

/// Fully determines a reproducible experiment; serializable and
/// round-trippable as JSON.
struct ExperimentSpec {
  ObjectiveSpec objective;
  Algorithm algorithm = Algorithm::stabilized;
  std::optional<EscapeConfig> escape_config;  // explicit parameters, or
  std::optional<DeriveSpec> derive;           // derived from the accuracy target
  std::optional<SvrgConfig> svrg_config;      // for algorithm == svrg
  std::vector<std::uint64_t> seeds{1};
  long long budget = -1;
  TraceLevel trace_level = TraceLevel::snapshots;
  std::optional<CertifySpec> certify;
  std::optional<Eigen::VectorXd> start;  // default: origin

  static ExperimentSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

std::unique_ptr<FiniteSumObjective> build_objective(const ObjectiveSpec& spec);

/// Resolves the escape configuration (explicit or derived) against the
/// objective's declared constants; throws SpecError when underdetermined.
EscapeConfig resolve_escape_config(const ExperimentSpec& spec, const FiniteSumObjective& obj);

/// Samples admissible points appropriate for the objective kind (used by the
/// constants CLI and the probes).
DomainSampler default_domain_sampler(const ObjectiveSpec& spec, const FiniteSumObjective& obj);

/// Executes the named algorithm once per seed (seeds run in a parallel
/// worker pool, each owning its RNG fork); deterministic per seed.
std::vector<RunTrace> run(const ExperimentSpec& spec);

struct CompareRow {
  std::string algorithm;
  int seeds = 0;
  int certified = 0;            // seeds that reached a certified SOSP
  double mean_sg_to_sosp = 0.0; // over certified seeds; NaN when none
  double escape_rate = 0.0;     // distance exits / closed super epochs; NaN when none
  double mean_final_f = 0.0;
};

/// Runs each spec (all must share the objective instance) and aggregates.
/// Gradients-to-SOSP is computed post hoc by certifying along each trace's
/// snapshot points and taking the first certified one.
std::vector<CompareRow> compare(const std::vector<ExperimentSpec>& specs);

std::string format_compare_table(const std::vector<CompareRow>& rows);

/// Index of the first snapshot certified as a second-order stationary point,
/// or -1. Certification seeds derive from the trace seed and snapshot step.
long long first_certified_snapshot(const FiniteSumObjective& obj, const RunTrace& trace,
                                   double epsilon, double rho);

// Trace persistence. CSV columns:
//   step,f,grad_norm_snapshot,sg_count,epoch,super_epoch_flag,event
// (one row per trace record; an empty trace gives a header-only file). The
// structured format embeds the full spec for provenance.
void export_trace_csv(const RunTrace& trace, const std::string& path);
void export_trace_json(const RunTrace& trace, const ExperimentSpec& spec,
                       const std::string& path);

struct ImportedTrace {
  ExperimentSpec spec;
  std::uint64_t spec_hash = 0;
  RunTrace trace;
};

ImportedTrace import_trace_json(const std::string& path);

/// Stable content hash of the canonical spec JSON.
std::uint64_t spec_hash(const ExperimentSpec& spec);

// Objective instance persistence (self-describing, versioned, stores the
// matrices so experiments replay without regenerating randomness).
void save_instance(const FiniteSumObjective& obj, const ObjectiveSpec& spec,
                   const std::string& path);
std::unique_ptr<FiniteSumObjective> load_instance(const std::string& path);

const char* to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& name);

}  // namespace stabsvrg
