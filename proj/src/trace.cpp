#include "stabsvrg/trace.hpp"

#include <stdexcept>

namespace stabsvrg {

void RunTrace::validate() const {
  long long last_step = -1;
  long long last_sg = -1;
  for (const auto& snap : snapshots) {
    if (snap.step < last_step) throw std::logic_error("trace: snapshot steps not increasing");
    if (snap.sg_count < last_sg) throw std::logic_error("trace: gradient counter decreased");
    last_step = snap.step;
    last_sg = snap.sg_count;
  }
  last_step = -1;
  for (const auto& rec : steps) {
    if (rec.step <= last_step) throw std::logic_error("trace: step records not increasing");
    last_step = rec.step;
  }
  long long previous_exit = -1;
  for (const auto& span : super_epochs) {
    if (span.entry_step < previous_exit)
      throw std::logic_error("trace: overlapping super epochs");
    if (span.exit_reason == SuperEpochExit::open) {
      if (&span != &super_epochs.back())
        throw std::logic_error("trace: only the last super epoch may be open");
    } else {
      if (span.exit_step < span.entry_step)
        throw std::logic_error("trace: super epoch exits before it enters");
      previous_exit = span.exit_step;
    }
  }
  if (total_sg < 0) throw std::logic_error("trace: negative gradient count");
}

const char* to_string(RunStatus status) {
  switch (status) {
    case RunStatus::completed: return "completed";
    case RunStatus::budget_exhausted: return "budget_exhausted";
    case RunStatus::diverged: return "diverged";
  }
  return "unknown";
}

const char* to_string(SuperEpochExit reason) {
  switch (reason) {
    case SuperEpochExit::open: return "open";
    case SuperEpochExit::distance: return "distance";
    case SuperEpochExit::step_cap: return "step_cap";
  }
  return "unknown";
}

}  // namespace stabsvrg
