#pragma once
// Orchestration shared by the CLI and the test suites: solve a configured
// instance, derive the barrier/potential/flux diagnostics, write artifacts,
// and run the full verification table.

#include "skorokhod/barrier.hpp"
#include "skorokhod/config.hpp"
#include "skorokhod/hjb.hpp"
#include "skorokhod/potential.hpp"

#include <optional>
#include <string>
#include <vector>

namespace skorokhod {

struct SolveArtifacts {
  std::optional<Grid> grid;
  DiscreteMeasure mu;
  DiscreteMeasure nu;
  AscendResult sol;
  std::optional<Barrier> barrier;    // absent for kinds without a barrier class
  std::optional<FlowPair> transport; // deterministic push of mu through the barrier
  std::optional<McResult> mc;        // path simulation against the barrier
  std::optional<PotentialFlow> potential;
  PotentialChecks pot_checks;
  QuasivariationalReport qv;
  FluxReport flux;
  double transport_target_tv = 0.0;  // TV between barrier transport and nu
  std::vector<std::string> files;
};

// Exit codes: 0 solved within tolerance, 2 infeasible (order witness written
// into the report), 3 feasible but not converged within the budget.  Throws on
// configuration errors; the CLI maps exceptions to exit code 1.  When
// write_files is false nothing touches the filesystem.
int run_solve(const RunConfig& cfg, SolveArtifacts* out = nullptr, bool write_files = true);

struct CheckRow {
  std::string name;
  bool pass = false;
  bool skipped = false;
  double value = 0.0;
  double tol = 0.0;
  std::string note;
};

// Invariant suite over a solved instance; rows marked skipped (e.g. the exact
// LP beyond its size guard) do not fail the run.  Exit 0 iff no row fails.
int run_verify(const RunConfig& cfg, std::vector<CheckRow>* rows = nullptr,
               bool write_files = true);

// Solves, extracts the barrier, and runs the path simulation against it.
int run_simulate(const RunConfig& cfg, McResult* out = nullptr, bool write_files = true);

// Artifact helpers (also used by the golden-file tests).
std::string format_field_csv(const Grid& g, const Field& field);
std::string format_barrier_csv(const Grid& g, const Barrier& b);

}  // namespace skorokhod
