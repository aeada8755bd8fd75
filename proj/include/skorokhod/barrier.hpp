#pragma once
// Free-boundary extraction from a converged dual pair, the path-level Monte
// Carlo counterpart of the barrier transport, and the flux diagnostic that
// ties the target measure to the barrier geometry.

#include "skorokhod/hjb.hpp"
#include "skorokhod/primal.hpp"

#include <cstdint>
#include <vector>

namespace skorokhod {

// Coincidence-set scan.  increasing: s(i) = first k < K with J_k - psi <= eps
// (kNever when the node only stops at the forced horizon).  decreasing:
// s(i) = last k < K with J_k - psi <= eps; every in-barrier node carries the
// t=0 atom min(mu, nu) when the measures are supplied, since a monotone value
// field is coincident at k = 0 wherever it is coincident at all and the
// initial mass may stop only partially there.  stationary: s == 0.
Barrier extract_barrier(const Grid& g, const ValuePair& vp, const LagrangianSpec& L,
                        double eps, const DiscreteMeasure* mu = nullptr,
                        const DiscreteMeasure* nu = nullptr);

struct McOptions {
  long n_paths = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct McResult {
  Vector empirical;         // stopped mass fraction per node
  std::vector<long long> counts;
  double killed_fraction = 0.0;
  double horizon_fraction = 0.0;  // paths stopped by force at slice K
  double mean_cost = 0.0;
  double stderr_cost = 0.0;
  double mean_reward = 0.0;    // mean of psi(X_tau) - accrued cost (when vp given)
  double stderr_reward = 0.0;
  double expected_reward = 0.0;   // <J_0, mu> (when vp given)
  bool martingale_ok = true;      // |mean_reward - expected_reward| <= 3 stderr
  double mean_stop_time = 0.0;
  long n_paths = 0;
};

// Simulates independent killed random walks under the barrier's stopping rule.
// Every path's randomness is a pure function of (seed, path index), and the
// reduction runs over fixed path blocks, so results are bitwise identical for
// any thread count.  When vp is supplied the per-path stopped reward
// psi(X_tau) - sum_{k<tau} L dt is accumulated (zero reward on killed paths),
// whose mean estimates <J_0, mu> at optimality.
McResult hitting_simulate(const Grid& g, const Barrier& b, const DiscreteMeasure& mu,
                          const LagrangianSpec& L, const McOptions& opts,
                          const ValuePair* vp = nullptr);

struct FluxReport {
  Vector residual;     // per node; zero where the formula does not apply
  double l1 = 0.0;     // dx-weighted l1 of residual over applicable nodes
  int applicable = 0;  // nodes where the sloped-boundary formula was evaluated
  int degenerate = 0;  // flat stretches that fell back to the mass balance
  double balance_sup = 0.0;  // sup of the raw mass-balance fallback residuals
};

// Checks nu(z) against the boundary flux (1/2) s'(z) * (outward eta slope) at
// the barrier graph, centered differences for s and one-sided differences for
// eta on the live side.  Flat stretches are flagged and checked through the
// exact slice mass balance instead of dividing by zero.
FluxReport flux_residual(const Grid& g, const Barrier& b, const FlowPair& fp,
                         const DiscreteMeasure& nu);

}  // namespace skorokhod
