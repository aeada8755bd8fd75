#pragma once
// Eulerian primal objects: occupation/stopping flow pairs, admissibility
// residuals, running cost, and the deterministic transport induced by a
// barrier.
//
// Flow convention: eta has K rows (occupation after the stopping decision at
// slice k, for k = 0..K-1), rho has K+1 rows (mass stopped at slice k, with
// the forced horizon stop in row K).  The discrete evolution is
//   m_0 = mu,  rho_k + eta_k = m_k (k < K),  m_{k+1} = P eta_k,  rho_K = m_K.

#include "skorokhod/lagrangian.hpp"
#include "skorokhod/lattice.hpp"
#include "skorokhod/measures.hpp"

#include <vector>

namespace skorokhod {

struct FlowPair {
  Field eta;  // K x n
  Field rho;  // (K+1) x n
  double killed_mass = 0.0;  // mass lost through the Dirichlet boundary

  static FlowPair zeros(const Grid& g) {
    FlowPair fp;
    fp.eta = Field::Zero(g.horizon(), g.n());
    fp.rho = Field::Zero(g.horizon() + 1, g.n());
    return fp;
  }
  Vector stopped_total() const { return rho.colwise().sum().transpose(); }
  double horizon_mass() const { return rho.row(rho.rows() - 1).sum(); }
};

// Stopping region, one time index per node.
//   forward:  node i absorbs at slices k >= s[i]   (epigraph, Root type)
//   backward: node i absorbs at slices k <= s[i]   (hypograph, Rost type)
// s[i] == kNever means the node never absorbs before the forced horizon stop.
// A backward barrier may carry a prescribed t=0 atom t0_mass[i] <= mu[i] on its
// in-barrier nodes: at k == 0 only the atom stops and the remainder continues
// (partial stopping of the initial mass), which is the lattice analogue of the
// time-reversed construction releasing mass from inside the stopping region.
// Every other in-barrier encounter stops the full mass present.
struct Barrier {
  enum class Direction { forward, backward, trivial };
  static constexpr int kNever = -1;

  Direction direction = Direction::forward;
  std::vector<int> s;       // size n, values in {kNever} union [0, K]
  Vector t0_mass;           // size 0 when absent; backward barriers only
  double eps_used = 0.0;    // coincidence tolerance used at extraction time
};

struct AdmissibilityResidual {
  double evolution = 0.0;   // sup-norm over all evolution equalities
  double target = 0.0;      // sup-norm of (sum_k rho_k) - nu
  double negativity = 0.0;  // largest negative excursion of eta or rho
};

AdmissibilityResidual admissibility_residual(const Grid& g, const FlowPair& fp,
                                             const DiscreteMeasure& mu,
                                             const DiscreteMeasure& nu);

// sum_{k<K} dt * <L_k, eta_k>, accumulated in fixed slice order.
double primal_cost(const Grid& g, const FlowPair& fp, const LagrangianSpec& L);

// Deterministic forward push of mu under the barrier's stopping rule.
// The returned pair carries the boundary-killed mass; the forced horizon
// stop is row K of rho.
FlowPair transport_from_barrier(const Grid& g, const Barrier& b,
                                const DiscreteMeasure& mu);

// Largest excursion of eta above the unstopped heat evolution of mu
// (occupation of surviving mass can never exceed the free evolution).
double heat_comparison(const Grid& g, const FlowPair& fp, const DiscreteMeasure& mu);

}  // namespace skorokhod
