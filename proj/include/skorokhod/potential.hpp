#pragma once
// Potential-flow view of an admissible flow: U_k = G(eta_k + sum_{j<=k} rho_j).
// The backward time difference satisfies U_k - U_{k+1} = dt * eta_k exactly,
// which makes monotonicity and barrier constancy sharp checks rather than
// discretization statements.

#include "skorokhod/lattice.hpp"
#include "skorokhod/measures.hpp"
#include "skorokhod/primal.hpp"

namespace skorokhod {

struct PotentialFlow {
  Field U;      // (K+1) x n; row K uses the convention eta_K == 0
  Vector U_mu;  // G(mu)
  Vector U_nu;  // G(nu)
};

PotentialFlow potential_flow(const Grid& g, const FlowPair& fp, const DiscreteMeasure& mu,
                             const DiscreteMeasure& nu);

struct PotentialChecks {
  double monotonicity = 0.0;       // max over k,x of U_{k+1} - U_k
  double endpoint_start = 0.0;     // ||U_0 - G(mu)||_inf
  double endpoint_final = 0.0;     // ||U_K - G(nu)||_inf
  double barrier_constancy = 0.0;  // max |U_{k+1} - U_k| where eta_k == 0
  bool pass = false;
};

PotentialChecks potential_checks(const Grid& g, const PotentialFlow& pf, const FlowPair& fp,
                                 double tol);

struct QuasivariationalReport {
  double sup = 0.0;
  double l1 = 0.0;  // space-time integrated: dx * dt * sum over slices and nodes
};

// Residual of min(cumulative stopped mass, U_k - U_nu) = 0, the discrete form
// of the obstacle characterization of the potential flow.  Approximate at any
// fixed mesh; shrinks under (dx, dt) -> (dx/2, dt/4) refinement.
QuasivariationalReport quasivariational_residual(const Grid& g, const PotentialFlow& pf,
                                                 const FlowPair& fp);

}  // namespace skorokhod
