#pragma once
// Dual side: obstacle value fields, the variational-inequality residuals, the
// supergradient ascent production solver, and the duality diagnostics.
//
// A value pair (psi, J) is dual feasible when J_K = psi, J >= psi, and
// J_k >= P J_{k+1} - dt L_k for every k < K; its dual value is
// <psi,nu> - <J_0,mu>, a certified lower bound on the primal cost.

#include "skorokhod/lagrangian.hpp"
#include "skorokhod/lattice.hpp"
#include "skorokhod/measures.hpp"
#include "skorokhod/primal.hpp"

#include <optional>
#include <string>

namespace skorokhod {

struct ValuePair {
  Vector psi;  // terminal reward on interior nodes (zero outside)
  Field J;     // (K+1) x n, row K equals psi by construction
};

// Dynamic-programming closure of psi: J_K = psi, J_k = max(psi, P J_{k+1} - dt L_k).
ValuePair backward_induction(const Grid& g, const Vector& psi, const LagrangianSpec& L);

struct ViResidual {
  double supersolution = 0.0;  // negative parts of (J - psi) and the scheme rows
  double equation = 0.0;       // |min(J - psi, J_k - P J_{k+1} + dt L_k)| plus |J_K - psi|
};

ViResidual vi_residual(const Grid& g, const ValuePair& vp, const LagrangianSpec& L);

double dual_value(const ValuePair& vp, const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Exact optimal dual for a time-independent cost: psi = -G(Lbar).  Its
// backward induction is the stationary field J == psi, and the cost identity
// <psi,nu> - <psi,mu> holds for every admissible flow.
Vector stationary_potential(const Grid& g, const Vector& lbar);

// Default coincidence tolerance: 1e-9 * max(1, D*dt*K).
double default_coincidence_eps(const Grid& g, const LagrangianSpec& L);

// Forward push of mu stopping all mass on the coincidence set {J_k - psi <= eps}.
// For a decreasing cost the k=0 coincidence stops the partial atom min(m_0, nu)
// and lets the remainder continue; everything surviving at K is stopped there.
FlowPair induced_stopping(const Grid& g, const ValuePair& vp, const DiscreteMeasure& mu,
                          const DiscreteMeasure& nu, const LagrangianSpec& L, double eps);

struct MonotonicityReport {
  double violation = 0.0;          // against the direction the kind dictates
  double horizon_violation = 0.0;  // decreasing kind only: the excluded last slice
  bool pass = false;
};

// increasing: J nonincreasing in k; decreasing: J nondecreasing in k up to
// slice K-1 (the forced terminal condition breaks the last step, reported
// separately); stationary: J constant in k.
MonotonicityReport monotonicity_check(const Grid& g, const ValuePair& vp,
                                      const LagrangianSpec& L, double tol = 1e-12);

// sum_k <rho_k, J_k - psi> + sum_{k<K} <eta_k, J_k - P J_{k+1} + dt L_k>;
// zero exactly at a primal/dual optimal pair.
double slackness_residual(const Grid& g, const FlowPair& fp, const ValuePair& vp,
                          const LagrangianSpec& L);

// Three normalization passes for a dual pair: harmonic part removal (a no-op
// with zero boundary data), subtraction of the superharmonic envelope of psi,
// and the clamp min(psi3 - psi2, -(1/2)Lap psi3 + D) = 0 solved by projected
// successive over-relaxation.  Never decreases the dual value on ordered input.
ValuePair normalize_dual(const Grid& g, const ValuePair& vp, const LagrangianSpec& L);

// Smallest superharmonic function above v (projected SOR on the obstacle problem).
Vector superharmonic_envelope(const Grid& g, const Vector& v);

// Smallest w >= v with -(1/2) Lap w <= bound (PSOR).
Vector clamp_supersolution(const Grid& g, const Vector& v, double bound);

struct AscendOptions {
  long max_iter = -1;      // < 0: automatic budget
  double tol = 1e-8;       // convergence: target TV and relative duality gap
  double eps = -1.0;       // coincidence tolerance, < 0 means the default
  double alpha0 = -1.0;    // initial step scale, < 0: sup(L)*dt*K/4
  int epochs = -1;         // restart epochs of the 1/sqrt(n) schedule, < 0 auto
  double decay = 0.5;      // per-epoch shrink of alpha0
  int average_every = 16;  // evaluate the Polyak tail average at this cadence
  bool normalize = false;  // apply normalize_dual to the returned pair
  Vector psi0;             // optional warm start (empty: start from zero)
};

struct AscendReport {
  bool infeasible = false;
  OrderCheck order;
  bool converged = false;
  long iterations = 0;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double target_tv = 0.0;
  double target_sup = 0.0;
  double slackness = 0.0;
  double eps = 0.0;
  double killed_mass = 0.0;
};

struct AscendResult {
  ValuePair vp;
  FlowPair fp;
  AscendReport report;
};

// Production solver.  Supergradient ascent on F(psi) = <psi,nu> - <J_0^psi,mu>
// with steps alpha_n = alpha0/sqrt(n), Polyak tail averaging, and restart
// epochs with geometrically shrinking alpha0.  Short-circuits: mu == nu stops
// at time zero; a stationary cost takes the exact dual psi = -G(Lbar) and
// builds the embedding flow with an increasing surrogate cost (any admissible
// flow attains the same cost).  Infeasible inputs return the order witness.
AscendResult ascend(const Grid& g, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                    const LagrangianSpec& L, const AscendOptions& opts = {});

}  // namespace skorokhod
