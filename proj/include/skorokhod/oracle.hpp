#pragma once
// Ground-truth oracle: the admissibility LP solved exactly in rational
// arithmetic by a dense two-phase simplex.  Production code never calls this;
// tests compare the ascent solver against it on small instances.

#include "skorokhod/hjb.hpp"
#include "skorokhod/lagrangian.hpp"
#include "skorokhod/lattice.hpp"
#include "skorokhod/measures.hpp"
#include "skorokhod/primal.hpp"

#include <gmpxx.h>

#include <stdexcept>
#include <utility>
#include <vector>

namespace skorokhod {

using Rational = mpq_class;

struct OracleOptions {
  int max_variables = 5000;  // size guard; beyond it the oracle refuses to run
};

struct OracleSizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Equality-form LP over x = (eta_{k,i} : k<K; rho_{k,i} : k<=K), minimize
// sum dt*L_k*eta_k subject to the admissibility equalities and x >= 0.
// Rows: evolution blocks k = 0..K ((K+1)*n rows: rho_k + eta_k - P eta_{k-1}
// equals mu for k=0, zero otherwise, with the horizon row rho_K - P eta_{K-1})
// followed by the n target rows sum_k rho_k = nu.
struct AssembledLp {
  int n = 0;       // interior nodes
  int K = 0;       // horizon steps
  int n_vars = 0;  // K*n + (K+1)*n
  int n_rows = 0;  // (K+2)*n
  std::vector<std::vector<std::pair<int, Rational>>> cols;  // per-variable sparse column
  std::vector<Rational> rhs;
  std::vector<Rational> obj;

  int eta_index(int k, int i) const { return k * n + i; }
  int rho_index(int k, int i) const { return K * n + k * n + i; }
  int evolution_row(int k, int i) const { return k * n + i; }
  int target_row(int i) const { return (K + 1) * n + i; }
};

// Exactly renormalizes nonnegative weights to unit mass in rationals
// (doubles convert exactly; the sum then divides out).
std::vector<Rational> exact_unit_mass(const Vector& w);

AssembledLp assemble_lp(const Grid& g, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                        const LagrangianSpec& L, const OracleOptions& opts = {});

// Dual ray proving infeasibility: multipliers (psi, J) with psi <= J_k,
// P J_{k+1} <= J_k - 0 (ray feasibility for the zero-cost system) and ray
// value <psi,nu> - <J_0,mu> > 0, all exact.
struct FarkasCertificate {
  std::vector<Rational> psi;
  std::vector<std::vector<Rational>> J;  // (K+1) x n
  Rational value;
};

struct OracleSolution {
  enum class Status { optimal, infeasible };
  Status status = Status::optimal;
  Rational cost;

  FlowPair fp;   // rounded exact primal optimum
  ValuePair vp;  // rounded exact dual optimum (any vertex dual)
  std::vector<Rational> eta_exact;             // layout AssembledLp::eta_index
  std::vector<Rational> rho_exact;             // layout AssembledLp::rho_index
  std::vector<Rational> psi_exact;             // n
  std::vector<std::vector<Rational>> J_exact;  // (K+1) x n

  FarkasCertificate certificate;  // meaningful when infeasible
  long pivots = 0;
};

OracleSolution solve_lp_exact(const Grid& g, const DiscreteMeasure& mu,
                              const DiscreteMeasure& nu, const LagrangianSpec& L,
                              const OracleOptions& opts = {});

}  // namespace skorokhod
