#include "skorokhod/potential.hpp"

#include <cmath>
#include <stdexcept>

namespace skorokhod {

PotentialFlow potential_flow(const Grid& g, const FlowPair& fp, const DiscreteMeasure& mu,
                             const DiscreteMeasure& nu) {
  const int n = g.n();
  const int K = g.horizon();
  if (fp.eta.rows() != K || fp.rho.rows() != K + 1 || fp.eta.cols() != n)
    throw std::invalid_argument("potential_flow: flow shape does not match the grid");
  PotentialFlow pf;
  pf.U.resize(K + 1, n);
  pf.U_mu = g.green_solve(mu.w);
  pf.U_nu = g.green_solve(nu.w);
  Vector cum = Vector::Zero(n);
  for (int k = 0; k <= K; ++k) {
    cum += fp.rho.row(k).transpose();
    Vector src = cum;
    if (k < K) src += fp.eta.row(k).transpose();
    pf.U.row(k) = g.green_solve(src).transpose();
  }
  return pf;
}

PotentialChecks potential_checks(const Grid& g, const PotentialFlow& pf, const FlowPair& fp,
                                 double tol) {
  const int n = g.n();
  const int K = g.horizon();
  if (pf.U.rows() != K + 1 || pf.U.cols() != n)
    throw std::invalid_argument("potential_checks: potential shape mismatch");
  PotentialChecks pc;
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < n; ++i) {
      const double rise = pf.U(k + 1, i) - pf.U(k, i);
      pc.monotonicity = std::max(pc.monotonicity, rise);
      if (fp.eta(k, i) == 0.0)
        pc.barrier_constancy = std::max(pc.barrier_constancy, std::abs(rise));
    }
  }
  pc.endpoint_start = (pf.U.row(0).transpose() - pf.U_mu).cwiseAbs().maxCoeff();
  pc.endpoint_final = (pf.U.row(K).transpose() - pf.U_nu).cwiseAbs().maxCoeff();
  pc.pass = pc.monotonicity <= tol && pc.endpoint_start <= tol && pc.barrier_constancy <= tol;
  return pc;
}

QuasivariationalReport quasivariational_residual(const Grid& g, const PotentialFlow& pf,
                                                 const FlowPair& fp) {
  const int n = g.n();
  const int K = g.horizon();
  if (pf.U.rows() != K + 1 || fp.rho.rows() != K + 1)
    throw std::invalid_argument("quasivariational_residual: shape mismatch");
  QuasivariationalReport qr;
  Vector cum = Vector::Zero(n);
  double total = 0.0;
  for (int k = 0; k <= K; ++k) {
    cum += fp.rho.row(k).transpose();
    for (int i = 0; i < n; ++i) {
      const double branch = std::min(cum[i], pf.U(k, i) - pf.U_nu[i]);
      const double mag = std::abs(branch);
      qr.sup = std::max(qr.sup, mag);
      total += mag;
    }
  }
  qr.l1 = g.dx() * g.dt() * total;
  return qr;
}

}  // namespace skorokhod
