#include "skorokhod/primal.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace skorokhod {

namespace {

void check_shapes(const Grid& g, const FlowPair& fp, const char* where) {
  if (fp.eta.rows() != g.horizon() || fp.eta.cols() != g.n() ||
      fp.rho.rows() != g.horizon() + 1 || fp.rho.cols() != g.n())
    throw std::invalid_argument(std::string(where) + ": flow shape does not match the grid");
}

bool in_barrier(const Barrier& b, int k, int i) {
  const int s = b.s[static_cast<std::size_t>(i)];
  if (s == Barrier::kNever) return false;
  switch (b.direction) {
    case Barrier::Direction::backward:
      return k <= s;
    case Barrier::Direction::forward:
    case Barrier::Direction::trivial:
      return k >= s;
  }
  return false;
}

}  // namespace

AdmissibilityResidual admissibility_residual(const Grid& g, const FlowPair& fp,
                                             const DiscreteMeasure& mu,
                                             const DiscreteMeasure& nu) {
  check_shapes(g, fp, "admissibility");
  if (mu.w.size() != g.n() || nu.w.size() != g.n())
    throw std::invalid_argument("admissibility: measure size does not match the grid");
  const int n = g.n();
  const int K = g.horizon();
  AdmissibilityResidual res;

  Vector m = mu.w;
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < n; ++i) {
      const double gap = std::abs(fp.rho(k, i) + fp.eta(k, i) - m[i]);
      res.evolution = std::max(res.evolution, gap);
    }
    m = heat_step(g, fp.eta.row(k).transpose());
  }
  for (int i = 0; i < n; ++i)
    res.evolution = std::max(res.evolution, std::abs(fp.rho(K, i) - m[i]));

  const Vector total = fp.stopped_total();
  for (int i = 0; i < n; ++i)
    res.target = std::max(res.target, std::abs(total[i] - nu.w[i]));

  double neg = 0.0;
  if (fp.eta.size() > 0) neg = std::min(neg, fp.eta.minCoeff());
  if (fp.rho.size() > 0) neg = std::min(neg, fp.rho.minCoeff());
  res.negativity = -neg;
  return res;
}

double primal_cost(const Grid& g, const FlowPair& fp, const LagrangianSpec& L) {
  check_shapes(g, fp, "primal_cost");
  const double dt = g.dt();
  double cost = 0.0;
  for (int k = 0; k < g.horizon(); ++k) {
    const Vector lk = lagrangian_slice(g, L, k);
    double slice = 0.0;
    for (int i = 0; i < g.n(); ++i) slice += lk[i] * fp.eta(k, i);
    cost += dt * slice;
  }
  return cost;
}

FlowPair transport_from_barrier(const Grid& g, const Barrier& b, const DiscreteMeasure& mu) {
  const int n = g.n();
  const int K = g.horizon();
  if (static_cast<int>(b.s.size()) != n)
    throw std::invalid_argument("transport: barrier size does not match the grid");
  for (int i = 0; i < n; ++i) {
    const int s = b.s[static_cast<std::size_t>(i)];
    if (s != Barrier::kNever && (s < 0 || s > K))
      throw std::invalid_argument("transport: barrier time index out of range at node " +
                                  std::to_string(i + 1));
  }
  const bool has_atom = b.t0_mass.size() > 0;
  if (has_atom) {
    if (b.direction != Barrier::Direction::backward)
      throw std::invalid_argument("transport: t=0 atom requires a backward barrier");
    if (b.t0_mass.size() != n)
      throw std::invalid_argument("transport: t0 atom size does not match the grid");
    for (int i = 0; i < n; ++i) {
      if (!(b.t0_mass[i] >= 0.0) || b.t0_mass[i] > mu.w[i] + 1e-12)
        throw std::invalid_argument("transport: t0 atom exceeds the source mass at node " +
                                    std::to_string(i + 1));
      if (b.t0_mass[i] > 0.0 && b.s[static_cast<std::size_t>(i)] == Barrier::kNever)
        throw std::invalid_argument("transport: t0 atom at a node outside the barrier");
    }
  }
  if (mu.w.size() != n) throw std::invalid_argument("transport: measure size mismatch");

  FlowPair fp = FlowPair::zeros(g);
  const double half = g.ratio() / 2.0;
  Vector m = mu.w;
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < n; ++i) {
      double stop = 0.0;
      if (in_barrier(b, k, i)) {
        if (k == 0 && has_atom)
          stop = std::min(m[i], b.t0_mass[i]);
        else
          stop = m[i];
      }
      fp.rho(k, i) = stop;
      fp.eta(k, i) = m[i] - stop;
    }
    fp.killed_mass += half * (fp.eta(k, 0) + fp.eta(k, n - 1));
    m = heat_step(g, fp.eta.row(k).transpose());
  }
  fp.rho.row(K) = m.transpose();
  return fp;
}

double heat_comparison(const Grid& g, const FlowPair& fp, const DiscreteMeasure& mu) {
  check_shapes(g, fp, "heat_comparison");
  if (mu.w.size() != g.n()) throw std::invalid_argument("heat_comparison: measure size mismatch");
  Vector free = mu.w;
  double excess = 0.0;
  for (int k = 0; k < g.horizon(); ++k) {
    for (int i = 0; i < g.n(); ++i)
      excess = std::max(excess, fp.eta(k, i) - free[i]);
    free = heat_step(g, free);
  }
  return excess;
}

}  // namespace skorokhod
