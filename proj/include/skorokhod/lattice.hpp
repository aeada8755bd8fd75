#pragma once
// 1D interior lattice for the explicit parabolic scheme with Dirichlet killing
// at both ends, plus the Green solver for the killed half-Laplacian.
//
// Conventions used across the library:
//   - interior nodes are 0-based internally, i = 0..n-1, at x_i = x_min + (i+1)*dx
//   - time slices are k = 0..K at t_k = k*dt with dt = r*dx^2
//   - fields are dense matrices, row = time slice, column = node
//   - measures and occupation fields carry atom masses, not densities; the
//     mesh widths live inside the operators only

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace skorokhod {

template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = Vec<double>;
// Time-slice rows are the unit of work everywhere, so fields store rows
// contiguously.
using Field = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct GridConfig {
  double x_min = 0.0;
  double x_max = 1.0;
  int n_interior = 1;
  double ratio = 1.0;     // r = dt/dx^2; the explicit step is monotone iff 0 < r <= 1
  int horizon_steps = 1;  // K, number of time steps; slices run k = 0..K
};

class Grid {
 public:
  explicit Grid(const GridConfig& cfg) : cfg_(cfg) {
    if (!(cfg.x_max > cfg.x_min))
      throw std::invalid_argument("grid: x_max must exceed x_min");
    if (cfg.n_interior < 1)
      throw std::invalid_argument("grid: n_interior must be >= 1");
    if (!(cfg.ratio > 0.0) || cfg.ratio > 1.0)
      throw std::invalid_argument("grid: ratio r = dt/dx^2 must satisfy 0 < r <= 1");
    if (cfg.horizon_steps < 1)
      throw std::invalid_argument("grid: horizon_steps must be >= 1");
    dx_ = (cfg.x_max - cfg.x_min) / (cfg.n_interior + 1);
    dt_ = cfg.ratio * dx_ * dx_;
    xs_.resize(cfg.n_interior);
    for (int i = 0; i < cfg.n_interior; ++i) xs_[i] = cfg.x_min + (i + 1) * dx_;
    // A = -(1/2) * Lap_h with zero Dirichlet rows folded in; SPD tridiagonal.
    const int n = cfg.n_interior;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    const double diag = 1.0 / (dx_ * dx_);
    const double off = -0.5 / (dx_ * dx_);
    for (int i = 0; i < n; ++i) {
      a(i, i) = diag;
      if (i > 0) a(i, i - 1) = off;
      if (i + 1 < n) a(i, i + 1) = off;
    }
    llt_.compute(a);
    if (llt_.info() != Eigen::Success)
      throw std::runtime_error("grid: Green operator factorization failed");
  }

  int n() const { return cfg_.n_interior; }
  int horizon() const { return cfg_.horizon_steps; }
  double dx() const { return dx_; }
  double dt() const { return dt_; }
  double ratio() const { return cfg_.ratio; }
  double x_min() const { return cfg_.x_min; }
  double x_max() const { return cfg_.x_max; }
  double x(int i) const { return xs_[i]; }
  double t(int k) const { return k * dt_; }
  const Vector& nodes() const { return xs_; }
  const GridConfig& config() const { return cfg_; }

  // Solves -(1/2) Lap_h U = f with zero boundary values.
  Vector green_solve(const Vector& f) const {
    if (f.size() != n()) throw std::invalid_argument("green_solve: size mismatch");
    return llt_.solve(f);
  }

 private:
  GridConfig cfg_;
  double dx_ = 0.0;
  double dt_ = 0.0;
  Vector xs_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline Grid build_grid(const GridConfig& cfg) { return Grid(cfg); }

// Lap_h v with zero values beyond both ends.
template <class S>
Vec<S> laplacian_apply(const Vec<S>& v, S dx) {
  const Eigen::Index n = v.size();
  Vec<S> out(n);
  const S inv = S(1) / (dx * dx);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S left = (i > 0) ? v[i - 1] : S(0);
    const S right = (i + 1 < n) ? v[i + 1] : S(0);
    out[i] = (left - S(2) * v[i] + right) * inv;
  }
  return out;
}

inline Vector laplacian_apply(const Grid& g, const Vector& v) {
  if (v.size() != g.n()) throw std::invalid_argument("laplacian_apply: size mismatch");
  return laplacian_apply<double>(v, g.dx());
}

// One explicit step of the killed heat semigroup: P v = v + (dt/2) Lap_h v,
// written in stencil form (1-r) v_i + (r/2)(v_{i-1} + v_{i+1}).  P is symmetric,
// entrywise nonnegative for r <= 1, and substochastic only in the two rows next
// to the boundary (the deficit is the killed mass).  The stencil is evaluated
// the same way for every input so that rounding preserves entrywise order.
template <class S>
Vec<S> heat_step_with_ratio(const Vec<S>& v, S r) {
  const Eigen::Index n = v.size();
  Vec<S> out(n);
  const S stay = S(1) - r;
  const S half = r / S(2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S left = (i > 0) ? v[i - 1] : S(0);
    const S right = (i + 1 < n) ? v[i + 1] : S(0);
    out[i] = stay * v[i] + half * (left + right);
  }
  return out;
}

inline Vector heat_step(const Grid& g, const Vector& v) {
  if (v.size() != g.n()) throw std::invalid_argument("heat_step: size mismatch");
  return heat_step_with_ratio<double>(v, g.ratio());
}

// Thomas solve of -(1/2) Lap_h U = f over any field-like scalar (doubles in
// tests, exact rationals in the oracle).  No pivoting is needed: the matrix is
// strictly diagonally dominant after elimination.
template <class S>
Vec<S> green_solve_tridiag(const Vec<S>& f, S dx) {
  const Eigen::Index n = f.size();
  const S diag = S(1) / (dx * dx);
  const S off = S(-1) / (S(2) * dx * dx);
  Vec<S> d(n), rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d[i] = diag;
    rhs[i] = f[i];
  }
  for (Eigen::Index i = 1; i < n; ++i) {
    const S w = off / d[i - 1];
    d[i] -= w * off;
    rhs[i] -= w * rhs[i - 1];
  }
  Vec<S> u(n);
  u[n - 1] = rhs[n - 1] / d[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i) u[i] = (rhs[i] - off * u[i + 1]) / d[i];
  return u;
}

}  // namespace skorokhod
