#include "skorokhod/oracle.hpp"

#include <algorithm>
#include <sstream>
#include <string>

namespace skorokhod {

namespace {

constexpr long kPivotCap = 200000;

// Dense two-phase tableau simplex over exact rationals with Bland's rule
// (smallest eligible index enters; ratio ties leave by smallest basic index),
// which cannot cycle.  Artificial columns double as B^{-1} tracking, so the
// final reduced costs over them expose the equality multipliers exactly.
class Tableau {
 public:
  Tableau(const AssembledLp& lp)
      : m_(lp.n_rows), nreal_(lp.n_vars), width_(lp.n_vars + lp.n_rows + 1) {
    rows_.assign(static_cast<std::size_t>(m_ + 1),
                 std::vector<Rational>(static_cast<std::size_t>(width_)));
    basis_.resize(static_cast<std::size_t>(m_));
    barred_.assign(static_cast<std::size_t>(nreal_ + m_), false);
    for (int j = 0; j < nreal_; ++j)
      for (const auto& [r, a] : lp.cols[static_cast<std::size_t>(j)]) cell(r, j) = a;
    for (int r = 0; r < m_; ++r) {
      cell(r, nreal_ + r) = 1;
      cell(r, width_ - 1) = lp.rhs[static_cast<std::size_t>(r)];
      basis_[static_cast<std::size_t>(r)] = nreal_ + r;
    }
  }

  // Phase 1: minimize the artificial sum.  Returns the optimal value.
  Rational phase1() {
    auto& orow = rows_[static_cast<std::size_t>(m_)];
    std::fill(orow.begin(), orow.end(), Rational(0));
    for (int j = 0; j < width_; ++j) {
      Rational s = 0;
      for (int r = 0; r < m_; ++r) s += cell(r, j);
      if (j >= nreal_ && j < width_ - 1) s -= 1;  // c = 1 on artificials
      orow[static_cast<std::size_t>(j)] = -s;
    }
    run();
    return -orow[static_cast<std::size_t>(width_ - 1)];
  }

  // Phase 2 over the original objective; artificials stay barred.
  Rational phase2(const std::vector<Rational>& obj) {
    for (int j = nreal_; j < width_ - 1; ++j) barred_[static_cast<std::size_t>(j)] = true;
    auto& orow = rows_[static_cast<std::size_t>(m_)];
    std::fill(orow.begin(), orow.end(), Rational(0));
    for (int j = 0; j < nreal_; ++j) orow[static_cast<std::size_t>(j)] = obj[static_cast<std::size_t>(j)];
    for (int r = 0; r < m_; ++r) {
      const int b = basis_[static_cast<std::size_t>(r)];
      if (b < nreal_ && obj[static_cast<std::size_t>(b)] != 0) {
        const Rational c = obj[static_cast<std::size_t>(b)];
        for (int j = 0; j < width_; ++j) orow[static_cast<std::size_t>(j)] -= c * cell(r, j);
      }
    }
    run();
    return -orow[static_cast<std::size_t>(width_ - 1)];
  }

  // After a feasible phase 1, any artificial still basic sits at level zero on
  // a degenerate row.  Pivot it out on any nonzero real entry (the zero rhs
  // makes a negative pivot element legal); rows with no real entry are
  // redundant and stay inert under all later pivots.
  void drive_out_artificials() {
    for (int r = 0; r < m_; ++r) {
      if (basis_[static_cast<std::size_t>(r)] < nreal_) continue;
      for (int j = 0; j < nreal_; ++j) {
        if (cell(r, j) != 0) {
          pivot(r, j);
          ++pivots_;
          break;
        }
      }
    }
  }

  Rational reduced_cost(int j) const { return rows_[static_cast<std::size_t>(m_)][static_cast<std::size_t>(j)]; }
  // Equality multiplier of row r, from the artificial reduced cost
  // y_r = c_art - rc_art with c_art = 1 in phase 1 and 0 in phase 2.
  Rational multiplier(int r, bool phase1) const {
    const Rational rc = reduced_cost(nreal_ + r);
    return phase1 ? Rational(Rational(1) - rc) : Rational(-rc);
  }
  std::vector<Rational> primal() const {
    std::vector<Rational> x(static_cast<std::size_t>(nreal_), Rational(0));
    for (int r = 0; r < m_; ++r) {
      const int b = basis_[static_cast<std::size_t>(r)];
      if (b < nreal_) x[static_cast<std::size_t>(b)] = cell(r, width_ - 1);
    }
    return x;
  }
  long pivots() const { return pivots_; }

 private:
  Rational& cell(int r, int j) { return rows_[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)]; }
  const Rational& cell(int r, int j) const {
    return rows_[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
  }

  void run() {
    for (;;) {
      int enter = -1;
      for (int j = 0; j < width_ - 1; ++j) {
        if (barred_[static_cast<std::size_t>(j)]) continue;
        if (reduced_cost(j) < 0) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return;
      int leave = -1;
      Rational best;
      for (int r = 0; r < m_; ++r) {
        const Rational& a = cell(r, enter);
        if (a <= 0) continue;
        Rational ratio = cell(r, width_ - 1) / a;
        if (leave < 0 || ratio < best ||
            (ratio == best &&
             basis_[static_cast<std::size_t>(r)] < basis_[static_cast<std::size_t>(leave)])) {
          leave = r;
          best = ratio;
        }
      }
      if (leave < 0)
        throw std::runtime_error("oracle: unbounded pivot column (should not happen here)");
      pivot(leave, enter);
      if (++pivots_ > kPivotCap) throw std::runtime_error("oracle: pivot limit exceeded");
    }
  }

  void pivot(int leave, int enter) {
    const int old = basis_[static_cast<std::size_t>(leave)];
    if (old >= nreal_) barred_[static_cast<std::size_t>(old)] = true;
    auto& prow = rows_[static_cast<std::size_t>(leave)];
    const Rational inv = Rational(1) / prow[static_cast<std::size_t>(enter)];
    for (auto& v : prow) v *= inv;
    prow[static_cast<std::size_t>(enter)] = 1;
    for (int r = 0; r <= m_; ++r) {
      if (r == leave) continue;
      auto& row = rows_[static_cast<std::size_t>(r)];
      const Rational f = row[static_cast<std::size_t>(enter)];
      if (f == 0) continue;
      for (int j = 0; j < width_; ++j)
        row[static_cast<std::size_t>(j)] -= f * prow[static_cast<std::size_t>(j)];
      row[static_cast<std::size_t>(enter)] = 0;
    }
    basis_[static_cast<std::size_t>(leave)] = enter;
  }

  int m_, nreal_, width_;
  std::vector<std::vector<Rational>> rows_;
  std::vector<int> basis_;
  std::vector<bool> barred_;
  long pivots_ = 0;
};

}  // namespace

std::vector<Rational> exact_unit_mass(const Vector& w) {
  std::vector<Rational> out(static_cast<std::size_t>(w.size()));
  Rational total = 0;
  for (int i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0)) throw std::invalid_argument("exact_unit_mass: negative weight");
    out[static_cast<std::size_t>(i)] = Rational(w[i]);  // double -> rational is exact
    total += out[static_cast<std::size_t>(i)];
  }
  if (total == 0) throw std::invalid_argument("exact_unit_mass: zero total mass");
  for (auto& v : out) v /= total;
  return out;
}

AssembledLp assemble_lp(const Grid& g, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                        const LagrangianSpec& L, const OracleOptions& opts) {
  const int n = g.n();
  const int K = g.horizon();
  if (mu.w.size() != n || nu.w.size() != n)
    throw std::invalid_argument("assemble_lp: measure size mismatch");
  validate_lagrangian(g, L);
  AssembledLp lp;
  lp.n = n;
  lp.K = K;
  lp.n_vars = K * n + (K + 1) * n;
  lp.n_rows = (K + 2) * n;
  if (lp.n_vars > opts.max_variables) {
    std::ostringstream os;
    os << "oracle size guard: " << lp.n_vars << " variables exceeds cap " << opts.max_variables;
    throw OracleSizeError(os.str());
  }
  lp.cols.assign(static_cast<std::size_t>(lp.n_vars), {});
  lp.rhs.assign(static_cast<std::size_t>(lp.n_rows), Rational(0));
  lp.obj.assign(static_cast<std::size_t>(lp.n_vars), Rational(0));

  const Rational r(g.ratio());  // exact conversion of the mesh ratio
  const Rational stay = Rational(1) - r;
  const Rational half = r / 2;

  const auto mu_q = exact_unit_mass(mu.w);
  const auto nu_q = exact_unit_mass(nu.w);
  for (int i = 0; i < n; ++i) {
    lp.rhs[static_cast<std::size_t>(lp.evolution_row(0, i))] = mu_q[static_cast<std::size_t>(i)];
    lp.rhs[static_cast<std::size_t>(lp.target_row(i))] = nu_q[static_cast<std::size_t>(i)];
  }

  for (int k = 0; k < K; ++k) {
    const Vector slice = g.dt() * lagrangian_slice(g, L, k);
    for (int i = 0; i < n; ++i) {
      auto& col = lp.cols[static_cast<std::size_t>(lp.eta_index(k, i))];
      col.emplace_back(lp.evolution_row(k, i), Rational(1));
      if (stay != 0) col.emplace_back(lp.evolution_row(k + 1, i), -stay);
      if (i > 0) col.emplace_back(lp.evolution_row(k + 1, i - 1), -half);
      if (i + 1 < n) col.emplace_back(lp.evolution_row(k + 1, i + 1), -half);
      lp.obj[static_cast<std::size_t>(lp.eta_index(k, i))] = Rational(slice[i]);
    }
  }
  for (int k = 0; k <= K; ++k) {
    for (int i = 0; i < n; ++i) {
      auto& col = lp.cols[static_cast<std::size_t>(lp.rho_index(k, i))];
      col.emplace_back(lp.evolution_row(k, i), Rational(1));
      col.emplace_back(lp.target_row(i), Rational(1));
    }
  }
  return lp;
}

OracleSolution solve_lp_exact(const Grid& g, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                              const LagrangianSpec& L, const OracleOptions& opts) {
  const AssembledLp lp = assemble_lp(g, mu, nu, L, opts);
  const int n = lp.n;
  const int K = lp.K;
  Tableau tab(lp);
  OracleSolution sol;

  const Rational infeas = tab.phase1();
  if (infeas > 0) {
    sol.status = OracleSolution::Status::infeasible;
    sol.pivots = tab.pivots();
    sol.certificate.value = infeas;
    sol.certificate.psi.resize(static_cast<std::size_t>(n));
    sol.certificate.J.assign(static_cast<std::size_t>(K + 1),
                             std::vector<Rational>(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i)
      sol.certificate.psi[static_cast<std::size_t>(i)] = tab.multiplier(lp.target_row(i), true);
    for (int k = 0; k <= K; ++k)
      for (int i = 0; i < n; ++i)
        sol.certificate.J[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
            -tab.multiplier(lp.evolution_row(k, i), true);
    return sol;
  }

  tab.drive_out_artificials();
  sol.cost = tab.phase2(lp.obj);
  sol.pivots = tab.pivots();

  const std::vector<Rational> x = tab.primal();
  sol.eta_exact.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(K) * n);
  sol.rho_exact.assign(x.begin() + static_cast<std::ptrdiff_t>(K) * n, x.end());
  sol.psi_exact.resize(static_cast<std::size_t>(n));
  sol.J_exact.assign(static_cast<std::size_t>(K + 1),
                     std::vector<Rational>(static_cast<std::size_t>(n)));
  for (int i = 0; i < n; ++i)
    sol.psi_exact[static_cast<std::size_t>(i)] = tab.multiplier(lp.target_row(i), false);
  for (int k = 0; k <= K; ++k)
    for (int i = 0; i < n; ++i)
      sol.J_exact[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
          -tab.multiplier(lp.evolution_row(k, i), false);

  sol.fp.eta = Field::Zero(K, n);
  sol.fp.rho = Field::Zero(K + 1, n);
  Rational stopped = 0;
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < n; ++i)
      sol.fp.eta(k, i) = sol.eta_exact[static_cast<std::size_t>(lp.eta_index(k, i))].get_d();
  for (int k = 0; k <= K; ++k)
    for (int i = 0; i < n; ++i) {
      const Rational& v = sol.rho_exact[static_cast<std::size_t>(lp.rho_index(k, i) - K * n)];
      sol.fp.rho(k, i) = v.get_d();
      stopped += v;
    }
  sol.fp.killed_mass = Rational(Rational(1) - stopped).get_d();

  sol.vp.psi = Vector::Zero(n);
  sol.vp.J = Field::Zero(K + 1, n);
  for (int i = 0; i < n; ++i) sol.vp.psi[i] = sol.psi_exact[static_cast<std::size_t>(i)].get_d();
  for (int k = 0; k <= K; ++k)
    for (int i = 0; i < n; ++i)
      sol.vp.J(k, i) = sol.J_exact[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)].get_d();
  return sol;
}

}  // namespace skorokhod
