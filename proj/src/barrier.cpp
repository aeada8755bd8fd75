#include "skorokhod/barrier.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

namespace skorokhod {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// splitmix64 stream; per-path states are scrambled so streams never overlap
// in practice even though every path shares one increment constant.
struct SplitMix {
  std::uint64_t state;
  explicit SplitMix(std::uint64_t s) : state(s) {}
  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

bool in_barrier(const Barrier& b, int k, int i) {
  const int s = b.s[static_cast<std::size_t>(i)];
  if (s == Barrier::kNever) return false;
  if (b.direction == Barrier::Direction::backward) return k <= s;
  return k >= s;
}

struct Block {
  std::vector<long long> counts;
  long long killed = 0;
  long long horizon = 0;
  long long tau_sum = 0;
  double cost = 0.0;
  double cost_sq = 0.0;
  double reward = 0.0;
  double reward_sq = 0.0;
};

constexpr long kBlockSize = 4096;

}  // namespace

Barrier extract_barrier(const Grid& g, const ValuePair& vp, const LagrangianSpec& L,
                        double eps, const DiscreteMeasure* mu, const DiscreteMeasure* nu) {
  if (vp.psi.size() != g.n() || vp.J.rows() != g.horizon() + 1 || vp.J.cols() != g.n())
    throw std::invalid_argument("extract_barrier: value shape does not match the grid");
  const int n = g.n();
  const int K = g.horizon();
  Barrier b;
  b.eps_used = eps;
  b.s.assign(static_cast<std::size_t>(n), Barrier::kNever);
  switch (L.kind) {
    case LagrangianSpec::Kind::increasing: {
      b.direction = Barrier::Direction::forward;
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < K; ++k) {
          if (vp.J(k, i) - vp.psi[i] <= eps) {
            b.s[static_cast<std::size_t>(i)] = k;
            break;
          }
        }
      }
      break;
    }
    case LagrangianSpec::Kind::decreasing: {
      b.direction = Barrier::Direction::backward;
      for (int i = 0; i < n; ++i) {
        for (int k = K - 1; k >= 0; --k) {
          if (vp.J(k, i) - vp.psi[i] <= eps) {
            b.s[static_cast<std::size_t>(i)] = k;
            break;
          }
        }
      }
      if (mu != nullptr && nu != nullptr) {
        if (mu->w.size() != n || nu->w.size() != n)
          throw std::invalid_argument("extract_barrier: measure size mismatch");
        Vector t0 = Vector::Zero(n);
        bool any = false;
        for (int i = 0; i < n; ++i) {
          if (b.s[static_cast<std::size_t>(i)] != Barrier::kNever) {
            t0[i] = std::min(mu->w[i], nu->w[i]);
            if (t0[i] > 0.0) any = true;
          }
        }
        if (any) b.t0_mass = std::move(t0);
      }
      break;
    }
    case LagrangianSpec::Kind::stationary: {
      b.direction = Barrier::Direction::trivial;
      std::fill(b.s.begin(), b.s.end(), 0);
      break;
    }
    default:
      throw std::invalid_argument(
          "extract_barrier: cost kind carries no barrier class (no monotone structure)");
  }
  return b;
}

McResult hitting_simulate(const Grid& g, const Barrier& b, const DiscreteMeasure& mu,
                          const LagrangianSpec& L, const McOptions& opts, const ValuePair* vp) {
  const int n = g.n();
  const int K = g.horizon();
  if (static_cast<int>(b.s.size()) != n)
    throw std::invalid_argument("hitting_simulate: barrier size does not match the grid");
  if (mu.w.size() != n) throw std::invalid_argument("hitting_simulate: measure size mismatch");
  if (opts.n_paths < 1) throw std::invalid_argument("hitting_simulate: need at least one path");
  validate_lagrangian(g, L);

  // dt-scaled cost rows, shared read-only by all workers.
  Field ldt(K, n);
  for (int k = 0; k < K; ++k) ldt.row(k) = (g.dt() * lagrangian_slice(g, L, k)).transpose();

  // Inverse-CDF table for the start node.
  std::vector<double> cdf(static_cast<std::size_t>(n));
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += mu.w[i];
    cdf[static_cast<std::size_t>(i)] = acc;
  }
  const double total_mass = acc;

  const bool has_atom = b.t0_mass.size() > 0;
  const double r = g.ratio();
  const double half = r / 2.0;
  const Vector* psi = (vp != nullptr) ? &vp->psi : nullptr;

  const long n_paths = opts.n_paths;
  const long n_blocks = (n_paths + kBlockSize - 1) / kBlockSize;
  std::vector<Block> blocks(static_cast<std::size_t>(n_blocks));

  const auto run_block = [&](long blk) {
    Block& out = blocks[static_cast<std::size_t>(blk)];
    out.counts.assign(static_cast<std::size_t>(n), 0);
    const long lo = blk * kBlockSize;
    const long hi = std::min(n_paths, lo + kBlockSize);
    for (long p = lo; p < hi; ++p) {
      SplitMix rng(mix64(opts.seed ^ mix64(static_cast<std::uint64_t>(p) + 1)));
      const double u0 = rng.uniform() * total_mass;
      int x = static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), u0) - cdf.begin());
      if (x >= n) x = n - 1;
      double cost = 0.0;
      int k = 0;
      for (;;) {
        bool stopped = false;
        if (in_barrier(b, k, x)) {
          if (k == 0 && has_atom) {
            const double prob = (mu.w[x] > 0.0) ? b.t0_mass[x] / mu.w[x] : 0.0;
            stopped = rng.uniform() < prob;
          } else {
            stopped = true;
          }
        }
        if (!stopped && k == K) {
          stopped = true;
          out.horizon += 1;
        }
        if (stopped) {
          out.counts[static_cast<std::size_t>(x)] += 1;
          out.tau_sum += k;
          out.cost += cost;
          out.cost_sq += cost * cost;
          if (psi != nullptr) {
            const double reward = (*psi)[x] - cost;
            out.reward += reward;
            out.reward_sq += reward * reward;
          }
          break;
        }
        cost += ldt(k, x);
        const double u = rng.uniform();
        if (u < half)
          x -= 1;
        else if (u < r)
          x += 1;
        ++k;
        if (x < 0 || x >= n) {
          out.killed += 1;
          out.tau_sum += k;
          out.cost += cost;
          out.cost_sq += cost * cost;
          if (psi != nullptr) {
            const double reward = 0.0 - cost;  // the terminal reward vanishes outside
            out.reward += reward;
            out.reward_sq += reward * reward;
          }
          break;
        }
      }
    }
  };

  const int threads = std::max(1, opts.threads);
  if (threads == 1) {
    for (long blk = 0; blk < n_blocks; ++blk) run_block(blk);
  } else {
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&]() {
        for (;;) {
          const long blk = next.fetch_add(1);
          if (blk >= n_blocks) return;
          run_block(blk);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  // Deterministic reduction in block order.
  McResult res;
  res.counts.assign(static_cast<std::size_t>(n), 0);
  long long killed = 0, horizon = 0, tau = 0;
  double cost = 0.0, cost_sq = 0.0, reward = 0.0, reward_sq = 0.0;
  for (long blk = 0; blk < n_blocks; ++blk) {
    const Block& bl = blocks[static_cast<std::size_t>(blk)];
    for (int i = 0; i < n; ++i) res.counts[static_cast<std::size_t>(i)] += bl.counts[i];
    killed += bl.killed;
    horizon += bl.horizon;
    tau += bl.tau_sum;
    cost += bl.cost;
    cost_sq += bl.cost_sq;
    reward += bl.reward;
    reward_sq += bl.reward_sq;
  }

  const double np = static_cast<double>(n_paths);
  res.n_paths = n_paths;
  res.empirical = Vector::Zero(n);
  for (int i = 0; i < n; ++i)
    res.empirical[i] = static_cast<double>(res.counts[static_cast<std::size_t>(i)]) / np;
  res.killed_fraction = static_cast<double>(killed) / np;
  res.horizon_fraction = static_cast<double>(horizon) / np;
  res.mean_cost = cost / np;
  res.mean_stop_time = g.dt() * static_cast<double>(tau) / np;
  const auto sample_stderr = [np](double sum, double sum_sq) {
    if (np < 2.0) return 0.0;
    const double mean = sum / np;
    const double var = std::max(0.0, (sum_sq - np * mean * mean) / (np - 1.0));
    return std::sqrt(var / np);
  };
  res.stderr_cost = sample_stderr(cost, cost_sq);
  if (vp != nullptr) {
    res.mean_reward = reward / np;
    res.stderr_reward = sample_stderr(reward, reward_sq);
    res.expected_reward = vp->J.row(0).dot(mu.w.transpose());
    res.martingale_ok =
        std::abs(res.mean_reward - res.expected_reward) <= 3.0 * res.stderr_reward + 1e-12;
  }
  return res;
}

FluxReport flux_residual(const Grid& g, const Barrier& b, const FlowPair& fp,
                         const DiscreteMeasure& nu) {
  const int n = g.n();
  const int K = g.horizon();
  if (static_cast<int>(b.s.size()) != n)
    throw std::invalid_argument("flux_residual: barrier size does not match the grid");
  if (fp.eta.rows() != K || fp.rho.rows() != K + 1)
    throw std::invalid_argument("flux_residual: flow shape does not match the grid");
  if (nu.w.size() != n) throw std::invalid_argument("flux_residual: measure size mismatch");

  FluxReport rep;
  rep.residual = Vector::Zero(n);
  const double dx = g.dx();
  const bool backward = (b.direction == Barrier::Direction::backward);
  const double dir_sign = backward ? -1.0 : 1.0;
  double l1_mass = 0.0;

  for (int i = 1; i + 1 < n; ++i) {
    const int si = b.s[static_cast<std::size_t>(i)];
    const int sl = b.s[static_cast<std::size_t>(i - 1)];
    const int sr = b.s[static_cast<std::size_t>(i + 1)];
    if (si == Barrier::kNever || sl == Barrier::kNever || sr == Barrier::kNever) continue;
    if (si > K - 1) continue;  // no occupation row at the forced horizon stop
    if (sl == sr) {
      // Flat boundary stretch: the slope formula degenerates; check the raw
      // slice mass balance rho + eta = P eta_prev instead.
      rep.degenerate += 1;
      if (si >= 1) {
        const double stay = 1.0 - g.ratio();
        const double half = g.ratio() / 2.0;
        const double left = (i > 0) ? fp.eta(si - 1, i - 1) : 0.0;
        const double right = (i + 1 < n) ? fp.eta(si - 1, i + 1) : 0.0;
        const double arriving = stay * fp.eta(si - 1, i) + half * (left + right);
        const double balance = std::abs(fp.rho(si, i) + fp.eta(si, i) - arriving);
        rep.balance_sup = std::max(rep.balance_sup, balance);
      }
      continue;
    }
    // Live side: the neighbor whose barrier time lies strictly on the
    // not-yet-stopped side of the graph at slice si.
    int j;
    if (backward)
      j = (sr <= sl) ? i + 1 : i - 1;
    else
      j = (sr >= sl) ? i + 1 : i - 1;
    const double dsdx = (g.t(sr) - g.t(sl)) / (2.0 * dx);
    const double slope_eta = (fp.eta(si, j) - fp.eta(si, i)) / (g.x(j) - g.x(i));
    const double mass_res = nu.w[i] - dir_sign * 0.5 * dsdx * slope_eta;
    rep.residual[i] = mass_res / dx;  // density units, comparable across meshes
    l1_mass += std::abs(mass_res);
    rep.applicable += 1;
  }
  rep.l1 = l1_mass;
  return rep;
}

}  // namespace skorokhod
