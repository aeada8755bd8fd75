#include "skorokhod/measures.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace skorokhod {

DiscreteMeasure build_measure(const Grid& g, const MeasureSpec& spec) {
  const int n = g.n();
  Vector w = Vector::Zero(n);
  switch (spec.kind) {
    case MeasureSpec::Kind::uniform_range: {
      if (spec.lo_index < 1 || spec.hi_index > n || spec.lo_index > spec.hi_index)
        throw std::invalid_argument("measure: uniform_range labels must satisfy 1 <= lo <= hi <= " +
                                    std::to_string(n));
      for (int j = spec.lo_index; j <= spec.hi_index; ++j) w[j - 1] = 1.0;
      break;
    }
    case MeasureSpec::Kind::sine_profile: {
      if (!(spec.period > 0.0))
        throw std::invalid_argument("measure: sine_profile needs a positive period");
      for (int i = 0; i < n; ++i)
        w[i] = std::abs(std::sin(std::numbers::pi * g.x(i) / spec.period));
      break;
    }
    case MeasureSpec::Kind::point: {
      if (spec.index < 1 || spec.index > n)
        throw std::invalid_argument("measure: point label " + std::to_string(spec.index) +
                                    " outside 1.." + std::to_string(n));
      w[spec.index - 1] = 1.0;
      break;
    }
    case MeasureSpec::Kind::table: {
      if (spec.values.size() != n)
        throw std::invalid_argument("measure: table has " + std::to_string(spec.values.size()) +
                                    " entries for " + std::to_string(n) + " nodes");
      w = spec.values;
      break;
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!(w[i] >= 0.0))
      throw std::invalid_argument("measure: negative weight at node " + std::to_string(i + 1));
  }
  const double total = w.sum();
  if (!(total > 0.0)) throw std::invalid_argument("measure: profile has no mass to normalize");
  if (spec.normalize) w /= total;
  return DiscreteMeasure{std::move(w)};
}

OrderCheck check_subharmonic_order(const Grid& g, const DiscreteMeasure& mu,
                                   const DiscreteMeasure& nu, double tol) {
  if (mu.w.size() != g.n() || nu.w.size() != g.n())
    throw std::invalid_argument("order check: measure size does not match the grid");
  OrderCheck oc;
  oc.pot_mu = g.green_solve(mu.w);
  oc.pot_nu = g.green_solve(nu.w);
  oc.max_violation = 0.0;
  oc.worst_node = -1;
  for (int i = 0; i < g.n(); ++i) {
    const double excess = oc.pot_nu[i] - oc.pot_mu[i];
    if (excess > oc.max_violation) {
      oc.max_violation = excess;
      oc.worst_node = i;
    }
  }
  oc.ordered = oc.max_violation <= tol;
  if (oc.ordered) oc.worst_node = -1;
  return oc;
}

}  // namespace skorokhod
