#include "skorokhod/lagrangian.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace skorokhod {

void validate_lagrangian(const Grid& g, const LagrangianSpec& spec) {
  switch (spec.kind) {
    case LagrangianSpec::Kind::increasing:
      if (!(spec.a >= 0.0) || !(spec.b > 0.0))
        throw std::invalid_argument("cost: increasing kind needs a >= 0 and b > 0");
      return;
    case LagrangianSpec::Kind::decreasing:
      if (!(spec.a > 0.0) || !(spec.b > 0.0))
        throw std::invalid_argument("cost: decreasing kind needs a > 0 and b > 0");
      return;
    case LagrangianSpec::Kind::stationary:
      if (spec.stationary_values.size() > 0) {
        if (spec.stationary_values.size() != g.n())
          throw std::invalid_argument("cost: stationary table has " +
                                      std::to_string(spec.stationary_values.size()) +
                                      " entries for " + std::to_string(g.n()) + " nodes");
        for (int i = 0; i < g.n(); ++i) {
          if (!(spec.stationary_values[i] >= 0.0))
            throw std::invalid_argument("cost: negative stationary value at node " +
                                        std::to_string(i + 1));
        }
      } else if (!(spec.a >= 0.0)) {
        throw std::invalid_argument("cost: stationary constant must be nonnegative");
      }
      return;
    case LagrangianSpec::Kind::oscillating:
      if (!(spec.a > 0.0))
        throw std::invalid_argument("cost: oscillating amplitude must be positive");
      return;
    case LagrangianSpec::Kind::table: {
      if (spec.table_values.rows() != g.horizon() || spec.table_values.cols() != g.n())
        throw std::invalid_argument("cost: table shape must be horizon x nodes");
      if ((spec.table_values.array() < 0.0).any())
        throw std::invalid_argument("cost: table has negative entries");
      return;
    }
  }
  throw std::invalid_argument("cost: unknown kind");
}

Vector lagrangian_slice(const Grid& g, const LagrangianSpec& spec, int k) {
  if (k < 0 || k >= g.horizon())
    throw std::invalid_argument("cost: slice index outside the cost range 0..K-1");
  const int n = g.n();
  const double t = g.t(k);
  switch (spec.kind) {
    case LagrangianSpec::Kind::increasing:
      return Vector::Constant(n, spec.a + spec.b * t);
    case LagrangianSpec::Kind::decreasing:
      return Vector::Constant(n, spec.a * std::exp(-spec.b * t));
    case LagrangianSpec::Kind::stationary:
      if (spec.stationary_values.size() > 0) return spec.stationary_values;
      return Vector::Constant(n, spec.a);
    case LagrangianSpec::Kind::oscillating:
      return Vector::Constant(n, spec.a * (1.0 - std::cos(20.0 * std::numbers::pi * t)));
    case LagrangianSpec::Kind::table:
      return spec.table_values.row(k).transpose();
  }
  throw std::invalid_argument("cost: unknown kind");
}

double lagrangian_bound(const Grid& g, const LagrangianSpec& spec) {
  double bound = 0.0;
  for (int k = 0; k < g.horizon(); ++k)
    bound = std::max(bound, lagrangian_slice(g, spec, k).maxCoeff());
  return bound;
}

Vector stationary_values(const Grid& g, const LagrangianSpec& spec) {
  if (spec.kind != LagrangianSpec::Kind::stationary)
    throw std::invalid_argument("cost: stationary_values needs a stationary kind");
  if (spec.stationary_values.size() > 0) return spec.stationary_values;
  return Vector::Constant(g.n(), spec.a);
}

}  // namespace skorokhod
