#pragma once
// Running-cost specifications.  The kind tag drives the solver's structural
// behavior (barrier direction, stopping rules), so validation insists that the
// tag matches what the evaluator actually does on the lattice:
//   increasing:  L(t,x) = a + b*t,            strictly increasing in t
//   decreasing:  L(t,x) = a*exp(-b*t),        strictly decreasing in t
//   stationary:  L(t,x) = Lbar(x),            time independent
//   oscillating: L(t,x) = a*(1 - cos(20*pi*t))
//   table:       tabulated L[k][i], no monotonicity class claimed

#include "skorokhod/lattice.hpp"

namespace skorokhod {

struct LagrangianSpec {
  enum class Kind { increasing, decreasing, stationary, oscillating, table };
  Kind kind = Kind::increasing;
  double a = 1.0;
  double b = 1.0;
  Vector stationary_values;  // empty means the constant a
  Field table_values;        // K rows, n columns

  static LagrangianSpec increasing(double a, double b) {
    LagrangianSpec s;
    s.kind = Kind::increasing;
    s.a = a;
    s.b = b;
    return s;
  }
  static LagrangianSpec decreasing(double a, double b) {
    LagrangianSpec s;
    s.kind = Kind::decreasing;
    s.a = a;
    s.b = b;
    return s;
  }
  static LagrangianSpec stationary(double c) {
    LagrangianSpec s;
    s.kind = Kind::stationary;
    s.a = c;
    return s;
  }
  static LagrangianSpec stationary(Vector per_node) {
    LagrangianSpec s;
    s.kind = Kind::stationary;
    s.stationary_values = std::move(per_node);
    return s;
  }
  static LagrangianSpec oscillating(double amplitude) {
    LagrangianSpec s;
    s.kind = Kind::oscillating;
    s.a = amplitude;
    return s;
  }
  static LagrangianSpec table(Field values) {
    LagrangianSpec s;
    s.kind = Kind::table;
    s.table_values = std::move(values);
    return s;
  }
};

// Throws if the parameters cannot certify the declared kind on this grid
// (wrong monotonicity, negative values, bad table shape).
void validate_lagrangian(const Grid& g, const LagrangianSpec& spec);

// L evaluated on time slice k (cost slices use k = 0..K-1).
Vector lagrangian_slice(const Grid& g, const LagrangianSpec& spec, int k);

// sup of L over the cost slices; scales the coincidence tolerance and the
// ascent step size.
double lagrangian_bound(const Grid& g, const LagrangianSpec& spec);

// Per-node values for a stationary spec (pre: kind == stationary).
Vector stationary_values(const Grid& g, const LagrangianSpec& spec);

}  // namespace skorokhod
