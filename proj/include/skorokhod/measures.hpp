#pragma once
// Probability measures on the interior lattice and the subharmonic-order test.
//
// Measure specs address nodes by 1-based interior label j (coordinate
// x_min + j*dx), so on an integer-aligned grid the label equals the integer
// coordinate.  Built measures are normalized to unit mass.

#include "skorokhod/lattice.hpp"

namespace skorokhod {

struct DiscreteMeasure {
  Vector w;  // atom mass per interior node
  double mass() const { return w.sum(); }
};

struct MeasureSpec {
  enum class Kind { uniform_range, sine_profile, point, table };
  Kind kind = Kind::point;
  int lo_index = 0;   // uniform_range
  int hi_index = 0;   // uniform_range
  double period = 0;  // sine_profile
  int index = 0;      // point
  Vector values;      // table
  bool normalize = true;  // rescale to unit mass after evaluation

  static MeasureSpec uniform_range(int lo, int hi) {
    MeasureSpec s;
    s.kind = Kind::uniform_range;
    s.lo_index = lo;
    s.hi_index = hi;
    return s;
  }
  static MeasureSpec sine_profile(double period) {
    MeasureSpec s;
    s.kind = Kind::sine_profile;
    s.period = period;
    return s;
  }
  static MeasureSpec point(int index) {
    MeasureSpec s;
    s.kind = Kind::point;
    s.index = index;
    return s;
  }
  static MeasureSpec table(Vector values) {
    MeasureSpec s;
    s.kind = Kind::table;
    s.values = std::move(values);
    return s;
  }
};

// Builds and normalizes the measure; rejects negative weights, all-zero
// profiles, and out-of-range node labels.
DiscreteMeasure build_measure(const Grid& g, const MeasureSpec& spec);

struct OrderCheck {
  bool ordered = false;
  double max_violation = 0.0;  // max over nodes of (U_nu - U_mu)
  int worst_node = -1;         // 0-based argmax node, -1 when no violation
  Vector pot_mu;
  Vector pot_nu;
};

// mu precedes nu in the subharmonic order iff the killed potentials satisfy
// U_mu >= U_nu - tol entrywise.  The potentials are returned for reporting,
// and the worst node doubles as the order-violation witness location: the
// Green column at that node is superharmonic with <g,nu> > <g,mu>.
OrderCheck check_subharmonic_order(const Grid& g, const DiscreteMeasure& mu,
                                   const DiscreteMeasure& nu, double tol = 1e-10);

}  // namespace skorokhod
