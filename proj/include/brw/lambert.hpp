#pragma once

#include <stdexcept>
#include <vector>

namespace brw {

//============================================================
// Real roots of a*y - b = eps * e^y.  For a > 0, b >= 0,
// c := log a - b/a >= 0 and eps in (0, 1/e) there are exactly two:
// y1 just above b/a and y2 near -log(eps) + log(a) + log(...).
//============================================================

// Thrown when an admissibility inequality fails; the message names it.
struct PreconditionError : std::domain_error {
  using std::domain_error::domain_error;
};

struct LambertRoots {
  double y1 = 0.0;         // in (b/a, b/a + 1)
  double y2 = 0.0;         // > y1
  double residual1 = 0.0;  // |a y1 - b - eps e^{y1}|
  double residual2 = 0.0;
  double asymptotic_y2 = 0.0;  // -log(eps)+log(a)+log(-log(eps)+log(a)-b/a)
  double gap = 0.0;            // |y2 - asymptotic_y2|
};

LambertRoots solve_roots(double a, double b, double eps);

struct GapRow {
  double eps = 0.0;
  double y2 = 0.0;
  double asymptotic_y2 = 0.0;
  double gap = 0.0;
};

std::vector<GapRow> asymptotic_gap(double a, double b,
                                   const std::vector<double>& eps_list);

}  // namespace brw
