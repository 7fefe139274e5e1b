#include "brw/lambert.hpp"

#include <cmath>

namespace brw {
namespace {

double eval(double a, double b, double eps, double y) {
  return a * y - b - eps * std::exp(y);
}

}  // namespace

LambertRoots solve_roots(double a, double b, double eps) {
  if (!(a > 0.0)) throw PreconditionError("solve_roots: requires a > 0");
  if (!(b >= 0.0)) throw PreconditionError("solve_roots: requires b >= 0");
  const double c = std::log(a) - b / a;
  if (!(c >= 0.0))
    throw PreconditionError("solve_roots: requires log(a) - b/a >= 0");
  if (!(eps > 0.0 && eps < std::exp(-1.0)))
    throw PreconditionError("solve_roots: requires eps in (0, 1/e)");
  if (!(eps * std::exp(-c) < std::exp(-1.0)))
    throw PreconditionError("solve_roots: requires eps*exp(-c) < 1/e");

  const double y_star = std::log(a / eps);  // unique maximum of the gap

  LambertRoots out;
  {
    // y1 by bisection: the function is negative at b/a, positive at
    // min(b/a + 1, y_star), and increasing on that interval.
    double lo = b / a;
    double hi = std::min(b / a + 1.0, y_star);
    for (int i = 0; i < 200 && hi - lo > 1e-17 * (1.0 + std::abs(hi)); ++i) {
      const double mid = 0.5 * (lo + hi);
      (eval(a, b, eps, mid) < 0.0 ? lo : hi) = mid;
    }
    out.y1 = 0.5 * (lo + hi);
  }
  {
    // y2 by Newton from the seed -log(eps) + log(a) = y_star, kept
    // inside a bracket on which the function decreases through zero.
    double lo = y_star;
    double hi = y_star + 2.0 * std::log(1.0 / eps) + 10.0;
    while (eval(a, b, eps, hi) >= 0.0) hi += 10.0;
    double y = y_star;
    for (int i = 0; i < 200; ++i) {
      const double g = eval(a, b, eps, y);
      if (std::isfinite(g)) (g > 0.0 ? lo : hi) = y;
      const double gp = a - eps * std::exp(y);
      double next = std::isfinite(g) && std::abs(gp) > 1e-300 ? y - g / gp
                                                              : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - y) < 1e-17 * (1.0 + std::abs(y))) {
        y = next;
        break;
      }
      y = next;
    }
    out.y2 = y;
  }
  out.residual1 = std::abs(eval(a, b, eps, out.y1));
  out.residual2 = std::abs(eval(a, b, eps, out.y2));
  const double inner = -std::log(eps) + std::log(a) - b / a;
  out.asymptotic_y2 = -std::log(eps) + std::log(a) + std::log(inner);
  out.gap = std::abs(out.y2 - out.asymptotic_y2);
  return out;
}

std::vector<GapRow> asymptotic_gap(double a, double b,
                                   const std::vector<double>& eps_list) {
  std::vector<GapRow> rows;
  rows.reserve(eps_list.size());
  for (double eps : eps_list) {
    const LambertRoots r = solve_roots(a, b, eps);
    rows.push_back({eps, r.y2, r.asymptotic_y2, r.gap});
  }
  return rows;
}

}  // namespace brw
