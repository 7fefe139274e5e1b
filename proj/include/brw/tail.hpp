#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "brw/model.hpp"

namespace brw {

//============================================================
// Empirical analysis of a limit-estimate sample Zhat: tail
// curves and the additive constant of the log-tail expansion,
// the Laplace-transform profile D, the Durrett-Liggett
// functional G, and Tauberian cross-checks tying the tail to
// the transform.
//============================================================

// Curves over a positive increasing x grid.  Negative Zhat values
// (finite-horizon artifacts; the limit variable is nonnegative) are kept
// as-is inside H and H2 and reported through negative_fraction and
// negative_mean.
struct TailReport {
  std::vector<double> x;
  std::vector<double> survival;     // P-hat{Zhat > x}
  std::vector<double> H, H_se;      // mean Zhat 1{Zhat <= x}
  std::vector<double> H2, H2_se;    // mean Zhat^2 1{Zhat <= x}
  std::vector<double> gstar, gstar_se;  // integral_0^x P-hat{Zhat > y} dy
  std::vector<double> tail_product, tail_product_se;  // x * P-hat{Zhat > x}
  std::vector<double> dropped_x;  // grid points beyond the sample maximum,
                                  // where the tail product is undefined
  double negative_fraction = 0.0;
  double negative_mean = 0.0;  // mean of Zhat 1{Zhat < 0}, <= 0
  // Bound on |gstar - exact step integral| from the trapezoid rule, plus
  // the [0, x_1) head segment.  The identity gstar = H + x * survival
  // holds within quadrature_error + |negative_mean|.
  double quadrature_error = 0.0;
  std::string provenance;  // metadata hash of the sample, if any

  std::string csv() const;  // x,survival,H,H_se,H2,H2_se,gstar,...
};

// Bootstrap standard errors use per-replica streams (seed, rep, 12), so
// values do not depend on evaluation order.
TailReport tail_curves(const std::vector<double>& sample,
                       const std::vector<double>& x_grid,
                       std::size_t bootstrap_reps = 200,
                       std::uint64_t seed = 1);

// Additive constant in  mean Zhat 1{Zhat <= x} = log x + c + o(1),
// estimated as the window average of H(x) - log x.
struct CEstimate {
  double c_hat = 0.0;
  double se = 0.0;          // bootstrap sd
  double lo = 0.0, hi = 0.0;  // bootstrap percentile CI (2.5%, 97.5%)
  double flatness = 0.0;    // max - min of H(x) - log x over the window
  bool flat = false;        // flatness <= 0.5; false flags a dubious window
  std::vector<double> window;
};

// An empty window defaults to 9 log-spaced points between the 90% and
// 99% sample quantiles, i.e. where the empirical survival lies in
// [0.01, 0.1]: deep enough for the asymptotic regime, shallow enough
// for Monte Carlo stability.
CEstimate estimate_c(const std::vector<double>& sample,
                     std::vector<double> window = {},
                     std::size_t bootstrap_reps = 400, std::uint64_t seed = 2);

// Laplace-transform profile.  phi(s) = mean e^{-s max(Zhat,0)};
// D(x) = e^x (1 - phi(e^{-x})); psi_star(s) = s^{-1}(1 - phi(s)), with
// the s = 0 entry set to the clipped sample mean (its s -> 0+ limit).
// Negative Zhat values are clipped to zero before transforming: the
// limit variable is nonnegative, and a single finite-horizon spike at
// position -5 contributes e^{-(-5)}·(-5) ~ -742, which would blow the
// empirical transform past 1 and D to -infinity at moderate s.  The
// clipped mass is reported.
struct LaplaceProfile {
  std::vector<double> s, phi, phi_se, psi_star;
  std::vector<double> x, D, D_se;
  std::vector<double> D_over_x;  // NaN where x <= 0
  double clipped_fraction = 0.0;

  std::string csv() const;  // two blocks: s rows then x rows
  std::string provenance;
};

LaplaceProfile laplace_profile(const std::vector<double>& sample,
                               const std::vector<double>& x_grid,
                               const std::vector<double>& s_grid);

// Durrett-Liggett functional
//   G(x) = e^x E[ prod_i phi(e^{-x-X_i}) - 1 + sum_i (1 - phi(e^{-x-X_i})) ]
// estimated by Monte Carlo over offspring draws (streams (seed, d, 11))
// plugged into the empirical transform, which is interpolated
// monotonically in log s.  Negative sample values are clipped to zero
// for phi here: the true transform of the nonnegative limit satisfies
// phi <= 1, and values above 1 would blow up the product at large s.
struct GCurve {
  std::vector<double> x, g, g_se;
  double log_s_lo = 0.0, log_s_hi = 0.0;  // interpolation range used
  std::string csv() const;
  std::string provenance;
};

GCurve g_profile(const OffspringLaw& law, const std::vector<double>& sample,
                 const std::vector<double>& x_grid, std::size_t draws,
                 std::uint64_t seed = 3);

// Tauberian comparison: psi_star(1/t), gstar(t), hstar(t) all grow like
// b log t when t P{X > t} -> b, and the offset
//   psi_star(1/t) - gstar(t) + gamma   (gamma = Euler-Mascheroni)
// vanishes as t grows.  gstar here is the exact integral of the
// empirical survival (no grid quadrature): mean min(max(Zhat,0), t).
struct TauberianRow {
  double t = 0.0;
  double psi_star = 0.0;
  double gstar = 0.0;
  double hstar = 0.0;
  double log_t = 0.0;
  double offset = 0.0;
};

struct TauberianTable {
  std::vector<TauberianRow> rows;
  std::string csv() const;
  std::string provenance;
};

TauberianTable tauberian_check(const std::vector<double>& sample,
                               const std::vector<double>& t_grid);

}  // namespace brw
