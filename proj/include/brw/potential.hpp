#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "brw/model.hpp"
#include "brw/stats.hpp"
#include "brw/walk.hpp"

namespace brw {

//============================================================
// Potential theory of the spine walk killed on entering (-inf, 0]:
// occupation expectations, the renewal double-integral identity,
// the three-term representation of Poisson-equation solutions,
// direct Riemann integrability checks, and residual diagnostics.
//============================================================

enum class OccMethod { monte_carlo, lattice_dp, renewal_double_integral };

struct OccupationConfig {
  std::size_t draws = 20000;        // monte_carlo paths
  std::size_t path_cap = 1u << 21;  // censor horizon per path
  std::uint64_t seed = 1;
  const RenewalTable* table = nullptr;  // renewal_double_integral input
};

// E_x sum_{k<tau} p(S_k) for p >= 0 vanishing beyond p_support.
// monte_carlo: averages killed paths (se > 0).  lattice_dp: exact
// tridiagonal solve for the +-1 spine (se = 0).  renewal_double_integral:
// integrates p(x - y + z) dU(y) dV(z) over [0, x) x [0, inf) against the
// supplied table, strict in the dU atoms; deterministic given the table.
Estimate occupation_expectation(const SpineLaw& spine,
                                const std::function<double(double)>& p,
                                double p_support, double x, OccMethod method,
                                const OccupationConfig& cfg = {});

struct IdentityConfig {
  std::size_t draws = 20000;            // lhs monte_carlo paths
  std::size_t path_cap = 1u << 21;
  std::size_t blocks = 16;              // independent tables for the rhs se
  std::size_t ladders_per_block = 10000;
  std::uint64_t seed = 1;
  LadderConfig ladder;
};

struct IdentityReport {
  Estimate lhs;  // occupation expectation (dp for lattice, MC otherwise)
  Estimate rhs;  // renewal double integral (exact table or block average)
  double gap = 0.0;
  double se = 0.0;  // combined
};

IdentityReport renewal_identity_check(const SpineLaw& spine,
                                      const std::function<double(double)>& p,
                                      double p_support, double x,
                                      const IdentityConfig& cfg = {});

//============================================================
// Direct Riemann integrability on [0, infinity)
//============================================================

struct TailRule {
  enum class Kind { exp_dominated, hard_cutoff };
  Kind kind = Kind::hard_cutoff;
  double a = 1.0;  // t(x) e^{ax} nonincreasing beyond x_max

  static TailRule exp_dominated(double a);
  static TailRule hard_cutoff();
};

enum class DriVerdict { dri, not_dri, inconclusive };

struct DriReport {
  std::vector<double> h_list;  // cell widths, descending
  std::vector<double> upper;   // upper Riemann sums over [0, x_max]
  std::vector<double> lower;   // lower Riemann sums
  DriVerdict verdict = DriVerdict::inconclusive;
  double tail_estimate = 0.0;       // analytic bound beyond x_max
  std::vector<double> growth;       // sigma-bar at x_max * {1/4, 1/2, 1}
  double integral_low = 0.0;        // bracket from the finest width
  double integral_high = 0.0;
};

struct DriConfig {
  std::size_t samples_per_cell = 64;  // dense-sampling fallback
};

DriReport dri_classify(const std::function<double(double)>& t,
                       std::vector<double> h_list, double x_max,
                       const TailRule& rule, const DriConfig& cfg = {});

//============================================================
// Three-term representation f = kappa U + E_x h(S_tau) - E_x sum g(S_k)
//============================================================

struct RepresentationConfig {
  std::size_t draws = 20000;       // killed paths per grid point
  std::size_t path_cap = 1u << 21;
  std::size_t n_ladders = 20000;   // empirical U sample size per block
  std::size_t blocks = 8;          // U batching for se1 (empirical mode)
  std::uint64_t seed = 1;
  double g_support = 50.0;         // g treated as 0 beyond; dRi probe range
  bool allow_non_dri = false;      // override the dRi gate
  LadderConfig ladder;
};

struct RepresentationResult {
  std::vector<double> x;
  double kappa = 0.0;
  std::vector<Estimate> term1;  // kappa * U(x)
  std::vector<Estimate> term2;  // E_x h(S_tau)
  std::vector<Estimate> term3;  // E_x sum_{k<tau} g(S_k)
  std::vector<Estimate> f;      // term1 + term2 - term3

  std::string csv() const;  // x,term1,se1,term2,se2,term3,se3,f,se
};

RepresentationResult three_term_representation(
    const SpineLaw& spine, const std::function<double(double)>& g,
    const std::function<double(double)>& h, double kappa,
    const std::vector<double>& x_grid, const RepresentationConfig& cfg = {});

//============================================================
// Residual of f(x) = E f(x + xi) - g(x) on a grid
//============================================================

struct ResidualRow {
  double x = 0.0;
  Estimate residual;  // f(x) - (E-hat f(x+xi) - g(x))
};

// f must be evaluable on [f_lo, f_hi]; the grid is rejected when a
// step-distribution quantile reaches outside that interval.  The +-1
// lattice spine evaluates the expectation exactly (se = 0).
std::vector<ResidualRow> subharmonic_residual(
    const std::function<double(double)>& f, double f_lo, double f_hi,
    const SpineLaw& spine, const std::function<double(double)>& g,
    const std::vector<double>& x_grid, std::size_t draws, std::uint64_t seed);

std::string residual_csv(const std::vector<ResidualRow>& rows);

}  // namespace brw
