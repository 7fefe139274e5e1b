#pragma once
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "brw/rng.hpp"
#include "brw/stats.hpp"

namespace brw {

//============================================================
// Offspring point-process laws for the branching random walk,
// calibrated in closed form to the critical normalization
//   E sum_i e^{-X_i} = 1,   E sum_i e^{-X_i} X_i = 0,
// plus Monte Carlo estimation of the moment functionals that the
// convergence and tail theorems assume.
//============================================================

enum class OffspringKind { binary_gaussian, lattice_bernoulli, custom };

// Fills `out` with the displacements of one brood (may be empty).
using BroodSampler = std::function<void(Stream&, std::vector<double>&)>;
// Direct sampler for the tilted step law of a custom offspring law.
using TiltSampler = std::function<double(Stream&)>;

struct OffspringLaw {
  OffspringKind kind = OffspringKind::binary_gaussian;
  std::string name;

  // binary_gaussian: exactly two children, iid Gaussian(mean, var).
  double mean = 0.0;
  double var = 0.0;
  // lattice_bernoulli: Bernoulli(p_down) child at -1 plus
  // 1 + Bernoulli(p_up_extra) children at +1.
  double p_down = 0.0;
  double p_up_extra = 0.0;

  // custom laws
  BroodSampler sampler;
  TiltSampler tilt;            // optional analytic tilted-step sampler
  double tilt_var = 0.0;       // step variance of the tilt when supplied

  double arithmetic_span = 0.0;  // 0 means nonarithmetic support
  double sigma2 = 0.0;           // E sum e^{-X} X^2, closed form for builtins
  double mean_count = 0.0;       // E N, closed form for builtins
  double c0 = 10.0;              // threshold in the tail-condition indicator

  void sample(Stream& s, std::vector<double>& out) const;
};

struct LawOverrides {
  std::optional<double> mean, var, p_down, p_up_extra;
  std::optional<double> c0;
};

// Closed-form calibration; overrides that break either normalization
// equation (beyond 1e-12) are rejected.
OffspringLaw make_builtin_law(OffspringKind kind, const LawOverrides& ov = {});
OffspringLaw make_builtin_law(const std::string& kind, const LawOverrides& ov = {});

OffspringLaw make_custom_law(BroodSampler sampler, double arithmetic_span,
                             std::string name, TiltSampler tilt = nullptr,
                             double tilt_var = 0.0);

//------------------------------------------------------------
// Monte Carlo verification report for the standing assumptions:
// normalization, zero drift, finite step variance, the
// W log^2 W-type integrability pair, and the three stronger tail
// functionals behind the sharper expansion.
//------------------------------------------------------------
struct BoundaryReport {
  Estimate m1;            // E sum e^{-X}
  Estimate drift;         // E sum e^{-X} X
  Estimate sigma2;        // E sum e^{-X} X^2
  Estimate w1_log2;       // E W_1 (log_+ W_1)^2
  Estimate wtilde_log1;   // E W~_1 log_+ W~_1
  Estimate w1p_log3;      // E W_1^+ (log_+ W_1^+)^3
  Estimate wtilde_log2;   // E W~_1 (log_+ W~_1)^2
  Estimate w1m_log3_ind;  // E W_1^- (log_+ W_1^-)^3 1{min-anchored sum > c0}
  Estimate mom3_neg;      // E sum e^{-X} (X_-)^3
  Estimate mean_count;    // E N
  double c0 = 10.0;
  std::size_t draws = 0;
  std::uint64_t seed = 0;
  bool all_finite = true;
};

BoundaryReport verify_conditions(const OffspringLaw& law, std::size_t draws,
                                 std::uint64_t seed);

//------------------------------------------------------------
// The tilted step law: E t(xi) = E sum_i e^{-X_i} t(X_i).
// Builtins admit closed-form tilts (Gaussian mean zero / symmetric
// +-1); custom laws fall back to the weighted-functional evaluator.
//------------------------------------------------------------
struct SpineLaw {
  enum class Kind { gaussian, lattice_pm1, custom_sampler, weighted_only };
  Kind kind = Kind::gaussian;
  double var = 0.0;     // step variance sigma^2 (exact for builtins)
  double span = 0.0;    // arithmetic span inherited from the base law
  OffspringLaw base;    // retained for weighted-functional estimates

  bool has_sampler() const { return kind != Kind::weighted_only; }
  double sample(Stream& s) const;
};

SpineLaw spine_law(const OffspringLaw& law);

// Estimates E t(xi) through the offspring law without sampling xi.
Estimate spine_weighted_functional(const SpineLaw& spine,
                                   const std::function<double(double)>& t,
                                   std::size_t draws, std::uint64_t seed);

}  // namespace brw
