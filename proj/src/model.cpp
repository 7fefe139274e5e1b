#include "brw/model.hpp"

#include <cmath>
#include <stdexcept>

namespace brw {
namespace {

constexpr double kCalibrationTol = 1e-12;

double log_plus(double x) { return std::log(std::max(x, 1.0)); }

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void OffspringLaw::sample(Stream& s, std::vector<double>& out) const {
  out.clear();
  switch (kind) {
    case OffspringKind::binary_gaussian: {
      double z0, z1;
      s.next_normal_pair(z0, z1);
      const double sd = std::sqrt(var);
      out.push_back(mean + sd * z0);
      out.push_back(mean + sd * z1);
      break;
    }
    case OffspringKind::lattice_bernoulli: {
      if (s.next_bernoulli(p_down)) out.push_back(-1.0);
      out.push_back(1.0);
      if (s.next_bernoulli(p_up_extra)) out.push_back(1.0);
      break;
    }
    case OffspringKind::custom:
      sampler(s, out);
      break;
  }
}

OffspringLaw make_builtin_law(OffspringKind kind, const LawOverrides& ov) {
  OffspringLaw law;
  law.kind = kind;
  if (ov.c0) law.c0 = *ov.c0;
  switch (kind) {
    case OffspringKind::binary_gaussian: {
      // 2 e^{-m+s^2/2} = 1 and zero drift force m = s^2 = 2 log 2.
      const double def = 2.0 * std::log(2.0);
      law.mean = ov.mean.value_or(def);
      law.var = ov.var.value_or(def);
      check(law.var > 0, "binary_gaussian: variance must be positive");
      check(std::abs(2.0 * std::exp(-law.mean + 0.5 * law.var) - 1.0) <=
                kCalibrationTol,
            "binary_gaussian: normalization E sum e^{-X} = 1 violated");
      check(std::abs(law.mean - law.var) <= kCalibrationTol,
            "binary_gaussian: zero-drift equation m = s^2 violated");
      law.name = "binary_gaussian";
      law.arithmetic_span = 0.0;
      law.sigma2 = law.var;  // tilted step is Gaussian(0, s^2)
      law.mean_count = 2.0;
      break;
    }
    case OffspringKind::lattice_bernoulli: {
      // A ~ Bernoulli(p_down) at -1, B ~ 1 + Bernoulli(p_up_extra) at +1;
      // E[A] e = 1/2 and E[B] / e = 1/2.
      law.p_down = ov.p_down.value_or(1.0 / (2.0 * M_E));
      law.p_up_extra = ov.p_up_extra.value_or(0.5 * M_E - 1.0);
      check(law.p_down >= 0 && law.p_down <= 1 && law.p_up_extra >= 0 &&
                law.p_up_extra <= 1,
            "lattice_bernoulli: probabilities out of range");
      check(std::abs(law.p_down * M_E - 0.5) <= kCalibrationTol,
            "lattice_bernoulli: normalization at -1 violated");
      check(std::abs((1.0 + law.p_up_extra) / M_E - 0.5) <= kCalibrationTol,
            "lattice_bernoulli: normalization at +1 violated");
      law.name = "lattice_bernoulli";
      law.arithmetic_span = 1.0;
      law.sigma2 = 1.0;  // (1/2)(-1)^2 + (1/2)(+1)^2
      law.mean_count = law.p_down + 1.0 + law.p_up_extra;
      break;
    }
    case OffspringKind::custom:
      throw std::invalid_argument("make_builtin_law: custom is not a builtin");
  }
  return law;
}

OffspringLaw make_builtin_law(const std::string& kind, const LawOverrides& ov) {
  if (kind == "binary_gaussian")
    return make_builtin_law(OffspringKind::binary_gaussian, ov);
  if (kind == "lattice_bernoulli")
    return make_builtin_law(OffspringKind::lattice_bernoulli, ov);
  throw std::invalid_argument("make_builtin_law: unknown kind '" + kind + "'");
}

OffspringLaw make_custom_law(BroodSampler sampler, double arithmetic_span,
                             std::string name, TiltSampler tilt,
                             double tilt_var) {
  check(static_cast<bool>(sampler), "make_custom_law: sampler required");
  OffspringLaw law;
  law.kind = OffspringKind::custom;
  law.sampler = std::move(sampler);
  law.tilt = std::move(tilt);
  law.tilt_var = tilt_var;
  law.arithmetic_span = arithmetic_span;
  law.name = std::move(name);
  return law;
}

BoundaryReport verify_conditions(const OffspringLaw& law, std::size_t draws,
                                 std::uint64_t seed) {
  check(draws >= 10000, "verify_conditions: draws must be >= 1e4");
  BoundaryReport rep;
  rep.c0 = law.c0;
  rep.draws = draws;
  rep.seed = seed;

  Stream stream(seed, 0, 0);
  std::vector<double> xs;
  MeanVar m1, drift, sigma2, w1_log2, wtilde_log1, w1p_log3, wtilde_log2,
      w1m_log3_ind, mom3_neg, mean_count;

  for (std::size_t k = 0; k < draws; ++k) {
    law.sample(stream, xs);
    double s_m1 = 0, s_drift = 0, s_sig = 0, s_wt = 0, s_w1p = 0, s_w1m = 0,
           s_mom3 = 0, s_ind = 0;
    double xmin = 0.0;
    bool any_neg = false;
    for (double x : xs)
      if (x < 0 && (!any_neg || x < xmin)) {
        xmin = x;
        any_neg = true;
      }
    for (double x : xs) {
      const double w = std::exp(-x);
      s_m1 += w;
      s_drift += w * x;
      s_sig += w * x * x;
      if (x >= 0) {
        s_wt += w * x;
        s_w1p += w;
      } else {
        s_w1m += w;
        s_mom3 += w * (-x) * (-x) * (-x);
        s_ind += (1.0 + x - xmin) * std::exp(xmin - x);
      }
    }
    m1.add(s_m1);
    drift.add(s_drift);
    sigma2.add(s_sig);
    w1_log2.add(s_m1 * log_plus(s_m1) * log_plus(s_m1));
    wtilde_log1.add(s_wt * log_plus(s_wt));
    w1p_log3.add(s_w1p * std::pow(log_plus(s_w1p), 3));
    wtilde_log2.add(s_wt * log_plus(s_wt) * log_plus(s_wt));
    w1m_log3_ind.add(s_ind > law.c0
                         ? s_w1m * std::pow(log_plus(s_w1m), 3)
                         : 0.0);
    mom3_neg.add(s_mom3);
    mean_count.add(static_cast<double>(xs.size()));
  }

  auto est = [&](const MeanVar& mv) { return Estimate{mv.mean, mv.se()}; };
  rep.m1 = est(m1);
  rep.drift = est(drift);
  rep.sigma2 = est(sigma2);
  rep.w1_log2 = est(w1_log2);
  rep.wtilde_log1 = est(wtilde_log1);
  rep.w1p_log3 = est(w1p_log3);
  rep.wtilde_log2 = est(wtilde_log2);
  rep.w1m_log3_ind = est(w1m_log3_ind);
  rep.mom3_neg = est(mom3_neg);
  rep.mean_count = est(mean_count);

  for (const Estimate* e :
       {&rep.m1, &rep.drift, &rep.sigma2, &rep.w1_log2, &rep.wtilde_log1,
        &rep.w1p_log3, &rep.wtilde_log2, &rep.w1m_log3_ind, &rep.mom3_neg,
        &rep.mean_count})
    if (!std::isfinite(e->value) || !std::isfinite(e->se))
      rep.all_finite = false;
  return rep;
}

double SpineLaw::sample(Stream& s) const {
  switch (kind) {
    case Kind::gaussian:
      return std::sqrt(var) * s.next_normal();
    case Kind::lattice_pm1:
      return s.next_bernoulli(0.5) ? 1.0 : -1.0;
    case Kind::custom_sampler:
      return base.tilt(s);
    case Kind::weighted_only:
      throw std::logic_error("SpineLaw: no direct sampler for this law");
  }
  throw std::logic_error("SpineLaw: unreachable");
}

SpineLaw spine_law(const OffspringLaw& law) {
  SpineLaw sp;
  sp.base = law;
  sp.span = law.arithmetic_span;
  switch (law.kind) {
    case OffspringKind::binary_gaussian:
      // Tilting Gaussian(m, s^2) by e^{-x} shifts the mean to m - s^2 = 0.
      sp.kind = SpineLaw::Kind::gaussian;
      sp.var = law.var;
      break;
    case OffspringKind::lattice_bernoulli:
      // Weight at -1: E[A] e = 1/2; weight at +1: E[B]/e = 1/2.
      sp.kind = SpineLaw::Kind::lattice_pm1;
      sp.var = 1.0;
      break;
    case OffspringKind::custom:
      if (law.tilt) {
        sp.kind = SpineLaw::Kind::custom_sampler;
        sp.var = law.tilt_var;
      } else if (law.sampler) {
        sp.kind = SpineLaw::Kind::weighted_only;
        sp.var = 0.0;
      } else {
        throw std::invalid_argument(
            "spine_law: custom law needs a tilt or an offspring sampler");
      }
      break;
  }
  return sp;
}

Estimate spine_weighted_functional(const SpineLaw& spine,
                                   const std::function<double(double)>& t,
                                   std::size_t draws, std::uint64_t seed) {
  Stream stream(seed, 0, 0);
  std::vector<double> xs;
  MeanVar mv;
  for (std::size_t k = 0; k < draws; ++k) {
    spine.base.sample(stream, xs);
    double s = 0;
    for (double x : xs) s += std::exp(-x) * t(x);
    mv.add(s);
  }
  return {mv.mean, mv.se()};
}

}  // namespace brw
