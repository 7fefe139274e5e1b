#include "brw/tail.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "brw/rng.hpp"
#include "brw/stats.hpp"

namespace brw {

namespace {

constexpr double kEulerGamma = 0.57721566490153286;
constexpr double kFlatThreshold = 0.5;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_grid(const std::vector<double>& grid, bool positive,
                const char* who) {
  check(!grid.empty(), who);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    check(std::isfinite(grid[i]), who);
    if (positive) check(grid[i] > 0.0, who);
    if (i) check(grid[i] > grid[i - 1], who);
  }
}

// Sorted copy with prefix sums: all curves are O(log n) lookups.
struct SortedSample {
  std::vector<double> v;
  std::vector<double> sum1, sum2;  // prefix sums of values and squares

  explicit SortedSample(const std::vector<double>& sample) : v(sample) {
    std::sort(v.begin(), v.end());
    sum1.resize(v.size() + 1, 0.0);
    sum2.resize(v.size() + 1, 0.0);
    Neumaier a1, a2;
    for (std::size_t i = 0; i < v.size(); ++i) {
      a1.add(v[i]);
      a2.add(v[i] * v[i]);
      sum1[i + 1] = a1.value();
      sum2[i + 1] = a2.value();
    }
  }

  double n() const { return static_cast<double>(v.size()); }
  std::size_t count_le(double x) const {
    return static_cast<std::size_t>(
        std::upper_bound(v.begin(), v.end(), x) - v.begin());
  }
  double survival(double x) const {
    return (n() - static_cast<double>(count_le(x))) / n();
  }
  double H(double x) const { return sum1[count_le(x)] / n(); }
  double H2(double x) const { return sum2[count_le(x)] / n(); }
  // Exact integral of the empirical survival over [0, t]:
  // mean of min(max(value, 0), t).
  double gstar_exact(double t) const {
    const std::size_t k = count_le(t), k0 = count_le(0.0);
    return (sum1[k] - sum1[k0] + t * (n() - static_cast<double>(k))) / n();
  }
};

// Trapezoid integral of the empirical survival on {0} + grid, plus an
// error bound: on each segment the step function lies between the two
// endpoint values, so the trapezoid is off by at most half the jump
// times the width.
void gstar_trapezoid(const SortedSample& s, const std::vector<double>& grid,
                     std::vector<double>* out, double* err_bound) {
  out->assign(grid.size(), 0.0);
  double acc = 0.0, err = 0.0, x_prev = 0.0, surv_prev = s.survival(0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i], surv = s.survival(x);
    acc += (x - x_prev) * 0.5 * (surv_prev + surv);
    err += (x - x_prev) * 0.5 * (surv_prev - surv);
    (*out)[i] = acc;
    x_prev = x;
    surv_prev = surv;
  }
  *err_bound = err;
}

// One bootstrap resample, reduced to per-interval counts and value sums
// over the cells (-inf, x_1], (x_1, x_2], ..., (x_m, inf).  That is all
// the curves depend on, so no per-replica sort is needed.
struct BinnedBoot {
  std::vector<double> count, sum, sum2;

  BinnedBoot(const SortedSample& s, const std::vector<double>& grid,
             Stream& st)
      : count(grid.size() + 1, 0.0),
        sum(grid.size() + 1, 0.0),
        sum2(grid.size() + 1, 0.0) {
    const std::size_t n = s.v.size();
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = static_cast<std::size_t>(st.next_unit() *
                                               static_cast<double>(n));
      if (j >= n) j = n - 1;
      const double z = s.v[j];
      const std::size_t cell =
          static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(),
                                                    z) -
                                   grid.begin());
      count[cell] += 1.0;
      sum[cell] += z;
      sum2[cell] += z * z;
    }
  }
};

}  // namespace

std::string TailReport::csv() const {
  std::ostringstream os;
  os.precision(10);
  if (!provenance.empty()) os << "# provenance=" << provenance << '\n';
  os << "x,survival,H,H_se,H2,H2_se,gstar,gstar_se,tail_product,"
        "tail_product_se\n";
  for (std::size_t i = 0; i < x.size(); ++i)
    os << x[i] << ',' << survival[i] << ',' << H[i] << ',' << H_se[i] << ','
       << H2[i] << ',' << H2_se[i] << ',' << gstar[i] << ',' << gstar_se[i]
       << ',' << tail_product[i] << ',' << tail_product_se[i] << '\n';
  return os.str();
}

TailReport tail_curves(const std::vector<double>& sample,
                       const std::vector<double>& x_grid,
                       std::size_t bootstrap_reps, std::uint64_t seed) {
  check(sample.size() >= 10000, "tail_curves: sample size must be >= 1e4");
  check_grid(x_grid, /*positive=*/true, "tail_curves: x_grid must be positive increasing");

  SortedSample s(sample);

  TailReport rep;
  for (double x : x_grid) {
    if (x > s.v.back())
      rep.dropped_x.push_back(x);  // tail product undefined past the sample
    else
      rep.x.push_back(x);
  }
  check(!rep.x.empty(), "tail_curves: entire grid beyond the sample maximum");

  for (double x : rep.x) {
    rep.survival.push_back(s.survival(x));
    rep.H.push_back(s.H(x));
    rep.H2.push_back(s.H2(x));
    rep.tail_product.push_back(x * s.survival(x));
  }
  gstar_trapezoid(s, rep.x, &rep.gstar, &rep.quadrature_error);

  const std::size_t k0 = s.count_le(0.0);
  // count_le(0) includes exact zeros, which contribute nothing to the sum,
  // so sum1[k0] is the negative part either way.
  std::size_t strict_neg = static_cast<std::size_t>(
      std::lower_bound(s.v.begin(), s.v.end(), 0.0) - s.v.begin());
  rep.negative_fraction = static_cast<double>(strict_neg) / s.n();
  rep.negative_mean = s.sum1[k0] / s.n();

  // Bootstrap SEs; per-replica streams keyed (seed, rep, 12).  The
  // trapezoid head segment [0, x_1) reuses the full-sample survival at 0,
  // whose resampling variation is second order there.
  const std::size_t m = rep.x.size();
  std::vector<MeanVar> bH(m), bH2(m), bG(m), bT(m);
  for (std::size_t r = 0; r < bootstrap_reps; ++r) {
    Stream st(seed, r, 12);
    BinnedBoot bb(s, rep.x, st);
    double cum_cnt = 0.0, cum_sum = 0.0, cum_sum2 = 0.0;
    double x_prev = 0.0, surv_prev = s.survival(0.0), acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      cum_cnt += bb.count[i];
      cum_sum += bb.sum[i];
      cum_sum2 += bb.sum2[i];
      const double surv = 1.0 - cum_cnt / s.n();
      acc += (rep.x[i] - x_prev) * 0.5 * (surv_prev + surv);
      bH[i].add(cum_sum / s.n());
      bH2[i].add(cum_sum2 / s.n());
      bG[i].add(acc);
      bT[i].add(rep.x[i] * surv);
      x_prev = rep.x[i];
      surv_prev = surv;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    rep.H_se.push_back(bH[i].sd());
    rep.H2_se.push_back(bH2[i].sd());
    rep.gstar_se.push_back(bG[i].sd());
    rep.tail_product_se.push_back(bT[i].sd());
  }
  return rep;
}

CEstimate estimate_c(const std::vector<double>& sample,
                     std::vector<double> window, std::size_t bootstrap_reps,
                     std::uint64_t seed) {
  check(sample.size() >= 10000, "estimate_c: sample size must be >= 1e4");

  SortedSample s(sample);
  if (window.empty()) {
    const double lo = percentile(s.v, 0.90), hi = percentile(s.v, 0.99);
    check(lo > 0.0 && hi > lo,
          "estimate_c: default window needs a positive spread between the "
          "90% and 99% quantiles");
    for (int i = 0; i < 9; ++i)
      window.push_back(lo * std::pow(hi / lo, i / 8.0));
  }
  check(window.size() >= 5, "estimate_c: window needs at least 5 points");
  check_grid(window, /*positive=*/true, "estimate_c: window must be positive increasing");
  check(window.back() <= s.v.back(), "estimate_c: window beyond sample range");

  CEstimate est;
  est.window = window;
  double lo_gap = std::numeric_limits<double>::infinity(), hi_gap = -lo_gap;
  Neumaier acc;
  for (double x : window) {
    const double gap = s.H(x) - std::log(x);
    acc.add(gap);
    lo_gap = std::min(lo_gap, gap);
    hi_gap = std::max(hi_gap, gap);
  }
  est.c_hat = acc.value() / static_cast<double>(window.size());
  est.flatness = hi_gap - lo_gap;
  est.flat = est.flatness <= kFlatThreshold;

  // Bootstrap over resampled H curves (streams (seed, rep, 12)).
  std::vector<double> c_reps;
  c_reps.reserve(bootstrap_reps);
  MeanVar mv;
  for (std::size_t r = 0; r < bootstrap_reps; ++r) {
    Stream st(seed, r, 12);
    BinnedBoot bb(s, window, st);
    double cum = 0.0;
    Neumaier a;
    for (std::size_t i = 0; i < window.size(); ++i) {
      cum += bb.sum[i];
      a.add(cum / s.n() - std::log(window[i]));
    }
    const double c_r = a.value() / static_cast<double>(window.size());
    c_reps.push_back(c_r);
    mv.add(c_r);
  }
  std::sort(c_reps.begin(), c_reps.end());
  est.se = mv.sd();
  est.lo = percentile(c_reps, 0.025);
  est.hi = percentile(c_reps, 0.975);
  return est;
}

std::string LaplaceProfile::csv() const {
  std::ostringstream os;
  os.precision(10);
  if (!provenance.empty()) os << "# provenance=" << provenance << '\n';
  os << "s,phi,phi_se,psi_star\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    os << s[i] << ',' << phi[i] << ',' << phi_se[i] << ',' << psi_star[i]
       << '\n';
  os << "x,D,D_se,D_over_x\n";
  for (std::size_t i = 0; i < x.size(); ++i)
    os << x[i] << ',' << D[i] << ',' << D_se[i] << ',' << D_over_x[i] << '\n';
  return os.str();
}

LaplaceProfile laplace_profile(const std::vector<double>& sample,
                               const std::vector<double>& x_grid,
                               const std::vector<double>& s_grid) {
  check(!sample.empty(), "laplace_profile: sample must be nonempty");
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    check(std::isfinite(s_grid[i]) && s_grid[i] >= 0.0,
          "laplace_profile: s_grid must be nonnegative increasing");
    if (i)
      check(s_grid[i] > s_grid[i - 1],
            "laplace_profile: s_grid must be nonnegative increasing");
  }
  for (std::size_t i = 1; i < x_grid.size(); ++i)
    check(x_grid[i] > x_grid[i - 1], "laplace_profile: x_grid must be increasing");

  LaplaceProfile prof;
  const double n = static_cast<double>(sample.size());

  std::vector<double> clipped(sample.size());
  std::size_t n_neg = 0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    clipped[i] = std::max(sample[i], 0.0);
    if (sample[i] < 0.0) ++n_neg;
  }
  prof.clipped_fraction = static_cast<double>(n_neg) / n;

  auto transform_at = [&](double sv, double* mean, double* se) {
    MeanVar mv;
    for (double z : clipped) mv.add(std::exp(-sv * z));
    *mean = mv.mean;
    *se = mv.se();
  };

  for (double sv : s_grid) {
    double m = 1.0, e = 0.0;
    if (sv == 0.0) {
      prof.s.push_back(0.0);
      prof.phi.push_back(1.0);  // exact: e^0 for every sample point
      prof.phi_se.push_back(0.0);
      Neumaier a;
      for (double z : clipped) a.add(z);
      prof.psi_star.push_back(a.value() / n);  // s -> 0+ limit of psi_star
      continue;
    }
    transform_at(sv, &m, &e);
    prof.s.push_back(sv);
    prof.phi.push_back(m);
    prof.phi_se.push_back(e);
    prof.psi_star.push_back((1.0 - m) / sv);
  }

  for (double x : x_grid) {
    double m = 1.0, e = 0.0;
    transform_at(std::exp(-x), &m, &e);
    const double ex = std::exp(x);
    prof.x.push_back(x);
    prof.D.push_back(ex * (1.0 - m));
    prof.D_se.push_back(ex * e);
    prof.D_over_x.push_back(x > 0.0 ? ex * (1.0 - m) / x : kNaN);
  }
  return prof;
}

std::string GCurve::csv() const {
  std::ostringstream os;
  os.precision(10);
  if (!provenance.empty()) os << "# provenance=" << provenance << '\n';
  os << "x,G,G_se\n";
  for (std::size_t i = 0; i < x.size(); ++i)
    os << x[i] << ',' << g[i] << ',' << g_se[i] << '\n';
  return os.str();
}

GCurve g_profile(const OffspringLaw& law, const std::vector<double>& sample,
                 const std::vector<double>& x_grid, std::size_t draws,
                 std::uint64_t seed) {
  check(!sample.empty(), "g_profile: sample must be nonempty");
  check(draws >= 1000, "g_profile: draws must be >= 1000");
  check_grid(x_grid, /*positive=*/false, "g_profile: x_grid must be increasing");

  // Empirical transform of the clipped sample on a log-s lattice wide
  // enough for the grid plus ~12 standard deviations of one step.
  constexpr double kReach = 14.0, kStep = 0.25;
  const double lo = -(x_grid.back() + kReach), hi = -(x_grid.front() - kReach);
  std::vector<double> nodes, values;
  for (double u = lo; u <= hi + 1e-12; u += kStep) nodes.push_back(u);
  values.reserve(nodes.size());
  for (double u : nodes) {
    const double sv = std::exp(u);
    Neumaier a;
    for (double z : sample) a.add(std::exp(-sv * std::max(z, 0.0)));
    values.push_back(a.value() / static_cast<double>(sample.size()));
  }
  MonotoneInterp phi(nodes, values);

  GCurve curve;
  curve.log_s_lo = lo;
  curve.log_s_hi = hi;
  curve.x = x_grid;
  std::vector<MeanVar> acc(x_grid.size());
  std::vector<double> brood;
  Stream stream(seed, 0, 11);
  for (std::size_t d = 0; d < draws; ++d) {
    law.sample(stream, brood);
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
      const double x = x_grid[i];
      double prod = 1.0, sum = 0.0;
      for (double xi : brood) {
        const double logs = -(x + xi);
        if (logs < lo || logs > hi)
          throw std::runtime_error(
              "g_profile: phi interpolation range exceeded");
        const double u = 1.0 - phi(logs);  // in [0, 1]
        prod *= 1.0 - u;
        sum += u;
      }
      acc[i].add(std::exp(x) * (prod - 1.0 + sum));
    }
  }
  for (auto& mv : acc) {
    curve.g.push_back(mv.mean);
    curve.g_se.push_back(mv.se());
  }
  return curve;
}

std::string TauberianTable::csv() const {
  std::ostringstream os;
  os.precision(10);
  if (!provenance.empty()) os << "# provenance=" << provenance << '\n';
  os << "t,psi_star,gstar,hstar,log_t,offset\n";
  for (const auto& r : rows)
    os << r.t << ',' << r.psi_star << ',' << r.gstar << ',' << r.hstar << ','
       << r.log_t << ',' << r.offset << '\n';
  return os.str();
}

TauberianTable tauberian_check(const std::vector<double>& sample,
                               const std::vector<double>& t_grid) {
  check(!sample.empty(), "tauberian_check: sample must be nonempty");
  check_grid(t_grid, /*positive=*/true, "tauberian_check: t_grid must be positive increasing");

  SortedSample s(sample);
  check(t_grid.back() <= s.v.back(), "tauberian_check: t_grid beyond sample range");

  TauberianTable table;
  for (double t : t_grid) {
    TauberianRow row;
    row.t = t;
    Neumaier a;
    for (double z : s.v) a.add(std::exp(-z / t));
    row.psi_star = t * (1.0 - a.value() / s.n());
    row.gstar = s.gstar_exact(t);
    row.hstar = s.H(t);
    row.log_t = std::log(t);
    row.offset = row.psi_star - row.gstar + kEulerGamma;
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace brw
