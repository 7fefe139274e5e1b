#include "brw/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace brw {
namespace {

bool is_lattice(const SpineLaw& spine) {
  return spine.kind == SpineLaw::Kind::lattice_pm1;
}

// One killed path from x: accumulates p over S_0..S_{tau-1} and reports
// the landing value S_tau (0 if the cap censored the path first).
struct KilledPath {
  double occupation = 0.0;
  double landing = 0.0;
  bool censored = false;
};

KilledPath run_killed_path(const SpineLaw& spine,
                           const std::function<double(double)>& p,
                           double p_support, double x, std::size_t cap,
                           Stream& stream) {
  KilledPath out;
  double s = x;
  for (std::size_t k = 0; k < cap; ++k) {
    if (s <= p_support) out.occupation += p(s);
    s += spine.sample(stream);
    if (s <= 0.0) {
      out.landing = s;
      return out;
    }
  }
  out.censored = true;
  return out;
}

// Solves h(w) = q(w) + (h(w+1) + h(w-1)) / 2 on w = 1..W with h(0) = 0
// and a zero-slope far boundary h(W) = h(W-1); beyond the support of q
// the bounded solution is constant, so the closure is exact once W
// clears the support.  Thomas algorithm on the tridiagonal system.
std::vector<double> lattice_occupation_solve(const std::vector<double>& q) {
  const std::size_t W = q.size();  // unknowns h(1..W), q indexed from 1
  std::vector<double> diag(W, 1.0), rhs(W);
  std::vector<double> sub(W, -0.5), sup(W, -0.5);
  for (std::size_t i = 0; i + 1 < W; ++i) rhs[i] = q[i];
  sub[W - 1] = -1.0;
  rhs[W - 1] = 0.0;
  sup[W - 1] = 0.0;
  for (std::size_t i = 1; i < W; ++i) {
    const double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> h(W);
  h[W - 1] = rhs[W - 1] / diag[W - 1];
  for (std::size_t i = W - 1; i-- > 0;)
    h[i] = (rhs[i] - sup[i] * h[i + 1]) / diag[i];
  return h;
}

double lattice_dp_value(const std::function<double(double)>& p,
                        double p_support, double x) {
  if (std::abs(x - std::round(x)) > 1e-9)
    throw std::invalid_argument(
        "occupation_expectation: lattice_dp needs an integer start");
  const std::size_t xi = static_cast<std::size_t>(std::llround(x));
  const std::size_t W =
      xi + static_cast<std::size_t>(std::ceil(p_support)) + 50;
  std::vector<double> q(W, 0.0);
  for (std::size_t w = 1; w <= W; ++w)
    if (static_cast<double>(w) <= p_support) q[w - 1] = p(double(w));
  const auto h = lattice_occupation_solve(q);
  return h[xi - 1];
}

double renewal_integral_value(const RenewalTable& tab,
                              const std::function<double(double)>& p,
                              double p_support, double x) {
  const double tol = 1e-9;
  if (tab.mode == RenewalTable::Mode::exact_lattice) {
    // dU: mass 2 at integers y < x (strict); dV: mass 1 at integers z.
    double acc = 0.0;
    for (double y = 0.0; y < x - tol; y += 1.0) {
      double inner = 0.0;
      for (double z = 0.0; x - y + z <= p_support + tol; z += 1.0)
        inner += p(x - y + z);
      acc += 2.0 * inner;
    }
    return acc;
  }
  double acc = 0.0;
  for (double y : tab.u_points) {
    if (y >= x) break;  // strict dU convention; points sorted
    double inner = 0.0;
    for (double z : tab.v_points) {
      if (x - y + z > p_support + tol) break;
      inner += p(x - y + z);
    }
    acc += inner;
  }
  return tab.u_weight * tab.v_weight * acc;
}

}  // namespace

Estimate occupation_expectation(const SpineLaw& spine,
                                const std::function<double(double)>& p,
                                double p_support, double x, OccMethod method,
                                const OccupationConfig& cfg) {
  if (p_support < 0.0)
    throw std::invalid_argument(
        "occupation_expectation: p needs a declared support bound");
  if (x <= 0.0) return {0.0, 0.0};
  switch (method) {
    case OccMethod::monte_carlo: {
      if (!spine.has_sampler())
        throw std::invalid_argument(
            "occupation_expectation: spine lacks a sampler");
      MeanVar acc;
      for (std::size_t r = 0; r < cfg.draws; ++r) {
        Stream stream(cfg.seed, r, 6);
        acc.add(run_killed_path(spine, p, p_support, x, cfg.path_cap, stream)
                    .occupation);
      }
      return {acc.mean, acc.se()};
    }
    case OccMethod::lattice_dp:
      if (!is_lattice(spine))
        throw std::invalid_argument(
            "occupation_expectation: lattice_dp needs the +-1 spine");
      return {lattice_dp_value(p, p_support, x), 0.0};
    case OccMethod::renewal_double_integral:
      if (cfg.table == nullptr)
        throw std::invalid_argument(
            "occupation_expectation: renewal_double_integral needs a table");
      return {renewal_integral_value(*cfg.table, p, p_support, x), 0.0};
  }
  throw std::logic_error("occupation_expectation: unknown method");
}

IdentityReport renewal_identity_check(const SpineLaw& spine,
                                      const std::function<double(double)>& p,
                                      double p_support, double x,
                                      const IdentityConfig& cfg) {
  IdentityReport rep;
  OccupationConfig occ;
  occ.draws = cfg.draws;
  occ.path_cap = cfg.path_cap;
  occ.seed = cfg.seed;
  const std::vector<double> grid{std::max(x, p_support) + 1.0};

  if (is_lattice(spine)) {
    rep.lhs = occupation_expectation(spine, p, p_support, x,
                                     OccMethod::lattice_dp, occ);
    const RenewalTable tab = renewal_tables(
        spine, grid, 1000, cfg.seed, RenewalTable::Mode::exact_lattice);
    occ.table = &tab;
    rep.rhs = occupation_expectation(
        spine, p, p_support, x, OccMethod::renewal_double_integral, occ);
  } else {
    rep.lhs = occupation_expectation(spine, p, p_support, x,
                                     OccMethod::monte_carlo, occ);
    MeanVar blocks;
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
      const RenewalTable tab = renewal_tables(
          spine, grid, cfg.ladders_per_block, cfg.seed + 101 + b,
          RenewalTable::Mode::empirical, cfg.ladder);
      occ.table = &tab;
      blocks.add(occupation_expectation(spine, p, p_support, x,
                                        OccMethod::renewal_double_integral,
                                        occ)
                     .value);
    }
    rep.rhs = {blocks.mean, blocks.se()};
  }
  rep.gap = rep.lhs.value - rep.rhs.value;
  rep.se = std::hypot(rep.lhs.se, rep.rhs.se);
  return rep;
}

TailRule TailRule::exp_dominated(double a) {
  if (a <= 0.0) throw std::invalid_argument("exp_dominated: a > 0 required");
  return {Kind::exp_dominated, a};
}

TailRule TailRule::hard_cutoff() { return {Kind::hard_cutoff, 0.0}; }

namespace {

struct MeshScan {
  bool finite = true;
  bool endpoint_exact = false;  // monotone and jump-free on the mesh
  bool nonincreasing = false;
};

// Decides whether cell extrema may be taken at cell endpoints: exact
// for monotone continuous functions, where sup/inf sit at the ends.
// An isolated mesh jump (|diff| far above both neighbors) signals a
// discontinuity and forces the dense-sampling fallback.
MeshScan scan_mesh(const std::function<double(double)>& t, double x_max) {
  const std::size_t n = 16384;
  MeshScan out;
  std::vector<double> d(n);
  double prev = t(0.0);
  if (!std::isfinite(prev)) out.finite = false;
  bool ninc = true, ndec = true;
  for (std::size_t i = 1; i <= n; ++i) {
    const double v = t(x_max * double(i) / double(n));
    if (!std::isfinite(v)) out.finite = false;
    d[i - 1] = v - prev;
    if (d[i - 1] > 1e-12) ninc = false;
    if (d[i - 1] < -1e-12) ndec = false;
    prev = v;
  }
  bool smooth = true;
  for (std::size_t i = 0; i < n && smooth; ++i) {
    if (std::abs(d[i]) <= 1e-9) continue;
    const double left = i > 0 ? std::abs(d[i - 1]) : 0.0;
    const double right = i + 1 < n ? std::abs(d[i + 1]) : 0.0;
    const double near = i == 0 ? right : (i + 1 == n ? left : std::max(left, right));
    if (std::abs(d[i]) > 4.0 * near + 1e-12) smooth = false;
  }
  out.endpoint_exact = out.finite && smooth && (ninc || ndec);
  out.nonincreasing = ninc;
  return out;
}

// Per-cell upper/lower contributions on cells [(n-1)h, nh), n = 1..N.
void cell_extrema(const std::function<double(double)>& t, double h,
                  std::size_t cells, const MeshScan& scan,
                  std::size_t samples, std::vector<double>& sup,
                  std::vector<double>& inf) {
  sup.resize(cells);
  inf.resize(cells);
  if (scan.endpoint_exact) {
    double left = t(0.0);
    for (std::size_t c = 0; c < cells; ++c) {
      const double right = t(h * double(c + 1));
      sup[c] = scan.nonincreasing ? left : right;
      inf[c] = scan.nonincreasing ? right : left;
      left = right;
    }
    return;
  }
  for (std::size_t c = 0; c < cells; ++c) {
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < samples; ++j) {
      // half-open sampling: the right endpoint belongs to the next cell
      const double v = t(h * (double(c) + double(j) / double(samples)));
      hi = std::max(hi, v);
      lo = std::min(lo, v);
    }
    sup[c] = hi;
    inf[c] = lo;
  }
}

}  // namespace

DriReport dri_classify(const std::function<double(double)>& t,
                       std::vector<double> h_list, double x_max,
                       const TailRule& rule, const DriConfig& cfg) {
  if (h_list.empty() || x_max <= 0.0)
    throw std::invalid_argument("dri_classify: need cell widths and x_max > 0");
  for (double h : h_list)
    if (h <= 0.0) throw std::invalid_argument("dri_classify: h > 0 required");
  std::sort(h_list.begin(), h_list.end(), std::greater<>());

  DriReport rep;
  rep.h_list = h_list;
  const MeshScan scan = scan_mesh(t, x_max);

  std::vector<double> sup, inf;
  for (double h : h_list) {
    const auto cells = static_cast<std::size_t>(std::ceil(x_max / h - 1e-12));
    cell_extrema(t, h, cells, scan, cfg.samples_per_cell, sup, inf);
    Neumaier up, low;
    for (std::size_t c = 0; c < cells; ++c) {
      up.add(h * sup[c]);
      low.add(h * inf[c]);
    }
    rep.upper.push_back(up.value());
    rep.lower.push_back(low.value());
  }

  rep.tail_estimate = rule.kind == TailRule::Kind::exp_dominated
                          ? t(x_max) * (1.0 / rule.a + h_list.back())
                          : 0.0;

  // Growth probe: the largest width's upper sum at increasing truncation
  // points; steady increments mean mass keeps arriving and the full-line
  // upper sum cannot be finite.
  {
    const double h = h_list.front();
    const auto cells = static_cast<std::size_t>(std::ceil(x_max / h - 1e-12));
    cell_extrema(t, h, cells, scan, cfg.samples_per_cell, sup, inf);
    for (double frac : {0.25, 0.5, 1.0}) {
      const auto upto = std::min(
          cells, static_cast<std::size_t>(std::floor(cells * frac + 1e-12)));
      Neumaier up;
      for (std::size_t c = 0; c < upto; ++c) up.add(h * sup[c]);
      rep.growth.push_back(up.value());
    }
  }

  rep.integral_low = rep.lower.back();
  rep.integral_high = rep.upper.back() + rep.tail_estimate;

  const bool finite =
      scan.finite &&
      std::all_of(rep.upper.begin(), rep.upper.end(),
                  [](double v) { return std::isfinite(v); });
  const double d1 = rep.growth[1] - rep.growth[0];
  const double d2 = rep.growth[2] - rep.growth[1];
  const bool growing =
      d2 > std::max(10.0 * rep.tail_estimate, 1e-9) && d2 >= 0.5 * d1;
  if (!finite || growing) {
    rep.verdict = DriVerdict::not_dri;
    return rep;
  }
  bool gaps_shrink = true;
  const double first_gap = rep.upper.front() - rep.lower.front();
  for (std::size_t i = 1; i < h_list.size(); ++i) {
    const double prev = rep.upper[i - 1] - rep.lower[i - 1];
    const double cur = rep.upper[i] - rep.lower[i];
    if (cur > prev + 1e-12) gaps_shrink = false;
  }
  const double last_gap = rep.upper.back() - rep.lower.back();
  if (gaps_shrink && last_gap <= 0.6 * first_gap + 1e-12)
    rep.verdict = DriVerdict::dri;
  else
    rep.verdict = DriVerdict::inconclusive;
  return rep;
}

RepresentationResult three_term_representation(
    const SpineLaw& spine, const std::function<double(double)>& g,
    const std::function<double(double)>& h, double kappa,
    const std::vector<double>& x_grid, const RepresentationConfig& cfg) {
  if (x_grid.empty())
    throw std::invalid_argument("three_term_representation: empty grid");
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    if (x_grid[i] <= 0.0)
      throw std::invalid_argument("three_term_representation: grid must be > 0");
    if (i > 0 && x_grid[i] <= x_grid[i - 1])
      throw std::invalid_argument(
          "three_term_representation: grid must increase");
  }
  const DriReport dri = dri_classify(g, {0.5, 0.25, 0.125}, cfg.g_support,
                                     TailRule::hard_cutoff());
  if (dri.verdict == DriVerdict::not_dri && !cfg.allow_non_dri)
    throw std::invalid_argument(
        "three_term_representation: g is not directly Riemann integrable");
  if (!spine.has_sampler())
    throw std::invalid_argument(
        "three_term_representation: spine lacks a sampler");

  RepresentationResult res;
  res.x = x_grid;
  res.kappa = kappa;

  if (is_lattice(spine)) {
    const RenewalTable tab = renewal_tables(
        spine, x_grid, 1000, cfg.seed, RenewalTable::Mode::exact_lattice);
    for (double u : tab.U) res.term1.push_back({kappa * u, 0.0});
  } else {
    std::vector<MeanVar> acc(x_grid.size());
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
      const RenewalTable tab =
          renewal_tables(spine, x_grid, cfg.n_ladders, cfg.seed + 201 + b,
                         RenewalTable::Mode::empirical, cfg.ladder);
      for (std::size_t i = 0; i < x_grid.size(); ++i)
        acc[i].add(kappa * tab.U[i]);
    }
    for (auto& a : acc) res.term1.push_back({a.mean, a.se()});
  }

  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    MeanVar w2, w3, diff;
    for (std::size_t r = 0; r < cfg.draws; ++r) {
      Stream stream(cfg.seed, r, 1000 + i);
      const KilledPath kp = run_killed_path(spine, g, cfg.g_support, x_grid[i],
                                            cfg.path_cap, stream);
      const double h_val = kp.censored ? 0.0 : h(kp.landing);
      w2.add(h_val);
      w3.add(kp.occupation);
      diff.add(h_val - kp.occupation);
    }
    res.term2.push_back({w2.mean, w2.se()});
    res.term3.push_back({w3.mean, w3.se()});
    res.f.push_back({res.term1[i].value + diff.mean,
                     std::hypot(res.term1[i].se, diff.se())});
  }
  return res;
}

std::string RepresentationResult::csv() const {
  std::ostringstream os;
  os << "x,term1,se1,term2,se2,term3,se3,f,se\n";
  for (std::size_t i = 0; i < x.size(); ++i)
    os << x[i] << ',' << term1[i].value << ',' << term1[i].se << ','
       << term2[i].value << ',' << term2[i].se << ',' << term3[i].value << ','
       << term3[i].se << ',' << f[i].value << ',' << f[i].se << '\n';
  return os.str();
}

std::vector<ResidualRow> subharmonic_residual(
    const std::function<double(double)>& f, double f_lo, double f_hi,
    const SpineLaw& spine, const std::function<double(double)>& g,
    const std::vector<double>& x_grid, std::size_t draws, std::uint64_t seed) {
  if (spine.var <= 0.0 && !is_lattice(spine))
    throw std::invalid_argument("subharmonic_residual: spine variance unknown");
  // Reach of one step: exact for the lattice, a 5-sigma quantile bound
  // otherwise; the grid is rejected if f cannot cover it.
  const double reach = is_lattice(spine) ? 1.0 : 5.0 * std::sqrt(spine.var);
  std::vector<ResidualRow> rows;
  rows.reserve(x_grid.size());
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    const double x = x_grid[i];
    if (x - reach < f_lo || x + reach > f_hi)
      throw std::invalid_argument(
          "subharmonic_residual: f coverage insufficient for the step reach");
    ResidualRow row;
    row.x = x;
    if (is_lattice(spine)) {
      const double expect = 0.5 * (f(x + 1.0) + f(x - 1.0));
      row.residual = {f(x) - (expect - g(x)), 0.0};
    } else {
      if (!spine.has_sampler())
        throw std::invalid_argument(
            "subharmonic_residual: spine lacks a sampler");
      Stream stream(seed, i, 8);
      MeanVar acc;
      for (std::size_t r = 0; r < draws; ++r) acc.add(f(x + spine.sample(stream)));
      row.residual = {f(x) - (acc.mean - g(x)), acc.se()};
    }
    rows.push_back(row);
  }
  return rows;
}

std::string residual_csv(const std::vector<ResidualRow>& rows) {
  std::ostringstream os;
  os << "x,residual,se\n";
  for (const auto& r : rows)
    os << r.x << ',' << r.residual.value << ',' << r.residual.se << '\n';
  return os.str();
}

}  // namespace brw
