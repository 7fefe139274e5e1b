#include "brw/walk.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace brw {
namespace {

enum class LadderType { weak_desc, strict_asc, strict_desc };

// Simulates one ladder height of the given type from the origin.
// Returns false if the epoch exceeded its step cap (epoch abandoned).
bool one_ladder_height(const SpineLaw& spine, LadderType type, Stream& stream,
                       const LadderConfig& cfg, double& height,
                       std::size_t& steps) {
  double s = 0.0;
  for (std::size_t k = 1; k <= cfg.per_epoch_cap; ++k) {
    s += spine.sample(stream);
    ++steps;
    switch (type) {
      case LadderType::weak_desc:
        if (s <= 0.0) {
          height = -s;
          return true;
        }
        break;
      case LadderType::strict_asc:
        if (s > 0.0) {
          height = s;
          return true;
        }
        break;
      case LadderType::strict_desc:
        if (s < 0.0) {
          height = -s;
          return true;
        }
        break;
    }
  }
  return false;
}

struct LadderCollector {
  const SpineLaw& spine;
  const LadderConfig& cfg;
  std::size_t steps = 0;
  std::size_t abandoned = 0;
  bool exhausted = false;

  // Draws one height, retrying abandoned epochs within the budget.
  bool draw(LadderType type, Stream& stream, double& h) {
    while (steps < cfg.total_step_budget) {
      if (one_ladder_height(spine, type, stream, cfg, h, steps)) return true;
      ++abandoned;
    }
    exhausted = true;
    return false;
  }
};

bool is_lattice_pm1(const SpineLaw& spine) {
  return spine.kind == SpineLaw::Kind::lattice_pm1;
}

bool near_integer(double x) { return std::abs(x - std::round(x)) < 1e-9; }

}  // namespace

std::vector<double> walk_path(const SpineLaw& spine, double x0,
                              std::size_t horizon, Stream& stream) {
  if (!spine.has_sampler())
    throw std::invalid_argument("walk_path: spine lacks a direct sampler");
  if (horizon < 1) throw std::invalid_argument("walk_path: horizon >= 1");
  std::vector<double> path(horizon + 1);
  path[0] = x0;
  for (std::size_t k = 1; k <= horizon; ++k)
    path[k] = path[k - 1] + spine.sample(stream);
  return path;
}

LadderStats ladder_decompose(const SpineLaw& spine, std::size_t n_ladders,
                             std::uint64_t seed, const LadderConfig& cfg) {
  if (n_ladders < 1000)
    throw std::invalid_argument("ladder_decompose: n_ladders >= 1e3");
  if (!spine.has_sampler())
    throw std::invalid_argument("ladder_decompose: spine lacks a sampler");

  LadderStats st;
  LadderCollector col{spine, cfg};
  Stream stream(seed, 0, 1);
  const std::pair<LadderType, std::vector<double>*> jobs[] = {
      {LadderType::weak_desc, &st.weak_desc},
      {LadderType::strict_asc, &st.strict_asc},
      {LadderType::strict_desc, &st.strict_desc}};
  for (const auto& [type, dst] : jobs) {
    dst->reserve(n_ladders);
    double h;
    while (dst->size() < n_ladders && col.draw(type, stream, h))
      dst->push_back(h);
  }
  st.steps_used = col.steps;
  st.epochs_abandoned = col.abandoned;
  st.partial = col.exhausted;
  st.mu = mean_se(st.weak_desc);
  st.nu = mean_se(st.strict_asc);
  st.m = mean_se(st.strict_desc);
  return st;
}

double RenewalTable::eval_U(double x) const {
  if (x <= 0) return 0.0;
  if (mode == Mode::exact_lattice)
    return near_integer(x) ? 2.0 * std::round(x) : 2.0 * std::ceil(x);
  // strictly-below count; u_points sorted
  const auto it = std::lower_bound(u_points.begin(), u_points.end(), x);
  return u_weight * static_cast<double>(it - u_points.begin());
}

double RenewalTable::eval_V(double x) const {
  if (x < 0) return 0.0;
  if (mode == Mode::exact_lattice) return std::floor(x + 1e-9) + 1.0;
  const auto it = std::upper_bound(v_points.begin(), v_points.end(), x);
  return v_weight * static_cast<double>(it - v_points.begin());
}

double RenewalTable::eval_R(double x) const {
  if (x < 0) return 0.0;
  if (mode == Mode::exact_lattice) return std::floor(x + 1e-9) + 1.0;
  const auto it = std::upper_bound(r_points.begin(), r_points.end(), x);
  return r_weight * static_cast<double>(it - r_points.begin());
}

std::string RenewalTable::csv() const {
  std::ostringstream os;
  os << "x,U,V,R,mode\n";
  const char* m = mode == Mode::exact_lattice ? "exact_lattice" : "empirical";
  for (std::size_t i = 0; i < grid.size(); ++i)
    os << grid[i] << ',' << U[i] << ',' << V[i] << ',' << R[i] << ',' << m
       << '\n';
  return os.str();
}

RenewalTable renewal_tables(const SpineLaw& spine,
                            const std::vector<double>& grid,
                            std::size_t n_ladders, std::uint64_t seed,
                            RenewalTable::Mode mode, const LadderConfig& cfg) {
  if (grid.empty()) throw std::invalid_argument("renewal_tables: empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0)
      throw std::invalid_argument("renewal_tables: grid must be >= 0");
    if (i > 0 && grid[i] <= grid[i - 1])
      throw std::invalid_argument("renewal_tables: grid must increase");
  }
  RenewalTable tab;
  tab.mode = mode;
  tab.grid = grid;
  const double x_max = grid.back();

  if (mode == RenewalTable::Mode::exact_lattice) {
    if (!is_lattice_pm1(spine))
      throw std::invalid_argument(
          "renewal_tables: exact_lattice needs the +-1 lattice spine");
    tab.mu = 0.5;
    tab.nu = 1.0;
    tab.m = 1.0;
    for (double x : grid) {
      tab.U.push_back(tab.eval_U(x));
      tab.V.push_back(tab.eval_V(x));
      tab.R.push_back(tab.eval_R(x));
    }
    return tab;
  }

  if (!spine.has_sampler())
    throw std::invalid_argument("renewal_tables: spine lacks a sampler");

  // Empirical mode: replicate the ladder-height walk until the height
  // budget per measure is spent; each replica contributes its partial
  // sums <= x_max (k-sum truncates itself when the walk leaves [0,x_max]).
  LadderCollector col{spine, cfg};
  Stream stream(seed, 0, 2);
  MeanVar mu_acc, nu_acc, m_acc;

  auto collect = [&](LadderType type, std::vector<double>& points,
                     MeanVar& height_acc) -> double {
    std::size_t used = 0;
    std::size_t replicas = 0;
    double h;
    while (used < n_ladders && !col.exhausted) {
      ++replicas;
      double t = 0.0;
      points.push_back(0.0);  // k = 0 term
      while (t <= x_max) {
        if (!col.draw(type, stream, h)) break;
        ++used;
        height_acc.add(h);
        t += h;
        if (t <= x_max) points.push_back(t);
        else break;
      }
    }
    return static_cast<double>(replicas);
  };

  const double reps_u = collect(LadderType::weak_desc, tab.u_points, mu_acc);
  const double reps_v = collect(LadderType::strict_asc, tab.v_points, nu_acc);
  const double reps_r = collect(LadderType::strict_desc, tab.r_points, m_acc);
  if (col.exhausted)
    throw std::runtime_error("renewal_tables: step budget exhausted");
  tab.u_weight = 1.0 / reps_u;
  tab.v_weight = 1.0 / reps_v;
  tab.r_weight = 1.0 / reps_r;

  std::sort(tab.u_points.begin(), tab.u_points.end());
  std::sort(tab.v_points.begin(), tab.v_points.end());
  std::sort(tab.r_points.begin(), tab.r_points.end());

  tab.mu = mu_acc.mean;
  tab.nu = nu_acc.mean;
  tab.m = m_acc.mean;
  for (double x : grid) {
    tab.U.push_back(tab.eval_U(x));
    tab.V.push_back(tab.eval_V(x));
    tab.R.push_back(tab.eval_R(x));
  }
  return tab;
}

std::vector<PassageRecord> passage_times(const SpineLaw& spine, double x,
                                         double y, std::size_t replicas,
                                         std::uint64_t seed,
                                         std::size_t horizon) {
  if (x > 0 && y <= x) throw std::invalid_argument("passage_times: need y > x");
  std::vector<PassageRecord> out;
  out.reserve(replicas);
  for (std::size_t r = 0; r < replicas; ++r) {
    PassageRecord rec;
    if (x <= 0) {
      // tau = 0 under P_x for nonpositive starts; nothing to simulate.
      rec.tau = 0;
      rec.s_at_stop = x;
      out.push_back(rec);
      continue;
    }
    Stream stream(seed, r, 3);
    double s = x;
    bool stopped = false;
    for (std::size_t n = 1; n <= horizon; ++n) {
      s += spine.sample(stream);
      if (s > y) {
        rec.sigma = n;
        rec.sigma_first = true;
        rec.s_at_stop = s;
        rec.overshoot = s - y;
        stopped = true;
        break;
      }
      if (s <= 0.0) {
        rec.tau = n;
        rec.s_at_stop = s;
        stopped = true;
        break;
      }
    }
    rec.censored = !stopped;
    out.push_back(rec);
  }
  return out;
}

namespace {

// Expands the full tree to depth n, accumulating e^{-S(u)} t(path).
double tree_functional(const OffspringLaw& law, int n, const PathFunctional& t,
                       Stream& stream) {
  std::vector<std::vector<double>> broods(static_cast<std::size_t>(n));
  std::vector<double> path(static_cast<std::size_t>(n));
  double acc = 0.0;

  // Iterative depth-first expansion with explicit sibling indices.
  std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
  int depth = 0;
  law.sample(stream, broods[0]);
  while (true) {
    auto& brood = broods[static_cast<std::size_t>(depth)];
    if (idx[static_cast<std::size_t>(depth)] >= brood.size()) {
      if (depth == 0) break;
      --depth;
      ++idx[static_cast<std::size_t>(depth)];
      continue;
    }
    const double parent = depth == 0 ? 0.0 : path[static_cast<std::size_t>(depth - 1)];
    path[static_cast<std::size_t>(depth)] =
        parent + brood[idx[static_cast<std::size_t>(depth)]];
    if (depth == n - 1) {
      acc += std::exp(-path[static_cast<std::size_t>(depth)]) * t(path);
      ++idx[static_cast<std::size_t>(depth)];
    } else {
      ++depth;
      idx[static_cast<std::size_t>(depth)] = 0;
      law.sample(stream, broods[static_cast<std::size_t>(depth)]);
    }
  }
  return acc;
}

}  // namespace

ManyToOneReport many_to_one_check(const OffspringLaw& law, int n,
                                  const PathFunctional& t, std::size_t draws,
                                  std::uint64_t seed) {
  if (n < 1 || n > 3)
    throw std::invalid_argument("many_to_one_check: n must be in {1,2,3}");
  ManyToOneReport rep;
  rep.n = n;
  rep.draws = draws;

  MeanVar lhs;
  {
    Stream stream(seed, 0, 4);
    for (std::size_t k = 0; k < draws; ++k)
      lhs.add(tree_functional(law, n, t, stream));
  }
  MeanVar rhs;
  {
    const SpineLaw spine = spine_law(law);
    Stream stream(seed, 0, 5);
    std::vector<double> path(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < draws; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        s += spine.sample(stream);
        path[static_cast<std::size_t>(i)] = s;
      }
      rhs.add(t(path));
    }
  }
  rep.lhs = {lhs.mean, lhs.se()};
  rep.rhs = {rhs.mean, rhs.se()};
  rep.gap = lhs.mean - rhs.mean;
  rep.se = std::sqrt(lhs.se() * lhs.se() + rhs.se() * rhs.se());
  return rep;
}

}  // namespace brw
