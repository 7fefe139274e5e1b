#pragma once
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "brw/model.hpp"
#include "brw/rng.hpp"
#include "brw/stats.hpp"

namespace brw {

//============================================================
// The spine walk S: path sampling, ladder-epoch decomposition,
// first-passage functionals, and the renewal functions
//   U(x) = sum_k P{-S_{tau_k} < x}   (weak descending, left-continuous)
//   V(x) = sum_k P{S_{sigma_k} <= x} (strict ascending, right-continuous)
//   R(x) = sum_n P{-S_{tau*_n} <= x} (strict descending)
// with an exact oracle for the +-1 lattice walk.
//============================================================

struct LadderConfig {
  std::size_t per_epoch_cap = 1u << 20;   // abandon one epoch beyond this
  std::size_t total_step_budget = 100000000;  // partial stats beyond this
};

struct LadderStats {
  std::vector<double> weak_desc;    // heights -S_{tau_1} >= 0
  std::vector<double> strict_asc;   // heights S_{sigma_1} > 0
  std::vector<double> strict_desc;  // heights -S_{tau*_1} > 0
  Estimate mu;  // -E S_{tau_1}
  Estimate nu;  // E S_{sigma_1}
  Estimate m;   // -E S_{tau*_1}
  std::size_t steps_used = 0;
  std::size_t epochs_abandoned = 0;
  bool partial = false;  // total step budget exhausted before n_ladders
};

struct RenewalTable {
  enum class Mode { empirical, exact_lattice };
  Mode mode = Mode::empirical;
  std::vector<double> grid;
  std::vector<double> U, V, R;
  double mu = 0, nu = 0, m = 0;

  // Ladder-point samples backing the empirical Lebesgue-Stieltjes
  // measures dU, dV, dR; each stored point of a measure carries the
  // measure's weight (1 / replicas used for it).  Exact mode leaves
  // these empty; integrands use the closed-form atoms instead
  // (dU: mass 2 at each integer >= 0, dV: mass 1 at each integer >= 0).
  std::vector<double> u_points, v_points, r_points;
  double u_weight = 0.0, v_weight = 0.0, r_weight = 0.0;

  double eval_U(double x) const;
  double eval_V(double x) const;
  double eval_R(double x) const;
  std::string csv() const;  // columns x, U, V, R, mode
};

struct PassageRecord {
  std::uint64_t tau = 0;      // first n with S_n <= 0 (0 if censored-na)
  std::uint64_t sigma = 0;    // first n with S_n > y
  bool sigma_first = false;   // sigma(y) < tau
  double s_at_stop = 0.0;     // S at min(tau, sigma)
  double overshoot = 0.0;     // S_sigma - y when sigma_first
  bool censored = false;      // per-path horizon exceeded
};

// One path of S under P_{x0}: S_0 = x0 plus `horizon` iid steps.
std::vector<double> walk_path(const SpineLaw& spine, double x0,
                              std::size_t horizon, Stream& stream);

LadderStats ladder_decompose(const SpineLaw& spine, std::size_t n_ladders,
                             std::uint64_t seed, const LadderConfig& cfg = {});

// n_ladders is the height-sample budget per renewal measure.
RenewalTable renewal_tables(const SpineLaw& spine,
                            const std::vector<double>& grid,
                            std::size_t n_ladders, std::uint64_t seed,
                            RenewalTable::Mode mode,
                            const LadderConfig& cfg = {});

std::vector<PassageRecord> passage_times(const SpineLaw& spine, double x,
                                         double y, std::size_t replicas,
                                         std::uint64_t seed,
                                         std::size_t horizon = 100000000);

using PathFunctional = std::function<double(const std::vector<double>&)>;

struct ManyToOneReport {
  Estimate lhs;  // E sum_{|u|=n} e^{-S(u)} t(S(u_1),...,S(u))
  Estimate rhs;  // E t(S_1,...,S_n) under the spine walk
  double gap = 0.0;
  double se = 0.0;  // combined SE of the gap
  int n = 0;
  std::size_t draws = 0;
};

ManyToOneReport many_to_one_check(const OffspringLaw& law, int n,
                                  const PathFunctional& t, std::size_t draws,
                                  std::uint64_t seed);

}  // namespace brw
