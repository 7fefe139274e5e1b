#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "brw/model.hpp"
#include "brw/sim.hpp"
#include "brw/stats.hpp"

using namespace brw;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Regression slope with a heteroscedasticity-robust (sandwich) standard
// error.  The plain homoscedastic plug-in SE underestimates wildly here:
// the increment variance grows with the regressor, and a handful of
// high-leverage replicas dominate the fit.
void robust_slope(const std::vector<double>& x, const std::vector<double>& y,
                  double* slope, double* se) {
  double xm = 0;
  for (double v : x) xm += v;
  xm /= static_cast<double>(x.size());
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - xm) * (x[i] - xm);
    sxy += (x[i] - xm) * y[i];
  }
  *slope = sxy / sxx;
  double s2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = y[i] - *slope * (x[i] - xm);
    s2 += (x[i] - xm) * (x[i] - xm) * r * r;
  }
  *se = std::sqrt(s2) / sxx;
}

double lattice_R(double x) { return std::floor(x) + 1.0; }

}  // namespace

TEST_CASE("evolve: root record, exact counts, input validation") {
  const auto bg = make_builtin_law(OffspringKind::binary_gaussian);
  const auto lat = make_builtin_law(OffspringKind::lattice_bernoulli);

  auto root = evolve(bg, {0}, Pruning::none(), 1, 0);
  REQUIRE(root.size() == 1);
  CHECK(root[0].n == 0);
  CHECK(root[0].w == 1.0);
  CHECK(root[0].z == 0.0);
  CHECK(root[0].min_pos == 0.0);
  CHECK(root[0].particle_count == 1);
  CHECK(root[0].pruned_mass_bound == 0.0);

  // binary law: exactly two children, so the unpruned population is 2^n
  // and nothing is ever pruned.
  auto recs = evolve_all(bg, 12, Pruning::none(), 3, 7);
  REQUIRE(recs.size() == 13);
  for (std::size_t g = 0; g < recs.size(); ++g) {
    CHECK(recs[g].n == g);
    CHECK(recs[g].particle_count == (std::size_t{1} << g));
    CHECK(recs[g].pruned_mass_bound == 0.0);
    CHECK(recs[g].w > 0.0);
    CHECK(std::isfinite(recs[g].z));
  }

  // lattice law walks on the integers.
  auto lrecs = evolve_all(lat, 8, Pruning::none(), 5, 2);
  for (const auto& r : lrecs) {
    CHECK(r.min_pos == std::round(r.min_pos));
    CHECK(std::abs(r.min_pos) <= static_cast<double>(r.n));
    CHECK(r.particle_count >= 1);
  }

  CHECK_THROWS_AS(evolve(bg, {}, Pruning::none(), 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(evolve(bg, {3, 3}, Pruning::none(), 1, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(evolve(bg, {4, 2}, Pruning::none(), 1, 0),
                  std::invalid_argument);
  Pruning zero_cap;
  zero_cap.particle_cap = 0;
  CHECK_THROWS_AS(evolve(bg, {1}, zero_cap, 1, 0), std::invalid_argument);

  // same (seed, replica) reproduces the trajectory bit for bit.
  auto again = evolve_all(bg, 12, Pruning::none(), 3, 7);
  for (std::size_t g = 0; g < recs.size(); ++g) {
    CHECK(recs[g].w == again[g].w);
    CHECK(recs[g].z == again[g].z);
    CHECK(recs[g].min_pos == again[g].min_pos);
  }
}

TEST_CASE("population cap aborts instead of silently truncating") {
  const auto bg = make_builtin_law(OffspringKind::binary_gaussian);
  Pruning tight = Pruning::none();
  tight.particle_cap = 100;
  CHECK_THROWS_WITH_AS(evolve(bg, {10}, tight, 1, 0),
                       doctest::Contains("cap"), std::runtime_error);
}

TEST_CASE("additive and derivative martingales have the exact means") {
  const auto bg = make_builtin_law(OffspringKind::binary_gaussian);

  // Unpruned: E W_n = 1 and E Z_n = 0 exactly.  Z_n is heavy-tailed
  // (plug-in SE at 1e5 replicas can sit 3.5 nominal SEs off in an
  // unlucky seed), so the sample size is chosen where the normal
  // approximation was verified to hold.
  MeanVar w1, z1, w5, z5;
  for (std::size_t r = 0; r < 100000; ++r) {
    auto recs = evolve(bg, {1, 5}, Pruning::none(), 31, r);
    w1.add(recs[0].w);
    z1.add(recs[0].z);
    w5.add(recs[1].w);
    z5.add(recs[1].z);
  }
  CHECK(std::abs(w1.mean - 1.0) <= 3 * w1.se());
  CHECK(std::abs(z1.mean) <= 3 * z1.se());
  CHECK(std::abs(w5.mean - 1.0) <= 3 * w5.se());
  CHECK(std::abs(z5.mean) <= 3 * z5.se());

  // With a barrier at 15 the leaked mass is below e^{-15} per crossing,
  // invisible at this precision, so the same means hold.
  Pruning p;
  p.barrier = 15.0;
  MeanVar w10, z10, bound10;
  for (std::size_t r = 0; r < 100000; ++r) {
    auto rec = evolve(bg, {10}, p, 43, r).back();
    w10.add(rec.w);
    z10.add(rec.z);
    bound10.add(rec.pruned_mass_bound);
  }
  CHECK(std::abs(w10.mean - 1.0) <= 3 * w10.se());
  CHECK(std::abs(z10.mean) <= 3 * z10.se());
  CHECK(bound10.mean > 0.0);
  CHECK(bound10.mean < 0.01);
}

TEST_CASE("martingale increments are conditionally centered") {
  // E[W_{n+1} - W_n | F_n] = 0, so the regression of the increment on
  // W_n has slope zero whatever the law of W_n.
  const auto lat = make_builtin_law(OffspringKind::lattice_bernoulli);
  for (std::uint64_t seed : {41ull, 59ull}) {
    std::vector<double> x, y;
    for (std::size_t r = 0; r < 100000; ++r) {
      auto recs = evolve(lat, {3, 4}, Pruning::none(), seed, r);
      x.push_back(recs[0].w);
      y.push_back(recs[1].w - recs[0].w);
    }
    double slope = 0, se = 0;
    robust_slope(x, y, &slope, &se);
    CHECK(std::abs(slope) <= 3 * se);
  }

  // For the Gaussian law even the sandwich SE is noisy (rare huge trees
  // carry most of the leverage), so test the equivalent orthogonality
  // statement E[(W_4 - W_3) W_3] = 0, whose SE is an honest iid one.
  const auto bg = make_builtin_law(OffspringKind::binary_gaussian);
  for (std::uint64_t seed : {47ull, 53ull}) {
    MeanVar q;
    for (std::size_t r = 0; r < 100000; ++r) {
      auto recs = evolve(bg, {3, 4}, Pruning::none(), seed, r);
      q.add((recs[1].w - recs[0].w) * recs[0].w);
    }
    CHECK(std::abs(q.mean) <= 3 * q.se());
  }
}

TEST_CASE("pruned mass bound covers the lost martingale mass") {
  // Unpruned means are exact (E W = 1, E Z = 0), so the mass a barrier
  // removes is measured against those rather than against a noisy
  // unpruned sample whose heavy tail would swamp the signal.
  const auto bg = make_builtin_law(OffspringKind::binary_gaussian);
  const std::size_t n = 12, reps = 5000;

  Pruning low;
  low.barrier = 3.0;
  MeanVar w_cut, z_cut, bound;
  for (std::size_t r = 0; r < reps; ++r) {
    auto cut = evolve(bg, {n}, low, 61, r).back();
    w_cut.add(cut.w);
    z_cut.add(cut.z);
    bound.add(cut.pruned_mass_bound);
  }

  // A barrier at 3 removes a macroscopic share of both martingales
  // (every lineage that pokes above 3 loses its subtree), and the
  // recorded bound sum_pruned e^{-S}(1+|S|) dominates each loss.
  double dw = 1.0 - w_cut.mean;
  CHECK(dw > 3 * w_cut.se());
  CHECK(dw < bound.mean + 3 * (w_cut.se() + bound.se()));

  double dz = 0.0 - z_cut.mean;
  CHECK(dz > -3 * z_cut.se());
  CHECK(dz < bound.mean + 3 * (z_cut.se() + bound.se()));

  // Raising the barrier recovers mass monotonically in the mean.
  Pruning mid;
  mid.barrier = 6.0;
  MeanVar w_mid;
  for (std::size_t r = 0; r < reps; ++r)
    w_mid.add(evolve(bg, {n}, mid, 61, r).back().w);
  double se_lm = std::sqrt(w_cut.se() * w_cut.se() + w_mid.se() * w_mid.se());
  CHECK(w_cut.mean < w_mid.mean + 3 * se_lm);
  CHECK(w_mid.mean < 1.0 + 3 * w_mid.se());
}

TEST_CASE("window pruning: minimum drifts like half a log, no extinction") {
  const auto bg = make_builtin_law(OffspringKind::binary_gaussian);
  Pruning win = Pruning::none();
  win.window = 10.0;

  // Medians of min_pos - (1/2) log n increase with n: the minimum sits
  // at (3/2) log n + O(1), so after removing (1/2) log n a growing
  // log n trend remains.
  std::vector<double> med;
  for (std::size_t n : {10, 20, 40}) {
    std::vector<double> v;
    for (std::size_t r = 0; r < 2000; ++r)
      v.push_back(evolve(bg, {n}, win, 13, r).back().min_pos -
                  0.5 * std::log(static_cast<double>(n)));
    std::sort(v.begin(), v.end());
    med.push_back(percentile(v, 0.5));
  }
  CHECK(med[1] > med[0] + 0.2);
  CHECK(med[2] > med[1] + 0.2);

  // The generation minimum survives its own cut, so a window run never
  // dies; an absolute barrier is subcritical and the population is gone
  // long before generation 512.
  auto deep = evolve(bg, {256}, win, 13, 0).back();
  CHECK(deep.particle_count >= 1);
  CHECK(std::isfinite(deep.min_pos));

  Pruning abs15;
  abs15.barrier = 15.0;
  for (std::uint64_t r = 0; r < 3; ++r) {
    auto rec = evolve(bg, {512}, abs15, 13, r).back();
    CHECK(rec.particle_count == 0);
    CHECK(rec.w == 0.0);
    CHECK(rec.z == 0.0);
    CHECK(rec.min_pos == kInf);
  }
}

TEST_CASE("sqrt(n) W_n tracks its conditional limit through Z_n") {
  // On the surviving tree, sqrt(n) W_n / Z_n -> sqrt(2/(pi sigma^2)) in
  // probability, so the per-replica ratio has median near 1.  (The
  // *mean* of sqrt(n) W_n is sqrt(n) -- W_n is heavy-tailed with
  // E W_n = 1 -- so only the pathwise form is testable.)
  const auto bg = make_builtin_law(OffspringKind::binary_gaussian);
  const double cst = std::sqrt(2.0 / (3.14159265358979323846 * bg.sigma2));

  auto median_ratio = [&](std::size_t n, double barrier, std::size_t reps) {
    Pruning p;
    p.barrier = barrier;
    p.particle_cap = 40'000'000;
    std::vector<double> ratio;
    for (std::size_t r = 0; r < reps; ++r) {
      auto rec = evolve(bg, {n}, p, 19, r).back();
      if (rec.z > 0.0)
        ratio.push_back(std::sqrt(static_cast<double>(n)) * rec.w /
                        (cst * rec.z));
    }
    REQUIRE(ratio.size() > reps * 9 / 10);
    std::sort(ratio.begin(), ratio.end());
    return percentile(ratio, 0.5);
  };

  CHECK(median_ratio(32, 17.0, 300) == doctest::Approx(1.0).epsilon(0.15));
  CHECK(median_ratio(48, 18.0, 150) == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("estimate_Z: persistence round trip, resume, thread determinism") {
  const auto lat = make_builtin_law(OffspringKind::lattice_bernoulli);
  Pruning p;
  p.barrier = 15.0;

  auto full = estimate_Z(lat, 8, 500, p, 101, {}, 1);
  REQUIRE(full.replicas.size() == 500);
  CHECK(full.law == "lattice_bernoulli");
  CHECK(full.n_stop == 8);

  // byte-identical output regardless of worker count.
  auto threaded = estimate_Z(lat, 8, 500, p, 101, {}, 4);
  CHECK(full.jsonl() == threaded.jsonl());
  CHECK(full.metadata_json() == threaded.metadata_json());

  // resume path: skipping already-present ids reproduces the rest bit
  // for bit.
  std::vector<std::size_t> skip;
  for (std::size_t i = 0; i < 300; ++i) skip.push_back(i);
  auto rest = estimate_Z(lat, 8, 500, p, 101, skip, 2);
  REQUIRE(rest.replicas.size() == 200);
  for (std::size_t i = 0; i < 200; ++i) {
    const auto& a = rest.replicas[i];
    const auto& b = full.replicas[300 + i];
    CHECK(a.replica_id == b.replica_id);
    CHECK(a.z_hat == b.z_hat);
    CHECK(a.w_n == b.w_n);
  }

  // JSONL lines parse back to the exact doubles that were written.
  std::string lines = full.jsonl();
  std::size_t pos = 0, idx = 0;
  while (pos < lines.size()) {
    std::size_t e = lines.find('\n', pos);
    REQUIRE(e != std::string::npos);
    auto rec = EmpiricalSample::parse_line(lines.substr(pos, e - pos));
    const auto& ref = full.replicas[idx];
    CHECK(rec.replica_id == ref.replica_id);
    CHECK(rec.seed == ref.seed);
    CHECK(rec.n_stop == ref.n_stop);
    CHECK(rec.z_hat == ref.z_hat);
    CHECK(rec.w_n == ref.w_n);
    CHECK(rec.z_n == ref.z_n);
    CHECK(rec.min_pos == ref.min_pos);
    CHECK(rec.pruned_mass_bound == ref.pruned_mass_bound);
    pos = e + 1;
    ++idx;
  }
  CHECK(idx == 500);

  CHECK(full.metadata_json().find("\"code_version\"") != std::string::npos);
  CHECK(full.metadata_json().find(kCodeVersion) != std::string::npos);

  // replicas = 0 is a valid empty sample.
  auto empty = estimate_Z(lat, 8, 0, p, 101, {}, 1);
  CHECK(empty.replicas.empty());
  CHECK(empty.jsonl().empty());

  CHECK_THROWS_AS(EmpiricalSample::parse_line("not json"), std::exception);
}

TEST_CASE("extinct replica persists min_pos as null and parses back") {
  const auto bg = make_builtin_law(OffspringKind::binary_gaussian);
  Pruning killall;
  killall.barrier = -5.0;  // children at ~N(1.39, 1.39) essentially never pass
  auto s = estimate_Z(bg, 3, 1, killall, 7, {}, 1);
  REQUIRE(s.replicas.size() == 1);
  REQUIRE(s.replicas[0].min_pos == kInf);
  CHECK(s.jsonl().find("\"min_pos\":null") != std::string::npos);
  auto back = EmpiricalSample::parse_line(s.jsonl().substr(0, s.jsonl().find('\n')));
  CHECK(back.min_pos == kInf);
  CHECK(back.z_hat == 0.0);
}

TEST_CASE("killed-walk truncated martingale keeps its exact mean") {
  const auto lat = make_builtin_law(OffspringKind::lattice_bernoulli);

  // D_0 = R(alpha) holds pathwise: one particle at the origin.
  auto one = truncated_trajectory(lat, 2.0, 0, lattice_R, Pruning::none(), 1, 0);
  REQUIRE(one.size() == 1);
  CHECK(one[0].d == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(one[0].alive);

  // E D_n = R(alpha) at every horizon: R is harmonic for the walk
  // killed below -alpha.
  MeanVar d1, d5;
  std::size_t flipped = 0;
  for (std::size_t r = 0; r < 30000; ++r) {
    auto recs =
        truncated_trajectory(lat, 2.0, 5, lattice_R, Pruning::none(), 9, r);
    REQUIRE(recs.size() == 6);
    d1.add(recs[1].d);
    d5.add(recs[5].d);
    // alive is sticky: once a kill happened it stays reported.
    bool seen_dead = false;
    for (const auto& t : recs) {
      if (seen_dead) CHECK(!t.alive);
      if (!t.alive) seen_dead = true;
    }
    if (seen_dead) ++flipped;
  }
  CHECK(std::abs(d1.mean - 3.0) <= 3 * d1.se());
  CHECK(std::abs(d5.mean - 3.0) <= 3 * d5.se());
  CHECK(flipped > 0);

  CHECK_THROWS_AS(
      truncated_trajectory(lat, -1.0, 3, lattice_R, Pruning::none(), 1, 0),
      std::invalid_argument);
  CHECK_THROWS_AS(truncated_trajectory(lat, 2.0, 3, nullptr, Pruning::none(),
                                       1, 0),
                  std::invalid_argument);
}

TEST_CASE("smoothing-transform fixpoint holds up to the finite-n gap") {
  const auto bg = make_builtin_law(OffspringKind::binary_gaussian);
  Pruning p;
  p.barrier = 15.0;

  // Zhat = Z_{n_stop} only approximates the limit: reattaching fresh
  // copies below a depth-k front misses a term of size O(W_n) ~
  // n^{-1/2}, so the two-sample KS sits near 0.1 at these horizons and
  // shrinks as n_stop grows.
  auto r10 = fixpoint_check(bg, 1, 10, 10000, p, 11, 1);
  auto r14 = fixpoint_check(bg, 1, 14, 10000, p, 11, 1);
  CHECK(r10.ks <= 0.125);
  CHECK(r14.ks <= 0.105);
  CHECK(r14.ks < r10.ks - 0.005);

  CHECK_THROWS_AS(fixpoint_check(bg, 0, 10, 10000, p, 11, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(fixpoint_check(bg, 1, 10, 500, p, 11, 1),
                  std::invalid_argument);

  // one child displaced by zero: boundary-normalized but E N = 1, so no
  // nondegenerate fixpoint exists and the check refuses to run.
  auto point = make_custom_law(
      [](Stream&, std::vector<double>& out) { out.assign(1, 0.0); }, 1.0,
      "point_mass");
  CHECK_THROWS_AS(fixpoint_check(point, 1, 10, 10000, p, 11, 1),
                  std::invalid_argument);
}
