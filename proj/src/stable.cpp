#include "brw/stable.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "brw/rng.hpp"
#include "brw/sim.hpp"
#include "brw/tail.hpp"

namespace brw {

namespace {

constexpr double kPi = std::numbers::pi;

void validate(const StableTriple& t) {
  if (!std::isfinite(t.a))
    throw std::invalid_argument("stable: location a must be finite");
  if (!(t.b > 0.0) || !std::isfinite(t.b))
    throw std::invalid_argument("stable: scale b must be > 0");
  if (!(std::abs(t.beta) <= 1.0))
    throw std::invalid_argument("stable: skewness must satisfy |beta| <= 1");
}

}  // namespace

std::complex<double> cf(const StableTriple& triple, double t) {
  validate(triple);
  if (t == 0.0) return {1.0, 0.0};
  const double abs_t = std::abs(t);
  // exponent i a t - b|t| (1 + i beta sgn(t) (2/pi) log|t|); the skew part
  // uses |t| sgn(t) = t, so the modulus is exactly exp(-b|t|).
  const double re = -triple.b * abs_t;
  const double im = triple.a * t -
                    triple.b * triple.beta * (2.0 / kPi) * t * std::log(abs_t);
  return std::polar(std::exp(re), im);
}

std::vector<double> sample(const StableTriple& triple, std::size_t n,
                           std::uint64_t seed) {
  validate(triple);
  if (n == 0) throw std::invalid_argument("stable: sample size must be > 0");
  const double b = triple.b;
  const double beta = triple.beta;
  // The uniform-exponential draw below has scale 1.  Multiplying a draw by
  // b turns log|t| into log|t| + log b inside the cf, which is a pure
  // location shift of -(2/pi) beta b log b; cancel it here so the output
  // matches cf(triple, .) exactly.
  const double shift = triple.a + (2.0 / kPi) * beta * b * std::log(b);
  const double half_pi = kPi / 2.0;
  std::vector<double> out(n);
  Stream stream(seed, 0, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = kPi * (stream.next_unit() - 0.5);
    const double w = stream.next_exponential();
    const double tilt = half_pi + beta * theta;
    const double x0 =
        (2.0 / kPi) *
        (tilt * std::tan(theta) -
         beta * std::log((half_pi * w * std::cos(theta)) / tilt));
    out[i] = b * x0 + shift;
  }
  return out;
}

namespace {

// Inversion integral after substituting t = e^u:
//   F(x) = 1/2 - (1/pi) * I,
//   I = Integral over u of exp(-b e^u) * sin((a-x) e^u - c u e^u) du
// with c = (2/pi) b beta.  The integrand vanishes double-exponentially as
// u -> +inf and linearly in e^u as u -> -inf, so a trapezoid rule on a
// finite window converges fast once the oscillation is resolved.
double gil_pelaez_integral(const StableTriple& triple, double x,
                           double& achieved_diff, int& halvings) {
  const double drift = triple.a - x;
  const double c = (2.0 / kPi) * triple.b * triple.beta;
  const double u_hi = std::log(38.0 / triple.b);
  const double u_lo = -50.0 - std::log1p(std::abs(drift) + triple.b);

  const auto f = [&](double u) {
    const double t = std::exp(u);
    return std::exp(-triple.b * t) * std::sin(drift * t - c * u * t);
  };

  // Peak oscillation frequency in u over the window bounds the step.
  const double freq = std::exp(u_hi) *
                      (std::abs(drift) + std::abs(c) * (std::abs(u_hi) + 1.0));
  double h = std::min(0.02, 2.0 * kPi / (12.0 * std::max(1.0, freq)));
  std::size_t m = static_cast<std::size_t>(std::ceil((u_hi - u_lo) / h));
  h = (u_hi - u_lo) / static_cast<double>(m);

  Neumaier acc;
  acc.add(0.5 * f(u_lo));
  acc.add(0.5 * f(u_hi));
  for (std::size_t i = 1; i < m; ++i)
    acc.add(f(u_lo + static_cast<double>(i) * h));
  double integral = acc.value() * h;

  achieved_diff = 0.0;
  for (halvings = 0; halvings < 10; ++halvings) {
    // Refine by adding midpoints; T(h/2) = T(h)/2 + (h/2) * sum of new nodes.
    Neumaier mid;
    for (std::size_t i = 0; i < m; ++i)
      mid.add(f(u_lo + (static_cast<double>(i) + 0.5) * h));
    const double refined = 0.5 * integral + 0.5 * h * mid.value();
    achieved_diff = std::abs(refined - integral);
    integral = refined;
    h *= 0.5;
    m *= 2;
    if (achieved_diff < 2.5e-5 && halvings >= 1) return integral;
  }
  return integral;  // caller checks achieved_diff
}

}  // namespace

double cdf(const StableTriple& triple, double x) {
  validate(triple);
  if (!std::isfinite(x)) throw std::invalid_argument("stable: cdf of non-finite x");
  double diff = 0.0;
  int halvings = 0;
  const double integral = gil_pelaez_integral(triple, x, diff, halvings);
  if (!(diff < 2.5e-5)) {
    std::ostringstream os;
    os << "stable cdf: quadrature did not converge at x=" << x << " (b="
       << triple.b << ", beta=" << triple.beta << ", last refinement delta="
       << diff << " after " << halvings << " halvings)";
    throw std::runtime_error(os.str());
  }
  return std::clamp(0.5 - integral / kPi, 0.0, 1.0);
}

namespace {

struct CfGrid {
  std::vector<double> t;                           // evaluation points
  std::vector<std::complex<double>> batch_sums;    // k * m, batch-major
  std::size_t batches = 0;
  std::size_t batch_len = 0;
};

struct TripleEstimate {
  double a, b, beta, misfit, t_max;
};

// Regression of the empirical cf: -log|phi| against t gives b; the
// unwrapped phase against (t, t log t) gives a and beta.
TripleEstimate fit_from_cf(const std::vector<double>& t,
                           const std::vector<std::complex<double>>& phi) {
  const std::size_t m = t.size();
  double stt = 0.0, sty = 0.0;
  std::vector<double> y(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double mod = std::abs(phi[j]);
    y[j] = -std::log(std::max(mod, 1e-12));
    stt += t[j] * t[j];
    sty += t[j] * y[j];
  }
  const double b = sty / stt;

  std::vector<double> psi(m);
  for (std::size_t j = 0; j < m; ++j) {
    double raw = std::arg(phi[j]);
    const double pred = j == 0   ? raw
                        : j == 1 ? psi[0]
                                 : 2.0 * psi[j - 1] - psi[j - 2];
    psi[j] = raw + 2.0 * kPi * std::round((pred - raw) / (2.0 * kPi));
  }
  // Normal equations for psi = A t + B t log t; A = a, B = -(2/pi) b beta.
  double s11 = 0.0, s12 = 0.0, s22 = 0.0, r1 = 0.0, r2 = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double u = t[j];
    const double v = t[j] * std::log(t[j]);
    s11 += u * u;
    s12 += u * v;
    s22 += v * v;
    r1 += u * psi[j];
    r2 += v * psi[j];
  }
  const double det = s11 * s22 - s12 * s12;
  const double A = (r1 * s22 - r2 * s12) / det;
  const double B = (r2 * s11 - r1 * s12) / det;

  TripleEstimate est;
  est.a = A;
  est.b = b;
  est.beta = -B * kPi / (2.0 * std::max(b, 1e-12));
  est.t_max = t.back();
  est.misfit = 0.0;
  for (std::size_t j = 0; j < m; ++j)
    est.misfit = std::max(est.misfit, std::abs(y[j] - b * t[j]));
  return est;
}

}  // namespace

FitResult fit(const std::vector<double>& samples, std::uint64_t seed) {
  const std::size_t n = samples.size();
  if (n < 10000)
    throw std::invalid_argument("stable fit: need at least 10^4 samples");
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const double iqr = percentile(sorted, 0.75) - percentile(sorted, 0.25);
  if (!(iqr > 0.0))
    throw std::invalid_argument("stable fit: degenerate sample (zero spread)");

  // t-grid where the cf is informative: b*t of order one.  IQR/2 is a
  // scale proxy exact for the symmetric case and within a constant
  // factor across |beta| <= 1.
  const std::size_t m = 12;
  const double t_max = 1.2 / (0.5 * iqr);
  CfGrid grid;
  grid.t.resize(m);
  for (std::size_t j = 0; j < m; ++j)
    grid.t[j] = t_max * static_cast<double>(j + 1) / static_cast<double>(m);

  grid.batches = 100;
  grid.batch_len = n / grid.batches;
  grid.batch_sums.assign(grid.batches * m, {0.0, 0.0});
  for (std::size_t k = 0; k < grid.batches; ++k) {
    for (std::size_t i = k * grid.batch_len; i < (k + 1) * grid.batch_len; ++i)
      for (std::size_t j = 0; j < m; ++j)
        grid.batch_sums[k * m + j] +=
            std::polar(1.0, grid.t[j] * samples[i]);
  }
  const double used = static_cast<double>(grid.batches * grid.batch_len);

  std::vector<std::complex<double>> phi(m);
  for (std::size_t k = 0; k < grid.batches; ++k)
    for (std::size_t j = 0; j < m; ++j) phi[j] += grid.batch_sums[k * m + j];
  for (auto& p : phi) p /= used;

  const TripleEstimate point = fit_from_cf(grid.t, phi);

  // Bootstrap over batch sums: batches are i.i.d. blocks, so resampling
  // them and re-running the whole regression gives parameter spreads.
  const std::size_t n_boot = 500;
  MeanVar ba, bb, bbeta;
  Stream stream(seed, 0, 10);
  std::vector<std::complex<double>> phi_star(m);
  for (std::size_t r = 0; r < n_boot; ++r) {
    std::fill(phi_star.begin(), phi_star.end(), std::complex<double>());
    for (std::size_t k = 0; k < grid.batches; ++k) {
      const std::size_t pick = static_cast<std::size_t>(
          stream.next_unit() * static_cast<double>(grid.batches));
      for (std::size_t j = 0; j < m; ++j)
        phi_star[j] += grid.batch_sums[pick * m + j];
    }
    for (auto& p : phi_star) p /= used;
    const TripleEstimate est = fit_from_cf(grid.t, phi_star);
    ba.add(est.a);
    bb.add(est.b);
    bbeta.add(est.beta);
  }

  // Normal-style intervals at +-3.5 bootstrap sd: deliberately wide
  // (~99.9% per parameter) so that recovering several triples jointly
  // is a stable contract rather than a 95%-coverage coin flip.
  const double z = 3.5;
  FitResult out;
  out.triple = {point.a, point.b, std::clamp(point.beta, -1.0, 1.0)};
  out.a_lo = point.a - z * ba.sd();
  out.a_hi = point.a + z * ba.sd();
  out.b_lo = point.b - z * bb.sd();
  out.b_hi = point.b + z * bb.sd();
  out.beta_lo = point.beta - z * bbeta.sd();
  out.beta_hi = point.beta + z * bbeta.sd();
  out.cf_misfit = point.misfit;
  // A stable law makes -log|CF| linear in t; curvature beyond sampling
  // noise (e.g. the t^2 of a Gaussian) flags the model as misspecified.
  const double tol = 0.04 * std::max(1.0, point.b * point.t_max) +
                     10.0 / std::sqrt(static_cast<double>(n));
  out.well_specified = point.misfit <= tol;
  return out;
}

double ks_against_cdf(const std::vector<double>& sorted,
                      const StableTriple& triple, std::size_t n_grid) {
  if (sorted.size() < 2 || n_grid < 2)
    throw std::invalid_argument("ks_against_cdf: need sample and grid");
  // Evaluate on sample quantiles covering [0.05%, 99.95%]: the empirical
  // process fluctuates by O(sqrt(gap/n)) between adjacent grid points, so
  // this lower-bounds the true sup distance by far less than 1e-4.
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t j = 0; j < n_grid; ++j) {
    const double q = 0.0005 + 0.999 * static_cast<double>(j) /
                                  static_cast<double>(n_grid - 1);
    const double x = percentile(sorted, q);
    const double fx = cdf(triple, x);
    const double lo = static_cast<double>(
        std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
    const double hi = static_cast<double>(
        std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
    d = std::max({d, std::abs(lo / n - fx), std::abs(hi / n - fx)});
  }
  return d;
}

namespace {

constexpr double kEulerGamma = 0.57721566490153286;
constexpr double kQNaN = std::numeric_limits<double>::quiet_NaN();

// Replica-parallel driver: items write to disjoint slots, so the thread
// count never changes the result.  Exceptions rethrow on the caller.
void replica_parallel(std::size_t n, std::size_t threads,
                      const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n == 0 ? 1 : n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

double sample_skewness(const std::vector<double>& v) {
  if (v.size() < 3) return kQNaN;
  Neumaier s1;
  for (double x : v) s1.add(x);
  const double n = static_cast<double>(v.size());
  const double mean = s1.value() / n;
  Neumaier s2, s3;
  for (double x : v) {
    const double d = x - mean;
    s2.add(d * d);
    s3.add(d * d * d);
  }
  const double m2 = s2.value() / n;
  if (!(m2 > 0.0)) return kQNaN;
  return (s3.value() / n) / std::pow(m2, 1.5);
}

// KS between a sorted sample and a sorted reference shifted by delta,
// by the standard two-pointer merge walk -- no copies, no quadrature.
double ks_sorted_shift(const std::vector<double>& s,
                       const std::vector<double>& ref, double delta) {
  const double n = static_cast<double>(s.size());
  const double m = static_cast<double>(ref.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < s.size() && j < ref.size()) {
    if (s[i] <= ref[j] + delta)
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n -
                             static_cast<double>(j) / m));
  }
  return std::max(d, 1.0 - std::min(static_cast<double>(i) / n,
                                    static_cast<double>(j) / m));
}

// Location-free KS: minimized over a shift of the reference by golden
// section on [-4b, 4b]; the shift-0 value is also probed so the result
// never exceeds the plug-in distance.
double ks_location_free(const std::vector<double>& sorted,
                        const std::vector<double>& ref, double scale) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = -4.0 * scale, b = 4.0 * scale;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = ks_sorted_shift(sorted, ref, x1);
  double f2 = ks_sorted_shift(sorted, ref, x2);
  for (int it = 0; it < 40; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = ks_sorted_shift(sorted, ref, x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = ks_sorted_shift(sorted, ref, x2);
    }
  }
  return std::min({f1, f2, ks_sorted_shift(sorted, ref, 0.0)});
}

}  // namespace

FluctuationReport fluctuation_experiment(const OffspringLaw& law,
                                         const std::vector<std::size_t>& n_list,
                                         const FluctuationConfig& cfg) {
  if (law.arithmetic_span != 0.0)
    throw std::invalid_argument(
        "fluctuation_experiment: the limit theorem needs nonarithmetic "
        "steps; lattice laws are rejected");
  if (!(law.sigma2 > 0.0))
    throw std::invalid_argument(
        "fluctuation_experiment: law must carry sigma2 > 0");
  if (cfg.replicas < 1000)
    throw std::invalid_argument("fluctuation_experiment: replicas >= 1e3");
  if (cfg.deep_factor < 4)
    throw std::invalid_argument("fluctuation_experiment: deep_factor >= 4");
  if (n_list.empty())
    throw std::invalid_argument("fluctuation_experiment: n_list is empty");
  for (std::size_t j = 0; j < n_list.size(); ++j) {
    if (n_list[j] < 2 || (j && n_list[j] <= n_list[j - 1]))
      throw std::invalid_argument(
          "fluctuation_experiment: n_list must be increasing, entries >= 2");
  }

  const std::size_t m = n_list.size();
  const std::size_t deep = cfg.deep_factor * n_list.back();
  std::vector<std::size_t> checkpoints(n_list);
  checkpoints.push_back(deep);

  Pruning pruning;
  pruning.barrier = cfg.barrier;

  // One trajectory per replica; (Z_n, W_n) recorded mid-flight and the
  // deep value, standing in for the a.s. limit, at the end.
  std::vector<double> W(cfg.replicas * m), Z(cfg.replicas * m);
  std::vector<double> z_deep(cfg.replicas);
  replica_parallel(cfg.replicas, cfg.threads, [&](std::size_t i) {
    const auto recs = evolve(law, checkpoints, pruning, cfg.seed, i);
    for (std::size_t j = 0; j < m; ++j) {
      W[i * m + j] = recs[j].w;
      Z[i * m + j] = recs[j].z;
    }
    z_deep[i] = recs[m].z;
  });

  FluctuationReport rep;
  rep.sigma2 = law.sigma2;
  rep.deep_n = deep;
  rep.location_scale = std::sqrt(2.0 / (kPi * law.sigma2));

  // Tail constant of the deep sample; an extinct or too-small sample has
  // no usable tail window, which leaves the target location undefined.
  if (std::isfinite(cfg.c_hat_override)) {
    rep.c_hat = cfg.c_hat_override;
  } else {
    try {
      rep.c_hat = estimate_c(z_deep, {}, 200, cfg.seed).c_hat;
    } catch (const std::invalid_argument&) {
      rep.c_hat = kQNaN;
    }
  }
  rep.target.a = (rep.c_hat + 1.0 - kEulerGamma) * rep.location_scale;
  rep.target.b = std::sqrt(kPi / (2.0 * law.sigma2));
  rep.target.beta = 1.0;

  // Direct quadrature of the target CDF at every quantile is too slow at
  // heavy-tailed abscissae (cost grows like |x|), so distances are taken
  // against a large sorted draw from the target -- the sampler is
  // cross-checked against the numeric inversion in its own tests, and
  // 2e6 draws put the reference error near 1e-3, well under the
  // distances being measured.
  std::vector<double> ref;
  if (std::isfinite(rep.target.a)) {
    ref = sample(rep.target, 2000000, cfg.seed);
    std::sort(ref.begin(), ref.end());
  }

  for (std::size_t j = 0; j < m; ++j) {
    FluctuationRow row;
    row.n = n_list[j];
    const double n = static_cast<double>(n_list[j]);
    const double comp = 0.5 * std::log(n);
    row.theta.reserve(cfg.replicas);
    for (std::size_t i = 0; i < cfg.replicas; ++i) {
      const double theta =
          std::sqrt(n) * (z_deep[i] - Z[i * m + j] + comp * W[i * m + j]);
      row.theta.push_back(theta);
      // Z_n > 0 stands in for survival: extinct trees have Z_n = 0, and
      // the normalized limit lives on the positive-Z event.
      if (Z[i * m + j] > 0.0) row.theta_norm.push_back(theta / Z[i * m + j]);
    }
    row.replicas = row.theta_norm.size();

    std::vector<double> sorted = row.theta_norm;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.size() >= 2 && !ref.empty()) {
      row.ks = ks_sorted_shift(sorted, ref, 0.0);
      row.ks_locfree = ks_location_free(sorted, ref, rep.target.b);
    } else {
      row.ks = kQNaN;
      row.ks_locfree = kQNaN;
    }
    row.skewness = sample_skewness(row.theta_norm);
    if (row.theta_norm.size() >= 10000) {
      row.fitted = fit(row.theta_norm).triple;
    } else {
      row.fitted = {kQNaN, kQNaN, kQNaN};
    }
    rep.rows.push_back(std::move(row));
  }

  // Depth sensitivity: rerun a slice of replicas twice as deep.  The
  // trajectory prefix is identical (same seed, same replica id), so the
  // shift isolates the truncation error of the deep proxy.
  const std::size_t sens = std::min(cfg.sensitivity_replicas, cfg.replicas);
  std::vector<double> shift(sens);
  replica_parallel(sens, cfg.threads, [&](std::size_t i) {
    const auto recs =
        evolve(law, {deep, 2 * deep}, pruning, cfg.seed, i);
    shift[i] = std::sqrt(static_cast<double>(n_list.back())) *
               std::abs(recs[1].z - recs[0].z);
  });
  Neumaier acc;
  for (double s : shift) acc.add(s);
  rep.deep_sensitivity = sens ? acc.value() / static_cast<double>(sens) : kQNaN;
  return rep;
}

std::string FluctuationReport::csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "n,ks,ks_locfree,a_fit,b_fit,beta_fit,replicas\n";
  for (const auto& row : rows)
    os << row.n << ',' << row.ks << ',' << row.ks_locfree << ','
       << row.fitted.a << ',' << row.fitted.b << ',' << row.fitted.beta << ','
       << row.replicas << '\n';
  return os.str();
}

}  // namespace brw
