#include "brw/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace brw {

double MeanVar::sd() const { return std::sqrt(var()); }

double MeanVar::se() const {
  return n > 0 ? std::sqrt(var() / static_cast<double>(n)) : 0.0;
}

Estimate mean_se(const std::vector<double>& xs) {
  MeanVar mv;
  for (double x : xs) mv.add(x);
  return {mv.mean, mv.se()};
}

double ks_one_sample(const std::vector<double>& sorted,
                     const std::function<double(double)>& cdf) {
  const std::size_t n = sorted.size();
  if (n == 0) throw std::invalid_argument("ks_one_sample: empty sample");
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(sorted[i]);
    const double lo = static_cast<double>(i) / static_cast<double>(n);
    const double hi = static_cast<double>(i + 1) / static_cast<double>(n);
    d = std::max(d, std::max(std::abs(f - lo), std::abs(hi - f)));
  }
  return d;
}

double ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("ks_two_sample: empty sample");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na -
                             static_cast<double>(j) / nb));
  }
  return d;
}

LinFit linfit(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw std::invalid_argument("linfit: bad input");
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("linfit: degenerate abscissae");
  LinFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - (f.intercept + f.slope * x[i]);
      ss += r * r;
    }
    const double s2 = ss / static_cast<double>(n - 2);
    f.se_slope = std::sqrt(s2 / sxx);
    f.se_intercept = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  }
  return f;
}

double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("percentile: empty");
  if (q <= 0) return sorted.front();
  if (q >= 1) return sorted.back();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

std::vector<double> block_means(const std::vector<double>& xs, std::size_t k) {
  if (k == 0 || xs.size() < k)
    throw std::invalid_argument("block_means: too few values");
  std::vector<double> out(k, 0.0);
  const std::size_t n = xs.size();
  std::vector<std::size_t> cnt(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = i * k / n;  // contiguous, near-equal blocks
    out[b] += xs[i];
    ++cnt[b];
  }
  for (std::size_t b = 0; b < k; ++b) out[b] /= static_cast<double>(cnt[b]);
  return out;
}

double block_se(const std::vector<double>& blocks) {
  MeanVar mv;
  for (double b : blocks) mv.add(b);
  return mv.se();
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

MonotoneInterp::MonotoneInterp(std::vector<double> xs, std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)) {
  const std::size_t n = xs_.size();
  if (n != ys_.size() || n < 2)
    throw std::invalid_argument("MonotoneInterp: need >= 2 nodes");
  for (std::size_t i = 1; i < n; ++i)
    if (!(xs_[i] > xs_[i - 1]))
      throw std::invalid_argument("MonotoneInterp: abscissae not increasing");
  d_.assign(n, 0.0);
  std::vector<double> h(n - 1), s(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = xs_[i + 1] - xs_[i];
    s[i] = (ys_[i + 1] - ys_[i]) / h[i];
  }
  d_[0] = s[0];
  d_[n - 1] = s[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (s[i - 1] * s[i] <= 0) {
      d_[i] = 0.0;
    } else {
      const double p = (s[i - 1] * h[i] + s[i] * h[i - 1]) / (h[i - 1] + h[i]);
      const double lim = 2.0 * std::min(std::abs(s[i - 1]), std::abs(s[i]));
      d_[i] = (std::abs(p) > lim) ? std::copysign(lim, p) : p;
    }
  }
}

double MonotoneInterp::operator()(double x) const {
  if (x <= xs_.front()) return ys_.front();
  if (x >= xs_.back()) return ys_.back();
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - xs_.begin()) - 1;
  const double h = xs_[i + 1] - xs_[i];
  const double t = (x - xs_[i]) / h;
  const double s = (ys_[i + 1] - ys_[i]) / h;
  // Cubic Hermite in local form; Steffen slopes keep it monotone.
  const double a = (d_[i] + d_[i + 1] - 2.0 * s) / (h * h);
  const double b = (3.0 * s - 2.0 * d_[i] - d_[i + 1]) / h;
  const double dx = x - xs_[i];
  (void)t;
  return ys_[i] + dx * (d_[i] + dx * (b + dx * a));
}

}  // namespace brw
