#pragma once
#include <cstddef>
#include <functional>
#include <vector>

namespace brw {

//============================================================
// Small numeric/statistics toolkit shared by the experiment
// modules: compensated summation, moment accumulators,
// Kolmogorov-Smirnov distances, least squares, monotone
// interpolation.
//============================================================

// Neumaier compensated sum; order-fixed reductions over replicas use
// this so totals are bit-stable regardless of worker count.
struct Neumaier {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

// Welford accumulator for mean / variance / standard error.
struct MeanVar {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double var() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double sd() const;
  double se() const;
};

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

Estimate mean_se(const std::vector<double>& xs);

// sup_x |F_n(x) - F(x)| for a sorted sample against a CDF callable.
double ks_one_sample(const std::vector<double>& sorted,
                     const std::function<double(double)>& cdf);

// Two-sample KS distance; both inputs sorted.
double ks_two_sample(const std::vector<double>& a, const std::vector<double>& b);

struct LinFit {
  double slope = 0.0;
  double intercept = 0.0;
  double se_slope = 0.0;
  double se_intercept = 0.0;
};

LinFit linfit(const std::vector<double>& x, const std::vector<double>& y);

// Quantile of a sorted sample, linear interpolation between order stats.
double percentile(const std::vector<double>& sorted, double q);

// Partition values into k contiguous blocks and return block means;
// used for batch-means standard errors of replica-level statistics.
std::vector<double> block_means(const std::vector<double>& xs, std::size_t k);

// Standard error of the overall mean from block means.
double block_se(const std::vector<double>& blocks);

double normal_cdf(double z);

// Steffen's monotone cubic interpolant: C^1, no overshoot, preserves
// monotone data exactly.  Evaluation outside the grid clamps to the
// end values.
class MonotoneInterp {
 public:
  MonotoneInterp() = default;
  MonotoneInterp(std::vector<double> xs, std::vector<double> ys);
  double operator()(double x) const;
  bool empty() const { return xs_.empty(); }
  double x_front() const { return xs_.front(); }
  double x_back() const { return xs_.back(); }

 private:
  std::vector<double> xs_, ys_, d_;  // nodes, values, node slopes
};

}  // namespace brw
