#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace martlab {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double x) const { return lo <= x && x <= hi; }
    double half_width() const { return 0.5 * (hi - lo); }
};

// Monte Carlo point estimate with normal-theory confidence intervals.
struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
    bool stderr_defined = false;

    Interval ci(double level) const;  // symmetric normal interval
};

// Mergeable mean/variance accumulator (Chan et al. pairwise update).
// merge(a, b) equals the accumulator of the concatenated sample, which is
// what makes per-worker accumulation order-insensitive.
class Accumulator {
  public:
    void add(double x);
    void merge(const Accumulator& other);

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double sample_variance() const;  // unbiased, needs n >= 2
    double sample_stddev() const;
    McEstimate estimate() const;

  private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

McEstimate accumulate(std::span<const double> values);

// Exact (Clopper-Pearson) binomial interval. The zero-success (or
// zero-failure) case degenerates to a one-sided bound at the full level.
struct BinomialEstimate {
    std::size_t successes = 0;
    std::size_t trials = 0;
    double point = 0.0;
    Interval interval;
};

BinomialEstimate binomial_exact(std::size_t successes, std::size_t trials,
                                double level);

enum class TestVerdict { Reject, FailToReject, Inconclusive };

struct TestResult {
    TestVerdict verdict = TestVerdict::Inconclusive;
    double z = 0.0;
};

enum class TailDirection { Below, Above };

// One-sided z-test of H0: mean == null_value against mean < null_value
// (Below) or mean > null_value (Above).
TestResult one_sided_test(const McEstimate& est, double null_value,
                          TailDirection direction, double significance);

// Jarque-Bera normality statistic (asymptotic chi^2 with 2 dof) for the
// Gaussian-increment checks on recovered SDE drivers.
struct JarqueBera {
    double statistic = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    std::size_t n = 0;
};

JarqueBera jarque_bera(std::span<const double> values);

// chi^2(2) upper quantile, used with JarqueBera at the configured level.
double chi2_2_quantile(double level);

}  // namespace martlab
