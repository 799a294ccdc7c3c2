#include "martlab/stats.hpp"

#include <boost/math/distributions/beta.hpp>

#include <cmath>
#include <stdexcept>

#include "martlab/rng.hpp"

namespace martlab {

Interval McEstimate::ci(double level) const {
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("ci: level must be in (0,1)");
    double z = inverse_normal_cdf(0.5 + level / 2.0);
    return Interval{mean - z * stderr_, mean + z * stderr_};
}

void Accumulator::add(double x) {
    ++n_;
    double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
}

void Accumulator::merge(const Accumulator& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
        *this = other;
        return;
    }
    double na = static_cast<double>(n_);
    double nb = static_cast<double>(other.n_);
    double delta = other.mean_ - mean_;
    double nt = na + nb;
    mean_ += delta * nb / nt;
    m2_ += other.m2_ + delta * delta * na * nb / nt;
    n_ += other.n_;
}

double Accumulator::sample_variance() const {
    if (n_ < 2) throw std::logic_error("sample_variance needs n >= 2");
    return m2_ / static_cast<double>(n_ - 1);
}

double Accumulator::sample_stddev() const { return std::sqrt(sample_variance()); }

McEstimate Accumulator::estimate() const {
    McEstimate e;
    e.n = n_;
    e.mean = mean_;
    if (n_ >= 2) {
        e.stderr_ = sample_stddev() / std::sqrt(static_cast<double>(n_));
        e.stderr_defined = true;
    }
    return e;
}

McEstimate accumulate(std::span<const double> values) {
    Accumulator acc;
    for (double v : values) acc.add(v);
    return acc.estimate();
}

BinomialEstimate binomial_exact(std::size_t successes, std::size_t trials,
                                double level) {
    if (trials == 0) throw std::invalid_argument("binomial_exact: trials == 0");
    if (successes > trials)
        throw std::invalid_argument("binomial_exact: successes > trials");
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("binomial_exact: level must be in (0,1)");

    BinomialEstimate out;
    out.successes = successes;
    out.trials = trials;
    double n = static_cast<double>(trials);
    double k = static_cast<double>(successes);
    out.point = k / n;

    double alpha = 1.0 - level;
    if (successes == 0) {
        out.interval.lo = 0.0;
        out.interval.hi = 1.0 - std::pow(alpha, 1.0 / n);  // one-sided bound
        return out;
    }
    if (successes == trials) {
        out.interval.lo = std::pow(alpha, 1.0 / n);
        out.interval.hi = 1.0;
        return out;
    }
    boost::math::beta_distribution<double> lower(k, n - k + 1.0);
    boost::math::beta_distribution<double> upper(k + 1.0, n - k);
    out.interval.lo = boost::math::quantile(lower, alpha / 2.0);
    out.interval.hi = boost::math::quantile(upper, 1.0 - alpha / 2.0);
    return out;
}

TestResult one_sided_test(const McEstimate& est, double null_value,
                          TailDirection direction, double significance) {
    if (!(significance > 0.0 && significance < 1.0))
        throw std::invalid_argument("one_sided_test: bad significance");
    TestResult r;
    if (!est.stderr_defined || est.stderr_ == 0.0) {
        if (est.mean == null_value) {
            r.verdict = TestVerdict::Inconclusive;
            return r;
        }
        // Degenerate sample away from the null: direction decides.
        r.z = (est.mean > null_value) ? HUGE_VAL : -HUGE_VAL;
        bool hit = (direction == TailDirection::Above) ? est.mean > null_value
                                                       : est.mean < null_value;
        r.verdict = hit ? TestVerdict::Reject : TestVerdict::FailToReject;
        return r;
    }
    r.z = (est.mean - null_value) / est.stderr_;
    double zcrit = inverse_normal_cdf(1.0 - significance);
    bool reject = (direction == TailDirection::Above) ? r.z > zcrit : r.z < -zcrit;
    r.verdict = reject ? TestVerdict::Reject : TestVerdict::FailToReject;
    return r;
}

JarqueBera jarque_bera(std::span<const double> values) {
    std::size_t n = values.size();
    if (n < 8) throw std::invalid_argument("jarque_bera: sample too small");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : values) {
        double d = v - mean;
        double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    double dn = static_cast<double>(n);
    m2 /= dn;
    m3 /= dn;
    m4 /= dn;
    JarqueBera jb;
    jb.n = n;
    jb.skewness = m3 / std::pow(m2, 1.5);
    jb.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    jb.statistic = dn / 6.0 *
                   (jb.skewness * jb.skewness +
                    0.25 * jb.excess_kurtosis * jb.excess_kurtosis);
    return jb;
}

double chi2_2_quantile(double level) {
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("chi2_2_quantile: level must be in (0,1)");
    return -2.0 * std::log1p(-level);  // chi^2 with 2 dof is Exp(1/2)
}

}  // namespace martlab
