#include "martlab/processes.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "martlab/calculus.hpp"

namespace martlab {

double hitting_prob_p(double horizon) {
    if (!(horizon > 0.0))
        throw std::invalid_argument("hitting_prob_p: horizon must be positive");
    return 2.0 * normal_cdf(-1.0 / std::sqrt(horizon));
}

PropParams PropParams::make(double horizon, double beta, std::size_t n_steps) {
    PropParams p;
    p.horizon = horizon;
    p.beta = beta;
    p.threshold = 1.0 + 1.0 / hitting_prob_p(horizon);
    p.grid = make_grid(horizon, n_steps);
    p.validate();
    return p;
}

void PropParams::validate() const {
    if (!(beta > 1.0)) throw std::invalid_argument("PropParams: beta must be > 1");
    if (!(horizon > 0.0)) throw std::invalid_argument("PropParams: horizon must be > 0");
    if (!(threshold > 1.0))
        throw std::invalid_argument("PropParams: threshold must exceed 1");
    if (!grid) throw std::invalid_argument("PropParams: missing grid");
}

namespace {

Path x_squared_time_integral(const Path& x) {
    std::size_t np = x.n_points();
    std::vector<double> x2(np, 0.0);
    for (std::size_t i = 0; i < np && i < x.explosion_index(); ++i) {
        double v = x.value_unchecked(i);
        x2[i] = v * v;
    }
    return time_integral(Path(x.grid(), std::move(x2), x.explosion_index()));
}

}  // namespace

Path likelihood_ratio_L(const Path& x, double beta) {
    if (!(beta > 1.0))
        throw std::invalid_argument("likelihood_ratio_L: beta must be > 1");
    Path q = x_squared_time_integral(x);
    std::size_t np = x.n_points();
    std::vector<double> l(np, 0.0);
    double half_bb1 = 0.5 * beta * (beta - 1.0);
    for (std::size_t i = 0; i < np && i < x.explosion_index(); ++i)
        l[i] = std::pow(x.value_unchecked(i), beta - 1.0) *
               std::exp(-half_bb1 * q.value_unchecked(i));
    return Path(x.grid(), std::move(l), x.explosion_index());
}

Path likelihood_ratio_L_from_integral(const Path& x, const Path& x_dw,
                                      double beta) {
    if (!(beta > 1.0))
        throw std::invalid_argument("likelihood_ratio_L: beta must be > 1");
    require_same_grid(x, x_dw, "likelihood_ratio_L_from_integral");
    Path q = x_squared_time_integral(x);
    std::size_t np = x.n_points();
    std::vector<double> l(np, 0.0);
    for (std::size_t i = 0; i < np && i < x.explosion_index(); ++i)
        l[i] = std::exp(-(beta - 1.0) * x_dw.value_unchecked(i) -
                        0.5 * (beta * beta - 1.0) * q.value_unchecked(i));
    return Path(x.grid(), std::move(l), x.explosion_index());
}

std::size_t stopping_tau_index(const Path& l, double threshold) {
    if (!(threshold > 1.0))
        throw std::invalid_argument("stopping_tau: threshold must exceed 1");
    for (std::size_t i = 0; i < l.n_points() && i < l.explosion_index(); ++i)
        if (l.value_unchecked(i) >= threshold) return i;
    return kNever;
}

double stopping_tau(const Path& l, double threshold) {
    std::size_t i = stopping_tau_index(l, threshold);
    if (i == kNever) return std::numeric_limits<double>::infinity();
    return l.grid()->time(i);
}

namespace {

ScenarioRealization build_common(const PropParams& params, const RandomSource& src,
                                 uint64_t path_index) {
    params.validate();
    ScenarioRealization r;
    XPathPair xw = simulate_X(params.grid, src, path_index);
    r.x = std::move(xw.x);
    r.w = std::move(xw.w);
    r.l = likelihood_ratio_L(r.x, params.beta);
    r.tau_index = stopping_tau_index(r.l, params.threshold);
    r.tau = (r.tau_index == kNever) ? std::numeric_limits<double>::infinity()
                                    : params.grid->time(r.tau_index);
    return r;
}

}  // namespace

ScenarioRealization build_example_one(const PropParams& params,
                                      const RandomSource& src,
                                      uint64_t path_index) {
    ScenarioRealization r = build_common(params, src, path_index);
    const TimeGrid& g = *params.grid;
    std::size_t np = g.n_points();
    Path q = x_squared_time_integral(r.x);

    std::vector<double> z1(np), zb(np), s(np);
    double beta = params.beta;
    double half_bb1 = 0.5 * beta * (beta - 1.0);
    for (std::size_t i = 0; i < np; ++i) {
        std::size_t j = std::min(i, r.tau_index);  // stopped clock
        double xs = r.x.value_unchecked(j);
        double qs = q.value_unchecked(j);
        z1[i] = xs;                                            // Z^(1) = X_{t^tau}
        zb[i] = std::pow(xs, beta) * std::exp(-half_bb1 * qs); // Z^(beta)
        s[i] = 1.0 / z1[i];
    }
    r.q_at_tau = q.value_unchecked(std::min(r.tau_index, np - 1));
    r.z_primary = Path(params.grid, std::move(z1));
    r.z_secondary = Path(params.grid, std::move(zb));
    r.s = Path(params.grid, std::move(s));
    return r;
}

ScenarioRealization build_example_two(const PropParams& params,
                                      const RandomSource& src,
                                      uint64_t path_index) {
    ScenarioRealization r = build_common(params, src, path_index);
    const TimeGrid& g = *params.grid;
    std::size_t np = g.n_points();
    Path q = x_squared_time_integral(r.x);

    // Z     = E(-(X 1_(0,tau] + 1_(tau,T]) . W)
    //       = X_{t^tau} exp(-(W_t - W_{t^tau}) - (t - t^tau)/2)
    // Z^sup = same post-tau factor on top of Z^(beta).
    std::vector<double> z(np), zs(np), s(np);
    double beta = params.beta;
    double half_bb1 = 0.5 * beta * (beta - 1.0);
    for (std::size_t i = 0; i < np; ++i) {
        std::size_t j = std::min(i, r.tau_index);
        double xs = r.x.value_unchecked(j);
        double qs = q.value_unchecked(j);
        double post = 1.0;
        if (i > j) {
            double dw = r.w.value_unchecked(i) - r.w.value_unchecked(j);
            double dt = g.time(i) - g.time(j);
            post = std::exp(-dw - 0.5 * dt);
        }
        z[i] = xs * post;
        zs[i] = std::pow(xs, beta) * std::exp(-half_bb1 * qs) * post;
        s[i] = 1.0 / z[i];
    }
    r.q_at_tau = q.value_unchecked(std::min(r.tau_index, np - 1));
    r.z_primary = Path(params.grid, std::move(z));
    r.z_secondary = Path(params.grid, std::move(zs));
    r.s = Path(params.grid, std::move(s));
    return r;
}

}  // namespace martlab
