#include "martlab/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace martlab {

namespace {
std::size_t min_explosion(const Path& a, const Path& b) {
    return std::min(a.explosion_index(), b.explosion_index());
}
}  // namespace

Path ito_integral(const Path& integrand, const Path& integrator) {
    require_same_grid(integrand, integrator, "ito_integral");
    std::size_t np = integrand.n_points();
    std::size_t ex = min_explosion(integrand, integrator);
    std::vector<double> out(np, 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < np && i + 1 < ex; ++i) {
        acc += integrand.value_unchecked(i) *
               (integrator.value_unchecked(i + 1) - integrator.value_unchecked(i));
        out[i + 1] = acc;
    }
    return Path(integrand.grid(), std::move(out), ex);
}

Path quadratic_variation(const Path& x) {
    std::size_t np = x.n_points();
    std::size_t ex = x.explosion_index();
    std::vector<double> out(np, 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < np && i + 1 < ex; ++i) {
        double d = x.value_unchecked(i + 1) - x.value_unchecked(i);
        acc += d * d;
        out[i + 1] = acc;
    }
    return Path(x.grid(), std::move(out), ex);
}

Path stochastic_exponential(const Path& m) {
    if (!m.exploded(0) && m.value_unchecked(0) != 0.0)
        throw std::invalid_argument("stochastic_exponential: m(0) must be 0");
    std::size_t np = m.n_points();
    std::size_t ex = m.explosion_index();
    std::vector<double> out(np, 0.0);
    double qv = 0.0;
    out[0] = 1.0;
    for (std::size_t i = 1; i < np && i < ex; ++i) {
        double d = m.value_unchecked(i) - m.value_unchecked(i - 1);
        qv += d * d;
        out[i] = std::exp(m.value_unchecked(i) - 0.5 * qv);
    }
    return Path(m.grid(), std::move(out), ex);
}

Path time_integral(const Path& f) {
    std::size_t np = f.n_points();
    std::size_t ex = f.explosion_index();
    const TimeGrid& g = *f.grid();
    std::vector<double> out(np, 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < np && i + 1 < ex; ++i) {
        acc += 0.5 * (f.value_unchecked(i) + f.value_unchecked(i + 1)) * g.dt(i);
        out[i + 1] = acc;
    }
    return Path(f.grid(), std::move(out), ex);
}

WealthResult wealth_process(double x0, const Strategy& strategy, const Path& price) {
    require_same_grid(strategy.holdings, price, "wealth_process");
    if (strategy.constrained) {
        for (std::size_t i = 0; i < strategy.holdings.n_points(); ++i) {
            if (strategy.holdings.exploded(i)) break;
            if (strategy.holdings.value_unchecked(i) < 0.0)
                throw std::invalid_argument(
                    "wealth_process: constrained strategy has negative holdings");
        }
    }
    WealthResult r;
    Path gains = ito_integral(strategy.holdings, price);
    std::vector<double> w(gains.n_points());
    double floor = x0 - strategy.admissibility_floor;
    for (std::size_t i = 0; i < gains.n_points(); ++i) {
        if (gains.exploded(i)) break;
        w[i] = x0 + gains.value_unchecked(i);
        if (w[i] < floor - 1e-12 && r.first_violation == kNever) {
            r.floor_respected = false;
            r.first_violation = i;
        }
    }
    r.wealth = Path(price.grid(), std::move(w), gains.explosion_index());
    return r;
}

Path constant_fraction_wealth(double x0, double fraction, const Path& price) {
    std::size_t np = price.n_points();
    std::size_t ex = price.explosion_index();
    std::vector<double> w(np, 0.0);
    w[0] = x0;
    for (std::size_t i = 1; i < np && i < ex; ++i) {
        double ret = price.value_unchecked(i) / price.value_unchecked(i - 1) - 1.0;
        w[i] = w[i - 1] * (1.0 + fraction * ret);
    }
    return Path(price.grid(), std::move(w), ex);
}

Strategy constant_fraction_strategy(double x0, double fraction, const Path& price) {
    Path wealth = constant_fraction_wealth(x0, fraction, price);
    std::size_t np = price.n_points();
    std::vector<double> h(np, 0.0);
    for (std::size_t i = 0; i < np && i < wealth.explosion_index(); ++i)
        h[i] = fraction * wealth.value_unchecked(i) / price.value_unchecked(i);
    Strategy s;
    s.holdings = Path(price.grid(), std::move(h), wealth.explosion_index());
    s.constrained = fraction >= 0.0;
    s.admissibility_floor = x0;
    return s;
}

}  // namespace martlab
