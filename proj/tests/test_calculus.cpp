#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "martlab/calculus.hpp"
#include "martlab/sde.hpp"
#include "martlab/stats.hpp"

using namespace martlab;

TEST_CASE("make_grid examples") {
    GridPtr g = make_grid(1.0, 4);
    std::vector<double> expect{0.0, 0.25, 0.5, 0.75, 1.0};
    REQUIRE(g->n_points() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(g->time(i) == expect[i]);

    GridPtr g2 = make_grid(1.0, 1);
    CHECK(g2->n_points() == 2);
    CHECK(g2->time(1) == 1.0);

    GridPtr g3 = make_grid(4.0, 8);
    CHECK(g3->time(8) == 4.0);  // endpoint exact, no floating drift

    CHECK_THROWS_AS(make_grid(0.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(-1.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(1.0, 0), std::invalid_argument);
}

TEST_CASE("ito_integral basics") {
    GridPtr g = make_grid(1.0, 64);
    RandomSource src(3);
    Path s = sample_brownian(g, src, 0);

    Path zero = Path::constant(g, 0.0);
    Path z = ito_integral(zero, s);
    for (std::size_t i = 0; i < z.n_points(); ++i) CHECK(z[i] == 0.0);

    Path one = Path::constant(g, 1.0);
    Path bh = ito_integral(one, s);  // buy-and-hold identity
    for (std::size_t i = 0; i < bh.n_points(); ++i)
        CHECK(bh[i] == doctest::Approx(s[i] - s[0]).epsilon(1e-12));

    GridPtr other = make_grid(1.0, 32);
    Path mismatched = Path::constant(other, 1.0);
    CHECK_THROWS_AS((void)ito_integral(mismatched, s), std::invalid_argument);
}

TEST_CASE("ito formula oracle: int W dW = (W^2 - t)/2") {
    GridPtr g = make_grid(1.0, 4096);
    RandomSource src(17);
    Accumulator resid;
    for (uint64_t p = 0; p < 200; ++p) {
        Path w = sample_brownian(g, src, p);
        Path i = ito_integral(w, w);
        std::size_t last = g->n_steps();
        double expect = 0.5 * (w[last] * w[last] - g->horizon());
        resid.add(i[last] - expect);
    }
    // ensemble mean error is O(sqrt(dt))
    CHECK(std::abs(resid.mean()) < 0.05);
}

TEST_CASE("quadratic_variation") {
    GridPtr g = make_grid(1.0, 4096);
    Path c = Path::constant(g, 3.0);
    Path qc = quadratic_variation(c);
    CHECK(qc.back() == 0.0);

    RandomSource src(23);
    Accumulator qv_t;
    for (uint64_t p = 0; p < 2000; ++p) {
        Path w = sample_brownian(g, src, p);
        qv_t.add(quadratic_variation(w).back());
        if (p == 0) {
            // bilinearity: QV(2W) = 4 QV(W) exactly
            std::vector<double> v2 = w.values();
            for (auto& x : v2) x *= 2.0;
            Path w2(g, std::move(v2));
            Path q1 = quadratic_variation(w);
            Path q2 = quadratic_variation(w2);
            for (std::size_t i = 0; i < q1.n_points(); ++i)
                CHECK(q2[i] == doctest::Approx(4.0 * q1[i]).epsilon(1e-12));
        }
    }
    CHECK(qv_t.mean() == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("stochastic_exponential") {
    GridPtr g = make_grid(1.0, 512);
    Path zero = Path::constant(g, 0.0);
    Path e0 = stochastic_exponential(zero);
    for (std::size_t i = 0; i < e0.n_points(); ++i) CHECK(e0[i] == 1.0);

    // constant theta -> true martingale: ensemble mean at T near 1
    RandomSource src(29);
    const double theta = 1.0;
    Accumulator at_T;
    for (uint64_t p = 0; p < 20000; ++p) {
        Path w = sample_brownian(g, src, p);
        std::vector<double> m(w.n_points());
        for (std::size_t i = 0; i < w.n_points(); ++i) m[i] = theta * w[i];
        Path e = stochastic_exponential(Path(g, std::move(m)));
        CHECK(e.back() > 0.0);
        at_T.add(e.back());
    }
    McEstimate est = at_T.estimate();
    CHECK(std::abs(est.mean - 1.0) < 3.5 * est.stderr_);

    Path bad = Path::constant(g, 1.0);
    CHECK_THROWS_AS((void)stochastic_exponential(bad), std::invalid_argument);
}

TEST_CASE("yor formula within discretization tolerance") {
    GridPtr g = make_grid(1.0, 4096);
    RandomSource src(31);
    for (uint64_t p = 0; p < 20; ++p) {
        Path m = sample_brownian(g, src, 2 * p);
        Path n = sample_brownian(g, src, 2 * p + 1);
        std::size_t np = g->n_points();
        std::vector<double> sum(np), bracket(np, 0.0);
        for (std::size_t i = 0; i < np; ++i) sum[i] = m[i] + n[i];
        for (std::size_t i = 1; i < np; ++i)
            bracket[i] = bracket[i - 1] + (m[i] - m[i - 1]) * (n[i] - n[i - 1]);
        std::vector<double> comb(np);
        for (std::size_t i = 0; i < np; ++i) comb[i] = sum[i] + bracket[i];
        Path lhs_m = stochastic_exponential(m);
        Path lhs_n = stochastic_exponential(n);
        Path rhs = stochastic_exponential(Path(g, std::move(comb)));
        double rel = std::abs(lhs_m.back() * lhs_n.back() / rhs.back() - 1.0);
        CHECK(rel < 0.05);
    }
}

TEST_CASE("wealth_process") {
    GridPtr g = make_grid(1.0, 128);
    RandomSource src(37);
    Path w = sample_brownian(g, src, 5);
    std::vector<double> sv(w.n_points());
    for (std::size_t i = 0; i < w.n_points(); ++i) sv[i] = std::exp(w[i]);
    Path s(g, std::move(sv));

    Strategy flat{Path::constant(g, 0.0), true, 0.0};
    WealthResult r = wealth_process(5.0, flat, s);
    for (std::size_t i = 0; i < r.wealth.n_points(); ++i) CHECK(r.wealth[i] == 5.0);

    Strategy hold{Path::constant(g, 1.0), true, 0.0};
    r = wealth_process(s[0], hold, s);
    for (std::size_t i = 0; i < r.wealth.n_points(); ++i)
        CHECK(r.wealth[i] == doctest::Approx(s[i]).epsilon(1e-12));

    Strategy bad{Path::constant(g, -0.5), true, 0.0};
    CHECK_THROWS_AS((void)wealth_process(1.0, bad, s), std::invalid_argument);

    Strategy shortside{Path::constant(g, -0.5), false, 10.0};
    CHECK_NOTHROW((void)wealth_process(1.0, shortside, s));
}

TEST_CASE("constant fraction wealth matches explicit holdings route") {
    GridPtr g = make_grid(1.0, 256);
    RandomSource src(41);
    Path w = sample_brownian(g, src, 9);
    std::vector<double> sv(w.n_points());
    for (std::size_t i = 0; i < w.n_points(); ++i) sv[i] = std::exp(0.3 * w[i]);
    Path s(g, std::move(sv));

    double pi = 0.5, x0 = 2.0;
    Path direct = constant_fraction_wealth(x0, pi, s);
    Strategy strat = constant_fraction_strategy(x0, pi, s);
    WealthResult via = wealth_process(x0, strat, s);
    for (std::size_t i = 0; i < direct.n_points(); ++i)
        CHECK(via.wealth[i] == doctest::Approx(direct[i]).epsilon(1e-10));
}

TEST_CASE("ito isometry at ensemble level") {
    GridPtr g = make_grid(1.0, 256);
    RandomSource src(43);
    // deterministic step integrand h(t) = 1 + t
    std::vector<double> hv(g->n_points());
    for (std::size_t i = 0; i < g->n_points(); ++i) hv[i] = 1.0 + g->time(i);
    Path h(g, std::move(hv));
    double target = 0.0;
    for (std::size_t i = 0; i < g->n_steps(); ++i)
        target += h[i] * h[i] * g->dt(i);

    const int n = 20000;
    Accumulator term;
    for (uint64_t p = 0; p < n; ++p) {
        Path w = sample_brownian(g, src, p);
        term.add(ito_integral(h, w).back());
    }
    double var = term.sample_variance();
    double se_var = var * std::sqrt(2.0 / n);
    CHECK(std::abs(var - target) < 5.0 * se_var);
}
