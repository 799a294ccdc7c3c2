#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "martlab/calculus.hpp"
#include "martlab/equilibrium.hpp"
#include "martlab/processes.hpp"
#include "martlab/sde.hpp"

using namespace martlab;

TEST_CASE("representative utility marginal identity") {
    // U'(S_T) = Z_T to machine precision, per path
    PropParams params = PropParams::make(1.0, 2.0, 512);
    RandomSource src(61);
    std::vector<double> z(200), s(200);
    for (uint64_t p = 0; p < 200; ++p) {
        ScenarioRealization r = build_example_one(params, src, p);
        z[p] = r.z_primary.back();
        s[p] = r.s.back();
    }
    for (double gamma : {0.3, 0.5, 0.7}) {
        UtilitySpec u = representative_utility(gamma, z, s);
        for (std::size_t i = 0; i < z.size(); ++i)
            CHECK(u.marginal(i, s[i]) == doctest::Approx(z[i]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(representative_utility(0.0, z, s), std::invalid_argument);
    CHECK_THROWS_AS(representative_utility(1.0, z, s), std::invalid_argument);
}

TEST_CASE("representative utility direct substitution") {
    // gamma = 1/2, Z = 1, S = 4, x = 4 -> U = 1 * 2 * 2 / (1/2) = 8
    std::vector<double> z{1.0}, s{4.0};
    UtilitySpec u = representative_utility(0.5, z, s);
    CHECK(u.value(0, 4.0) == doctest::Approx(8.0).epsilon(1e-14));
    // E[U(S_T)] = E[Z_T S_T]/(1-gamma) = 1/(1-gamma) when Z S = 1
    std::vector<double> z2{2.0, 0.5}, s2{0.5, 2.0};
    UtilitySpec u2 = representative_utility(0.5, z2, s2);
    double mean = 0.5 * (u2.value(0, s2[0]) + u2.value(1, s2[1]));
    CHECK(mean == doctest::Approx(1.0 / 0.5).epsilon(1e-12));
}

TEST_CASE("optimality gap zero at the benchmark") {
    std::vector<double> z{0.5, 1.5}, s{2.0, 0.5};
    UtilitySpec u = representative_utility(0.5, z, s);
    OptimalityGap g = optimality_gap(u, s, s, z);
    CHECK(g.utility_gap.mean == 0.0);
    CHECK(g.deflated_gap.mean == 0.0);
    CHECK(g.excluded == 0);
    CHECK(g.chain_violations == 0);

    std::vector<double> dead{-1.0, 0.5};
    OptimalityGap g2 = optimality_gap(u, dead, s, z);
    CHECK(g2.excluded == 1);
}

TEST_CASE("negishi weights arithmetic") {
    // two log agents, Z_T = 0.5, X1 = 2, X2 = 1 -> lambda = (1.0, 0.5)
    std::vector<AgentOutcome> agents;
    agents.push_back({UtilitySpec::log_utility(), {2.0}});
    agents.push_back({UtilitySpec::log_utility(), {1.0}});
    std::vector<double> z{0.5};
    NegishiWeights w = negishi_weights(z, agents);
    CHECK(w.lambda[0][0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(w.lambda[1][0] == doctest::Approx(0.5).epsilon(1e-14));

    // representative self-consistency: U'(X) = Z -> lambda = 1
    std::vector<double> s{3.0};
    UtilitySpec rep = representative_utility(0.5, z, s);
    std::vector<AgentOutcome> single;
    single.push_back({rep, {3.0}});
    NegishiWeights w1 = negishi_weights(z, single);
    CHECK(w1.lambda[0][0] == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<AgentOutcome> bad;
    bad.push_back({UtilitySpec::log_utility(), {0.0}});
    CHECK_THROWS_AS(negishi_weights(z, bad), std::invalid_argument);
}

TEST_CASE("aggregate allocation closed forms") {
    std::vector<AgentOutcome> agents;
    agents.push_back({UtilitySpec::log_utility(), {1.0}});
    agents.push_back({UtilitySpec::log_utility(), {1.0}});

    // lambda = (1.0, 0.5), x = 3 -> c = (2, 1), mu = 0.5
    std::vector<double> lam{1.0, 0.5};
    Allocation a = aggregate_allocation(lam, 3.0, agents, 0);
    CHECK(a.c[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(a.c[1] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(a.multiplier == doctest::Approx(0.5).epsilon(1e-10));

    // equal agents, equal weights -> equal split
    std::vector<double> eq{2.0, 2.0};
    Allocation b = aggregate_allocation(eq, 5.0, agents, 0);
    CHECK(b.c[0] == doctest::Approx(2.5).epsilon(1e-10));
    CHECK(b.c[1] == doctest::Approx(2.5).epsilon(1e-10));

    // single agent: c = x, mu = lambda U'(x)
    std::vector<AgentOutcome> one;
    one.push_back({UtilitySpec::power(0.5), {1.0}});
    std::vector<double> l1{3.0};
    Allocation c = aggregate_allocation(l1, 4.0, one, 0);
    CHECK(c.c[0] == 4.0);
    CHECK(c.multiplier == doctest::Approx(3.0 * std::pow(4.0, -0.5)).epsilon(1e-12));

    // scaling invariance: multiplying weights scales mu, fixes allocation
    std::vector<double> lam2{2.0, 1.0};
    Allocation d = aggregate_allocation(lam2, 3.0, agents, 0);
    CHECK(d.c[0] == doctest::Approx(a.c[0]).epsilon(1e-9));
    CHECK(d.c[1] == doctest::Approx(a.c[1]).epsilon(1e-9));
    CHECK(d.multiplier == doctest::Approx(2.0 * a.multiplier).epsilon(1e-9));
}

TEST_CASE("negishi round trip on simulated outcomes") {
    PropParams params = PropParams::make(1.0, 2.0, 256);
    RandomSource src(62);
    const std::size_t n = 500;
    std::vector<double> z(n), s(n), x1(n), x2(n);
    for (uint64_t p = 0; p < n; ++p) {
        ScenarioRealization r = build_example_one(params, src, p);
        z[p] = r.z_primary.back();
        s[p] = r.s.back();
        x1[p] = 0.4 * s[p];  // a feasible split of the terminal supply
        x2[p] = 0.6 * s[p];
    }
    std::vector<AgentOutcome> agents;
    agents.push_back({UtilitySpec::log_utility(), x1});
    agents.push_back({UtilitySpec::power(0.5), x2});
    NegishiWeights w = negishi_weights(z, agents);

    std::vector<std::vector<double>> candidates;
    candidates.push_back(s);  // market portfolio: zero gap
    AggregationReport rep = verify_aggregation(w, z, s, agents, candidates);
    CHECK(rep.roundtrip_failures == 0);
    CHECK(rep.chain_violations == 0);
    CHECK(rep.max_roundtrip_residual < 1e-10);
    CHECK(rep.candidate_gaps[0].mean == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("patch deflators splices increments") {
    GridPtr g = make_grid(1.0, 8);
    RandomSource src(63);
    Path n1 = sample_brownian(g, src, 0);
    Path n2 = sample_brownian(g, src, 1);

    // single agent holding one share throughout: N = N^1
    std::vector<Path> hold1{Path::constant(g, 1.0)};
    std::vector<Path> ints1{n1};
    PatchedDeflator p1 = patch_deflators(hold1, ints1);
    for (std::size_t i = 0; i < g->n_points(); ++i)
        CHECK(p1.integrand[i] == doctest::Approx(n1[i]).epsilon(1e-14));

    // alternating holdings: splice at T/2
    std::vector<double> h1(g->n_points()), h2(g->n_points());
    for (std::size_t i = 0; i < g->n_points(); ++i) {
        bool first_half = g->time(i) < 0.5;
        h1[i] = first_half ? 1.0 : 0.0;
        h2[i] = first_half ? 0.0 : 1.0;
    }
    std::vector<Path> hold{Path(g, h1), Path(g, h2)};
    std::vector<Path> ints{n1, n2};
    PatchedDeflator p = patch_deflators(hold, ints);
    for (std::size_t s = 0; s + 1 < g->n_points(); ++s) {
        std::size_t expect = g->time(s) < 0.5 ? 0 : 1;
        CHECK(p.selector[s] == expect);
        const Path& nk = expect == 0 ? n1 : n2;
        CHECK(p.integrand[s + 1] - p.integrand[s] ==
              doctest::Approx(nk[s + 1] - nk[s]).epsilon(1e-14));
    }
    CHECK(p.deflator[0] == 1.0);

    // a cell where nobody holds: market clearing violation
    std::vector<double> gap(g->n_points(), 1.0);
    gap[3] = 0.0;
    std::vector<Path> badhold{Path(g, gap)};
    CHECK_THROWS_AS(patch_deflators(badhold, ints1), std::invalid_argument);

    // partition property: selectors cover every cell with one agent
    for (std::size_t s = 0; s + 1 < g->n_points(); ++s)
        CHECK(p.selector[s] <= 1);
}
