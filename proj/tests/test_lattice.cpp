#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "martlab/lattice.hpp"
#include "martlab/rational_lp.hpp"

using namespace martlab;

namespace {
MarketLattice binomial(double u, double d) {
    return MarketLattice::one_period(1.0, {u, d}, {0.5, 0.5});
}
}  // namespace

TEST_CASE("rational_from_double is exact") {
    CHECK(rational_from_double(0.5) == Rational(1, 2));
    CHECK(rational_from_double(3.0) == Rational(3));
    CHECK(rational_from_double(-0.75) == Rational(-3, 4));
    CHECK(static_cast<double>(rational_from_double(0.1)) == 0.1);
}

TEST_CASE("simplex on small instances") {
    // max x + y st x <= 2, y <= 3, x + y <= 4
    std::vector<std::vector<Rational>> A{{1, 0}, {0, 1}, {1, 1}};
    std::vector<Rational> b{2, 3, 4};
    std::vector<Rational> c{1, 1};
    LpResult r = simplex_max(A, b, c);
    CHECK(r.status == LpResult::Status::Optimal);
    CHECK(r.objective == Rational(4));

    // unbounded: max x with no constraint binding x
    std::vector<std::vector<Rational>> A2{{0}};
    std::vector<Rational> b2{1};
    std::vector<Rational> c2{1};
    LpResult r2 = simplex_max(A2, b2, c2);
    CHECK(r2.status == LpResult::Status::Unbounded);
}

TEST_CASE("lattice construction and json round trip") {
    MarketLattice lat = MarketLattice::iid_tree(1.0, {2.0, 0.5}, {0.5, 0.5}, 2);
    CHECK(lat.n_nodes() == 7);
    CHECK(lat.first_leaf() == 3);
    CHECK(lat.n_leaves() == 4);
    CHECK(lat.prices[3] == doctest::Approx(4.0));
    CHECK(lat.prices[6] == doctest::Approx(0.25));
    CHECK(lat.level_of(0) == 0);
    CHECK(lat.level_of(2) == 1);
    CHECK(lat.level_of(5) == 2);

    MarketLattice back = MarketLattice::from_json(lat.to_json());
    CHECK(back.depth == lat.depth);
    CHECK(back.prices == lat.prices);
    CHECK(back.ref_probs == lat.ref_probs);

    MarketLattice bad = lat;
    bad.prices[1] = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("martingale measure: binomial closed form") {
    // up 2 / down 0.5 from 1: q = 1/3
    auto mv = find_martingale_measure(binomial(2.0, 0.5));
    REQUIRE(mv.has_value());
    CHECK(mv->probs[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(mv->probs[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    // price never falls: infeasible for every eps > 0
    CHECK_FALSE(find_martingale_measure(binomial(3.0, 1.0)).has_value());

    // constant price: the reference measure itself works
    auto flat = find_martingale_measure(binomial(1.0, 1.0));
    REQUIRE(flat.has_value());

    // two-period iid: q = 1/3 at every node
    MarketLattice two = MarketLattice::iid_tree(1.0, {2.0, 0.5}, {0.5, 0.5}, 2);
    auto mv2 = find_martingale_measure(two);
    REQUIRE(mv2.has_value());
    for (std::size_t v = 0; v < two.first_leaf(); ++v)
        CHECK(mv2->probs[two.child(v, 0)] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    // M = M_loc on finite trees
    CHECK(find_local_martingale_measure(two).has_value() == mv2.has_value());
}

TEST_CASE("supermartingale measure") {
    auto mv = find_supermartingale_measure(binomial(2.0, 0.5));
    REQUIRE(mv.has_value());
    // equality attainable: the martingale choice is reported
    CHECK(mv->probs[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    CHECK_FALSE(find_supermartingale_measure(binomial(3.0, 1.0)).has_value());

    // strictly falling prices still admit a supermartingale measure
    auto down = find_supermartingale_measure(binomial(0.9, 0.5));
    REQUIRE(down.has_value());
    double drift = down->probs[1] * 0.9 + down->probs[2] * 0.5;
    CHECK(drift <= 1.0 + 1e-12);
}

TEST_CASE("deflator cones") {
    CHECK(has_local_martingale_deflator(binomial(2.0, 0.5)));
    CHECK(has_supermartingale_deflator(binomial(2.0, 0.5)));
    CHECK_FALSE(has_local_martingale_deflator(binomial(3.0, 1.0)));
    CHECK_FALSE(has_supermartingale_deflator(binomial(3.0, 1.0)));
    // falling market: supermartingale deflator exists, local martingale not
    CHECK(has_supermartingale_deflator(binomial(0.9, 0.5)));
    CHECK_FALSE(has_local_martingale_deflator(binomial(0.9, 0.5)));
}

TEST_CASE("arbitrage search") {
    // up-3/down-1: buy and hold is a constrained arbitrage
    auto w = find_arbitrage(binomial(3.0, 1.0), true);
    REQUIRE(w.has_value());
    CHECK(w->holdings[0] > 0.0);
    for (double g : w->leaf_gains) CHECK(g >= -1e-15);
    CHECK(*std::max_element(w->leaf_gains.begin(), w->leaf_gains.end()) > 0.0);

    // binomial 2/0.5: EMM exists, no arbitrage either way
    CHECK_FALSE(find_arbitrage(binomial(2.0, 0.5), false).has_value());
    CHECK_FALSE(find_arbitrage(binomial(2.0, 0.5), true).has_value());

    // constant price: every gain is zero
    CHECK_FALSE(find_arbitrage(binomial(1.0, 1.0), false).has_value());

    // falling market: shorting is an unconstrained arbitrage only
    CHECK(find_arbitrage(binomial(0.9, 0.5), false).has_value());
    CHECK_FALSE(find_arbitrage(binomial(0.9, 0.5), true).has_value());
}

TEST_CASE("dominance search") {
    // up-1/down-0.25: cash dominates buy-and-hold (S_T - S_0 <= 0, < 0 on down)
    MarketLattice lat = binomial(1.0, 0.25);
    auto w = find_dominating_strategy(lat, true);
    REQUIRE(w.has_value());
    // witness gains must weakly dominate S_T - S_0 with a strict leaf
    bool strict = false;
    for (std::size_t l = 0; l < w->leaf_gains.size(); ++l) {
        double target = lat.prices[lat.first_leaf() + l] - lat.prices[0];
        CHECK(w->leaf_gains[l] >= target - 1e-12);
        strict = strict || w->leaf_gains[l] > target + 1e-12;
    }
    CHECK(strict);

    CHECK_FALSE(find_dominating_strategy(binomial(2.0, 0.5), false).has_value());
    CHECK_FALSE(find_dominating_strategy(binomial(1.0, 1.0), true).has_value());
}

TEST_CASE("nupbr detection") {
    CHECK(nupbr_holds(binomial(2.0, 0.5), false));
    CHECK(nupbr_holds(binomial(2.0, 0.5), true));
    // scalable constrained arbitrage: unbounded profit with bounded risk
    CHECK_FALSE(nupbr_holds(binomial(3.0, 1.0), true));
    CHECK_FALSE(nupbr_holds(binomial(3.0, 1.0), false));
    // falling market: shorting scales without bound only unconstrained
    CHECK_FALSE(nupbr_holds(binomial(0.9, 0.5), false));
    CHECK(nupbr_holds(binomial(0.9, 0.5), true));
}

TEST_CASE("log agent closed forms") {
    // binomial 2/0.5, p = 1/2, x = 1: pi* = 1/2, value from the closed form
    AgentProblem agent;
    agent.utility = AgentProblem::Utility::Log;
    agent.wealth = 1.0;
    UtilitySolution s = solve_constrained_utility(binomial(2.0, 0.5), agent);
    CHECK_FALSE(s.unbounded);
    CHECK(s.fractions[0] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(s.value ==
          doctest::Approx(0.5 * std::log(1.5) + 0.5 * std::log(0.75)).epsilon(1e-12));
    CHECK(s.leaf_wealth[0] == doctest::Approx(1.5).epsilon(1e-10));
    CHECK(s.leaf_wealth[1] == doctest::Approx(0.75).epsilon(1e-10));

    // constant price: degenerate, value log x with pi = 0 (minimum norm)
    agent.wealth = 2.0;
    UtilitySolution flat = solve_constrained_utility(binomial(1.0, 1.0), agent);
    CHECK(flat.value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(flat.fractions[0] == 0.0);

    // up-1.5/down-0.9, p = 1/2: interior FOC solves to pi* = 4
    agent.wealth = 1.0;
    UtilitySolution lever = solve_constrained_utility(binomial(1.5, 0.9), agent);
    CHECK(lever.fractions[0] == doctest::Approx(4.0).epsilon(1e-10));

    // one-step arbitrage: value unbounded, witness attached
    UtilitySolution arb = solve_constrained_utility(binomial(3.0, 1.0), agent);
    CHECK(arb.unbounded);
    CHECK(std::isinf(arb.value));
    CHECK(arb.arbitrage.has_value());
}

TEST_CASE("bisection against golden-section oracle") {
    // independent 1-D oracle for the same one-period problem
    MarketLattice lat = binomial(1.5, 0.9);
    auto expected_log = [&](double pi) {
        return 0.5 * std::log(1.0 + 0.5 * pi) + 0.5 * std::log(1.0 - 0.1 * pi);
    };
    double a = 0.0, b = 9.999;  // positivity bound: pi < 10
    for (int it = 0; it < 300; ++it) {
        double m1 = a + (b - a) * 0.381966, m2 = b - (b - a) * 0.381966;
        if (expected_log(m1) < expected_log(m2))
            a = m1;
        else
            b = m2;
    }
    AgentProblem agent;
    UtilitySolution s = solve_constrained_utility(lat, agent);
    CHECK(s.fractions[0] == doctest::Approx(0.5 * (a + b)).epsilon(1e-8));
}

TEST_CASE("power agent and boundary cases") {
    AgentProblem agent;
    agent.utility = AgentProblem::Utility::Power;
    agent.gamma = 0.5;
    UtilitySolution s = solve_constrained_utility(binomial(2.0, 0.5), agent);
    CHECK_FALSE(s.unbounded);
    CHECK(s.fractions[0] > 0.0);
    // drift pushes short: constrained boundary at pi = 0
    UtilitySolution lo = solve_constrained_utility(binomial(1.1, 0.05), agent);
    bool foc_negative_at_zero = 0.5 * 0.1 + 0.5 * (-0.95) < 0.0;
    CHECK(foc_negative_at_zero);
    CHECK(lo.fractions[0] == 0.0);
}

TEST_CASE("dual problem: log binomial and conjugacy") {
    MarketLattice lat = binomial(2.0, 0.5);
    AgentProblem agent;
    agent.wealth = 1.0;
    DualSolution d = solve_dual(lat, agent, 1.0);
    REQUIRE_FALSE(d.infeasible);
    // the dual optimizer is the EMM density: Y_up = q/p = (1/3)/(1/2)
    CHECK(d.deflator[1] == doctest::Approx((1.0 / 3.0) / 0.5).epsilon(1e-8));
    CHECK(d.deflator[2] == doctest::Approx((2.0 / 3.0) / 0.5).epsilon(1e-8));

    CHECK(conjugacy_gap(lat, agent) < 1e-8);

    // constant price: optimal deflator identically 1
    DualSolution flat = solve_dual(binomial(1.0, 1.0), agent, 2.0);
    REQUIRE_FALSE(flat.infeasible);
    CHECK(flat.deflator[1] == doctest::Approx(1.0).epsilon(1e-10));

    // up-3/down-1: dual infeasible, matching the unbounded primal
    DualSolution inf = solve_dual(binomial(3.0, 1.0), agent, 1.0);
    CHECK(inf.infeasible);
    CHECK(conjugacy_gap(binomial(3.0, 1.0), agent) == 0.0);
}

TEST_CASE("conjugacy gap across utilities and lattices") {
    for (double gamma : {0.3, 0.5, 0.8}) {
        AgentProblem agent;
        agent.utility = AgentProblem::Utility::Power;
        agent.gamma = gamma;
        agent.wealth = 2.0;
        CHECK(conjugacy_gap(binomial(2.0, 0.5), agent) < 1e-8);
        CHECK(conjugacy_gap(binomial(1.5, 0.9), agent) < 1e-8);
    }
    AgentProblem log_agent;
    log_agent.wealth = 3.0;
    MarketLattice two = MarketLattice::iid_tree(1.0, {2.0, 0.5}, {0.5, 0.5}, 2);
    CHECK(conjugacy_gap(two, log_agent) < 1e-8);
    MarketLattice tri =
        MarketLattice::one_period(1.0, {1.5, 1.0, 0.5}, {0.3, 0.4, 0.3});
    CHECK(conjugacy_gap(tri, log_agent) < 1e-8);
}

TEST_CASE("solved optima are C-maximal") {
    AgentProblem agent;
    for (auto lat : {binomial(2.0, 0.5), binomial(1.5, 0.9),
                     MarketLattice::iid_tree(1.0, {2.0, 0.5}, {0.5, 0.5}, 2)}) {
        UtilitySolution s = solve_constrained_utility(lat, agent);
        CHECK(is_c_maximal(lat, s));
    }
    // a deliberately suboptimal plan is not C-maximal on a falling market:
    // holding one share is weakly dominated by cash
    MarketLattice down = binomial(1.0, 0.25);
    UtilitySolution fake;
    fake.holdings = {1.0};
    fake.leaf_wealth = {down.prices[1], down.prices[2]};
    CHECK_FALSE(is_c_maximal(down, fake));
}

TEST_CASE("duality verdicts on the named instances") {
    DualityRow up3 = verify_duality_instance(binomial(3.0, 1.0), "up3down1");
    CHECK_FALSE(up3.msup_nonempty);
    CHECK_FALSE(up3.na_c);  // constrained arbitrage found
    CHECK(up3.consistent);

    DualityRow bin = verify_duality_instance(binomial(2.0, 0.5), "bin2half");
    CHECK(bin.m_nonempty);
    CHECK(bin.na);
    CHECK(bin.nd);
    CHECK(bin.consistent);
}

TEST_CASE("equilibrium: single log agent harmonic-mean price") {
    // one agent must hold the supply; the price makes H = 1 optimal:
    // S0 = 1/E[1/D] for log utility
    MarketLattice lat = MarketLattice::one_period(1.0, {2.0, 0.8}, {0.5, 0.5});
    EquilibriumAgent agent;
    agent.problem.utility = AgentProblem::Utility::Log;
    agent.endowment_share = 1.0;
    EquilibriumResult r = solve_equilibrium(lat, {agent});
    REQUIRE(r.converged);
    double harmonic = 1.0 / (0.5 / 2.0 + 0.5 / 0.8);
    CHECK(r.prices[0] == doctest::Approx(harmonic).epsilon(1e-7));
    CHECK(r.holdings[0][0] == doctest::Approx(1.0).epsilon(1e-7));

    // recomputing the agent optimum at the solved price: residual clearing
    AgentProblem check = agent.problem;
    check.wealth = r.prices[0];
    MarketLattice solved = lat;
    solved.prices = r.prices;
    UtilitySolution s = solve_constrained_utility(solved, check);
    CHECK(s.holdings[0] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("equilibrium: two identical agents split the market") {
    MarketLattice lat = MarketLattice::one_period(1.0, {2.0, 0.8}, {0.5, 0.5});
    EquilibriumAgent a1, a2;
    a1.problem.utility = a2.problem.utility = AgentProblem::Utility::Log;
    a1.endowment_share = a2.endowment_share = 0.5;
    EquilibriumResult r = solve_equilibrium(lat, {a1, a2});
    REQUIRE(r.converged);
    CHECK(r.holdings[0][0] == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(r.holdings[1][0] == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("equilibrium: heterogeneous beliefs, price between valuations") {
    MarketLattice lat = MarketLattice::one_period(1.0, {2.0, 0.8}, {0.5, 0.5});
    // beliefs p1 = 0.6, p2 = 0.4 enter as likelihood-ratio utility weights
    EquilibriumAgent a1, a2;
    a1.problem.leaf_weights = {1.2, 0.8};
    a2.problem.leaf_weights = {0.8, 1.2};
    a1.endowment_share = a2.endowment_share = 0.5;
    EquilibriumResult r = solve_equilibrium(lat, {a1, a2});
    REQUIRE(r.converged);

    // private log-agent valuations (harmonic means under own beliefs)
    double v1 = 1.0 / (0.6 / 2.0 + 0.4 / 0.8);
    double v2 = 1.0 / (0.4 / 2.0 + 0.6 / 0.8);
    CHECK(r.prices[0] > std::min(v1, v2));
    CHECK(r.prices[0] < std::max(v1, v2));

    // clearing residual by re-solving both agents at the solved price
    MarketLattice solved = lat;
    solved.prices = r.prices;
    double total = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
        AgentProblem p = (k == 0 ? a1 : a2).problem;
        p.wealth = 0.5 * r.prices[0];
        total += solve_constrained_utility(solved, p).holdings[0];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-7));

    // 1-D grid oracle: excess demand changes sign across the solved price
    auto excess = [&](double s0) {
        MarketLattice m = lat;
        m.prices[0] = s0;
        double h = 0.0;
        for (std::size_t k = 0; k < 2; ++k) {
            AgentProblem p = (k == 0 ? a1 : a2).problem;
            p.wealth = 0.5 * s0;
            h += solve_constrained_utility(m, p).holdings[0];
        }
        return h - 1.0;
    };
    CHECK(excess(r.prices[0] - 1e-4) * excess(r.prices[0] + 1e-4) < 0.0);
}
