#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace martlab {

using Rational = boost::multiprecision::cpp_rational;

Rational rational_from_double(double x);  // exact (doubles are dyadic)

// ---------------------------------------------------------------------------
// Finite event tree with uniform branching. Node ids are breadth-first
// (heap order): children of v are v*b + 1 ... v*b + b. Edge data (reference
// transition probabilities) is stored at the child's id.
// ---------------------------------------------------------------------------
struct MarketLattice {
    std::size_t depth = 1;      // number of periods
    std::size_t branching = 2;  // 2 or 3
    std::vector<double> prices;     // by node id, strictly positive
    std::vector<double> ref_probs;  // by node id; [0] unused; per-node sums = 1

    std::size_t n_nodes() const;
    std::size_t first_leaf() const;
    std::size_t n_leaves() const;
    std::size_t child(std::size_t v, std::size_t j) const {
        return v * branching + 1 + j;
    }
    std::size_t parent(std::size_t v) const { return (v - 1) / branching; }
    bool is_leaf(std::size_t v) const { return v >= first_leaf(); }
    std::size_t level_of(std::size_t v) const;

    void validate() const;

    // one-period binomial / uniform i.i.d. trees, handy for tests
    static MarketLattice one_period(double s0, std::vector<double> child_prices,
                                    std::vector<double> probs);
    static MarketLattice iid_tree(double s0, std::vector<double> factors,
                                  std::vector<double> probs, std::size_t depth);

    std::string to_json() const;
    static MarketLattice from_json(const std::string& text);
};

// ---------------------------------------------------------------------------
// Dual side: equivalent (super/local) martingale measures and deflators.
// Measure feasibility uses q >= eps (default 1e-9) as the proxy for strict
// equivalence; deflator feasibility is a per-node sign-structure test and is
// exact. All decisions are made in rational arithmetic.
// ---------------------------------------------------------------------------
struct MeasureVector {
    std::vector<double> probs;  // by node id, like ref_probs
    double epsilon = 0.0;
};

inline constexpr double kMeasureEpsilon = 1e-9;

// Supermartingale measure: per node sum q_e S_e <= S_v, q_e >= eps.
std::optional<MeasureVector> find_supermartingale_measure(
    const MarketLattice& lat, double eps = kMeasureEpsilon);

// Martingale measure: equality version. On a finite tree M = M_loc.
std::optional<MeasureVector> find_martingale_measure(
    const MarketLattice& lat, double eps = kMeasureEpsilon);
std::optional<MeasureVector> find_local_martingale_measure(
    const MarketLattice& lat, double eps = kMeasureEpsilon);

// Deflator cones (strict positivity, exact sign tests).
bool has_local_martingale_deflator(const MarketLattice& lat);
bool has_supermartingale_deflator(const MarketLattice& lat);

// ---------------------------------------------------------------------------
// Primal side: strategy-search linear programs (exact rational simplex).
// ---------------------------------------------------------------------------
struct TreeStrategy {
    std::vector<double> holdings;     // per non-leaf node id
    std::vector<double> leaf_gains;   // (H.S)_T per leaf
};

// NA / NA_C: a strategy with terminal gains >= 0, > 0 somewhere.
std::optional<TreeStrategy> find_arbitrage(const MarketLattice& lat,
                                           bool constrained);

// ND / ND_C: a strategy with (H.S)_T >= S_T - S_0, strict somewhere.
std::optional<TreeStrategy> find_dominating_strategy(const MarketLattice& lat,
                                                     bool constrained);

// NUPBR / NUPBR_C: boundedness of terminal wealth over 1-admissible
// strategies; fails iff the gain LP with the pathwise floor is unbounded.
bool nupbr_holds(const MarketLattice& lat, bool constrained);

// ---------------------------------------------------------------------------
// Utility maximization on the tree (CRRA family, myopic recursion).
// ---------------------------------------------------------------------------
struct AgentProblem {
    enum class Utility { Log, Power };
    Utility utility = Utility::Log;
    double gamma = 0.5;                // for Power
    std::vector<double> leaf_weights;  // stochastic utility factors; empty -> 1
    double wealth = 1.0;
    bool constrained = true;
};

struct UtilitySolution {
    bool unbounded = false;            // NFLVR_C failure at some node
    double value = 0.0;
    std::vector<double> fractions;     // risky wealth fraction per non-leaf node
    std::vector<double> holdings;      // h = pi * w / S per non-leaf node
    std::vector<double> leaf_wealth;   // terminal wealth per leaf
    std::optional<TreeStrategy> arbitrage;  // witness when unbounded
};

UtilitySolution solve_constrained_utility(const MarketLattice& lat,
                                          const AgentProblem& agent);

struct DualSolution {
    bool infeasible = false;       // no strictly positive deflator cone point
    double value = 0.0;            // v(y)
    std::vector<double> deflator;  // optimal Y per node (Y_0 = 1)
};

DualSolution solve_dual(const MarketLattice& lat, const AgentProblem& agent,
                        double y);

// conjugacy gap |u(x) - inf_y (v(y) + x y)|, minimized numerically over y
double conjugacy_gap(const MarketLattice& lat, const AgentProblem& agent);

// C-maximality of the solved optimum: no constrained strategy weakly
// dominates the solved terminal wealth (LP search for an improvement).
bool is_c_maximal(const MarketLattice& lat, const UtilitySolution& sol);

// ---------------------------------------------------------------------------
// Exhaustive duality verification (the theorem's three equivalences).
// ---------------------------------------------------------------------------
struct DualityRow {
    std::string instance_id;
    bool m_nonempty = false;
    bool msup_nonempty = false;
    bool mloc_nonempty = false;
    bool dloc_nonempty = false;
    bool dsup_nonempty = false;
    bool na = false, na_c = false;
    bool nd = false, nd_c = false;
    bool nupbr = false, nupbr_c = false;
    bool consistent = false;
};

DualityRow verify_duality_instance(const MarketLattice& lat,
                                   const std::string& id);

struct LatticeFamilyConfig {
    std::vector<double> up_factors{0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0};
    std::vector<double> down_factors{0.25, 0.5, 0.75, 0.9, 1.0, 1.25, 1.5};
    std::size_t max_depth = 3;
};

std::vector<DualityRow> verify_duality_theorem(const LatticeFamilyConfig& cfg);

// ---------------------------------------------------------------------------
// Constrained equilibrium by tatonnement on interior node prices; leaf
// prices act as terminal dividends and stay fixed.
// ---------------------------------------------------------------------------
struct EquilibriumAgent {
    AgentProblem problem;        // wealth field ignored; endowment used instead
    double endowment_share = 1.0;  // theta_k, sums to 1 across agents
};

struct EquilibriumResult {
    bool converged = false;
    std::size_t iterations = 0;
    std::vector<double> prices;                 // by node id
    std::vector<std::vector<double>> holdings;  // [agent][non-leaf node]
    std::vector<double> wealths;                // x_k = theta_k S_0
    double max_excess = 0.0;
};

struct TatonnementConfig {
    double damping = 0.5;
    std::size_t max_iterations = 10000;
    double tolerance = 1e-8;
};

EquilibriumResult solve_equilibrium(const MarketLattice& lat,
                                    std::vector<EquilibriumAgent> agents,
                                    const TatonnementConfig& cfg = {});

}  // namespace martlab
