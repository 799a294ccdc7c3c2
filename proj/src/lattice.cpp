#include "martlab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "martlab/rational_lp.hpp"

namespace martlab {

Rational rational_from_double(double x) {
    if (x == 0.0) return Rational(0);
    if (!std::isfinite(x))
        throw std::invalid_argument("rational_from_double: non-finite input");
    int e = 0;
    double m = std::frexp(x, &e);  // x = m 2^e, |m| in [0.5, 1)
    auto mi = static_cast<long long>(std::ldexp(m, 53));
    int shift = 53 - e;
    Rational r(mi);
    boost::multiprecision::cpp_int one = 1;
    if (shift > 0)
        r /= Rational(one << shift);
    else if (shift < 0)
        r *= Rational(one << (-shift));
    return r;
}

// ---------------------------------------------------------------------------
// MarketLattice
// ---------------------------------------------------------------------------

std::size_t MarketLattice::n_nodes() const {
    std::size_t n = 1, level = 1;
    for (std::size_t d = 0; d < depth; ++d) {
        level *= branching;
        n += level;
    }
    return n;
}

std::size_t MarketLattice::first_leaf() const {
    std::size_t n = 1, level = 1;
    for (std::size_t d = 0; d + 1 < depth; ++d) {
        level *= branching;
        n += level;
    }
    return depth == 0 ? 0 : n;
}

std::size_t MarketLattice::n_leaves() const { return n_nodes() - first_leaf(); }

std::size_t MarketLattice::level_of(std::size_t v) const {
    std::size_t level = 0, count = 1, upto = 1;
    while (v >= upto) {
        ++level;
        count *= branching;
        upto += count;
    }
    return level;
}

void MarketLattice::validate() const {
    if (depth == 0 || depth > 5)
        throw std::invalid_argument("MarketLattice: depth must be in 1..5");
    if (branching < 2 || branching > 3)
        throw std::invalid_argument("MarketLattice: branching must be 2 or 3");
    if (prices.size() != n_nodes() || ref_probs.size() != n_nodes())
        throw std::invalid_argument("MarketLattice: wrong array sizes");
    for (double p : prices)
        if (!(p > 0.0)) throw std::invalid_argument("MarketLattice: prices must be > 0");
    for (std::size_t v = 0; v < first_leaf(); ++v) {
        double sum = 0.0;
        for (std::size_t j = 0; j < branching; ++j) {
            double q = ref_probs[child(v, j)];
            if (!(q > 0.0 && q < 1.0))
                throw std::invalid_argument("MarketLattice: ref probs must be in (0,1)");
            sum += q;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("MarketLattice: ref probs must sum to 1");
    }
}

MarketLattice MarketLattice::one_period(double s0, std::vector<double> child_prices,
                                        std::vector<double> probs) {
    MarketLattice lat;
    lat.depth = 1;
    lat.branching = child_prices.size();
    lat.prices.push_back(s0);
    lat.prices.insert(lat.prices.end(), child_prices.begin(), child_prices.end());
    lat.ref_probs.push_back(1.0);
    lat.ref_probs.insert(lat.ref_probs.end(), probs.begin(), probs.end());
    lat.validate();
    return lat;
}

MarketLattice MarketLattice::iid_tree(double s0, std::vector<double> factors,
                                      std::vector<double> probs, std::size_t depth) {
    MarketLattice lat;
    lat.depth = depth;
    lat.branching = factors.size();
    std::size_t n = lat.n_nodes();
    lat.prices.assign(n, 0.0);
    lat.ref_probs.assign(n, 1.0);
    lat.prices[0] = s0;
    for (std::size_t v = 0; v < lat.first_leaf(); ++v) {
        for (std::size_t j = 0; j < lat.branching; ++j) {
            std::size_t c = lat.child(v, j);
            lat.prices[c] = lat.prices[v] * factors[j];
            lat.ref_probs[c] = probs[j];
        }
    }
    lat.validate();
    return lat;
}

std::string MarketLattice::to_json() const {
    nlohmann::json j;
    j["depth"] = depth;
    j["branching"] = branching;
    j["prices"] = prices;
    j["ref_probs"] = ref_probs;
    return j.dump(2);
}

MarketLattice MarketLattice::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    MarketLattice lat;
    lat.depth = j.at("depth").get<std::size_t>();
    lat.branching = j.at("branching").get<std::size_t>();
    lat.prices = j.at("prices").get<std::vector<double>>();
    lat.ref_probs = j.at("ref_probs").get<std::vector<double>>();
    lat.validate();
    return lat;
}

// ---------------------------------------------------------------------------
// Dual side
// ---------------------------------------------------------------------------

namespace {

struct NodePrices {
    Rational parent;
    std::vector<Rational> children;
};

NodePrices node_prices(const MarketLattice& lat, std::size_t v) {
    NodePrices np;
    np.parent = rational_from_double(lat.prices[v]);
    for (std::size_t j = 0; j < lat.branching; ++j)
        np.children.push_back(rational_from_double(lat.prices[lat.child(v, j)]));
    return np;
}

// attainable range of sum q_e S_e over {q >= eps, sum q = 1}
void attainable_range(const NodePrices& np, const Rational& eps, Rational& lo,
                      Rational& hi) {
    Rational sum = 0, mn = np.children[0], mx = np.children[0];
    for (const auto& s : np.children) {
        sum += s;
        mn = std::min(mn, s);
        mx = std::max(mx, s);
    }
    Rational b(static_cast<long long>(np.children.size()));
    Rational slack = 1 - b * eps;
    lo = eps * sum + slack * mn;
    hi = eps * sum + slack * mx;
}

// witness with q >= eps, sum q = 1, sum q S = target (target must be in range)
std::vector<Rational> water_fill(const NodePrices& np, const Rational& eps,
                                 const Rational& target) {
    std::size_t b = np.children.size();
    std::size_t imin = 0, imax = 0;
    for (std::size_t j = 1; j < b; ++j) {
        if (np.children[j] < np.children[imin]) imin = j;
        if (np.children[j] > np.children[imax]) imax = j;
    }
    std::vector<Rational> q(b, eps);
    Rational base = 0;
    for (std::size_t j = 0; j < b; ++j) base += q[j] * np.children[j];
    Rational rest = 1 - Rational(static_cast<long long>(b)) * eps;
    if (np.children[imax] == np.children[imin]) {
        q[imin] += rest;
        return q;
    }
    // x_max (S_max - S_min) = target - base - rest S_min
    Rational xmax = (target - base - rest * np.children[imin]) /
                    (np.children[imax] - np.children[imin]);
    q[imax] += xmax;
    q[imin] += rest - xmax;
    return q;
}

}  // namespace

std::optional<MeasureVector> find_martingale_measure(const MarketLattice& lat,
                                                     double eps) {
    lat.validate();
    Rational e = rational_from_double(eps);
    MeasureVector mv;
    mv.epsilon = eps;
    mv.probs.assign(lat.n_nodes(), 0.0);
    mv.probs[0] = 1.0;
    for (std::size_t v = 0; v < lat.first_leaf(); ++v) {
        NodePrices np = node_prices(lat, v);
        Rational lo, hi;
        attainable_range(np, e, lo, hi);
        if (np.parent < lo || np.parent > hi) return std::nullopt;
        std::vector<Rational> q = water_fill(np, e, np.parent);
        for (std::size_t j = 0; j < lat.branching; ++j)
            mv.probs[lat.child(v, j)] = static_cast<double>(q[j]);
    }
    return mv;
}

std::optional<MeasureVector> find_local_martingale_measure(
    const MarketLattice& lat, double eps) {
    // finite trees admit no strict local martingales: same system as M
    return find_martingale_measure(lat, eps);
}

std::optional<MeasureVector> find_supermartingale_measure(const MarketLattice& lat,
                                                          double eps) {
    lat.validate();
    Rational e = rational_from_double(eps);
    MeasureVector mv;
    mv.epsilon = eps;
    mv.probs.assign(lat.n_nodes(), 0.0);
    mv.probs[0] = 1.0;
    for (std::size_t v = 0; v < lat.first_leaf(); ++v) {
        NodePrices np = node_prices(lat, v);
        Rational lo, hi;
        attainable_range(np, e, lo, hi);
        if (np.parent < lo) return std::nullopt;
        // report the martingale choice where the equality is attainable
        Rational target = np.parent <= hi ? np.parent : lo;
        std::vector<Rational> q = water_fill(np, e, target);
        for (std::size_t j = 0; j < lat.branching; ++j)
            mv.probs[lat.child(v, j)] = static_cast<double>(q[j]);
    }
    return mv;
}

bool has_local_martingale_deflator(const MarketLattice& lat) {
    lat.validate();
    for (std::size_t v = 0; v < lat.first_leaf(); ++v) {
        NodePrices np = node_prices(lat, v);
        Rational mn = np.children[0], mx = np.children[0];
        for (const auto& s : np.children) {
            mn = std::min(mn, s);
            mx = std::max(mx, s);
        }
        bool flat = mn == np.parent && mx == np.parent;
        bool straddles = mn < np.parent && np.parent < mx;
        if (!flat && !straddles) return false;
    }
    return true;
}

bool has_supermartingale_deflator(const MarketLattice& lat) {
    lat.validate();
    for (std::size_t v = 0; v < lat.first_leaf(); ++v) {
        NodePrices np = node_prices(lat, v);
        Rational mn = np.children[0], mx = np.children[0];
        for (const auto& s : np.children) {
            mn = std::min(mn, s);
            mx = std::max(mx, s);
        }
        bool flat = mn == np.parent && mx == np.parent;
        if (!flat && !(mn < np.parent)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Primal side
// ---------------------------------------------------------------------------

namespace {

// coef[leaf][internal] = price increment earned by one share held at that
// internal node along the path to the leaf (0 off the path)
std::vector<std::vector<Rational>> gain_coefficients(const MarketLattice& lat) {
    std::size_t fl = lat.first_leaf();
    std::size_t nl = lat.n_leaves();
    std::vector<std::vector<Rational>> coef(nl, std::vector<Rational>(fl, 0));
    for (std::size_t l = 0; l < nl; ++l) {
        std::size_t cur = fl + l;
        while (cur != 0) {
            std::size_t par = lat.parent(cur);
            coef[l][par] = rational_from_double(lat.prices[cur]) -
                           rational_from_double(lat.prices[par]);
            cur = par;
        }
    }
    return coef;
}

// gain coefficients for an arbitrary node (path from root)
std::vector<Rational> node_gain_coefficients(const MarketLattice& lat,
                                             std::size_t node) {
    std::vector<Rational> coef(lat.first_leaf(), 0);
    std::size_t cur = node;
    while (cur != 0) {
        std::size_t par = lat.parent(cur);
        coef[par] = rational_from_double(lat.prices[cur]) -
                    rational_from_double(lat.prices[par]);
        cur = par;
    }
    return coef;
}

struct GainLp {
    std::vector<std::vector<Rational>> A;
    std::vector<Rational> b;
    std::vector<Rational> c;
    bool split;  // variables are h = x+ - x-
    std::size_t n_internal;
};

// leaf-gain search LP: maximize total terminal gain subject to per-leaf
// gains >= 0 and the unit box (any witness rescales into the box).
GainLp build_gain_lp(const MarketLattice& lat, bool allow_short) {
    GainLp lp;
    lp.split = allow_short;
    std::size_t fl = lat.first_leaf();
    lp.n_internal = fl;
    std::size_t nv = allow_short ? 2 * fl : fl;
    auto coef = gain_coefficients(lat);

    auto var_coef = [&](const std::vector<Rational>& node_coef, std::size_t j) {
        if (!allow_short) return node_coef[j];
        return j < fl ? node_coef[j] : -node_coef[j - fl];
    };

    // -gain(leaf) <= 0
    for (std::size_t l = 0; l < lat.n_leaves(); ++l) {
        std::vector<Rational> row(nv, 0);
        for (std::size_t j = 0; j < nv; ++j) row[j] = -var_coef(coef[l], j);
        lp.A.push_back(std::move(row));
        lp.b.push_back(0);
    }
    // box rows x_j <= 1
    for (std::size_t j = 0; j < nv; ++j) {
        std::vector<Rational> row(nv, 0);
        row[j] = 1;
        lp.A.push_back(std::move(row));
        lp.b.push_back(1);
    }
    // objective: sum of leaf gains
    lp.c.assign(nv, 0);
    for (std::size_t l = 0; l < lat.n_leaves(); ++l)
        for (std::size_t j = 0; j < nv; ++j) lp.c[j] += var_coef(coef[l], j);
    return lp;
}

std::optional<TreeStrategy> extract_witness(const MarketLattice& lat,
                                            const GainLp& lp, const LpResult& res,
                                            double holdings_offset) {
    if (res.status != LpResult::Status::Optimal || res.objective <= 0)
        return std::nullopt;
    TreeStrategy s;
    std::size_t fl = lp.n_internal;
    s.holdings.assign(fl, holdings_offset);
    for (std::size_t j = 0; j < fl; ++j) {
        Rational h = res.x[j];
        if (lp.split) h -= res.x[fl + j];
        s.holdings[j] += static_cast<double>(h);
    }
    auto coef = gain_coefficients(lat);
    s.leaf_gains.assign(lat.n_leaves(), 0.0);
    for (std::size_t l = 0; l < lat.n_leaves(); ++l) {
        double g = 0.0;
        for (std::size_t j = 0; j < fl; ++j)
            g += s.holdings[j] * static_cast<double>(coef[l][j]);
        s.leaf_gains[l] = g;
    }
    return s;
}

}  // namespace

std::optional<TreeStrategy> find_arbitrage(const MarketLattice& lat,
                                           bool constrained) {
    lat.validate();
    GainLp lp = build_gain_lp(lat, /*allow_short=*/!constrained);
    LpResult res = simplex_max(lp.A, lp.b, lp.c);
    return extract_witness(lat, lp, res, 0.0);
}

std::optional<TreeStrategy> find_dominating_strategy(const MarketLattice& lat,
                                                     bool constrained) {
    lat.validate();
    // Deviation from buy-and-hold: K = 1 + k. A dominance witness rescales
    // toward H = 1, which keeps K >= 0, so the same box works for both the
    // constrained and unconstrained searches (ND and ND_C coincide on finite
    // trees). The gains of k against the target S_T - S_0 are exactly the
    // plain arbitrage system in k.
    (void)constrained;
    GainLp lp = build_gain_lp(lat, /*allow_short=*/true);
    LpResult res = simplex_max(lp.A, lp.b, lp.c);
    return extract_witness(lat, lp, res, 1.0);
}

bool nupbr_holds(const MarketLattice& lat, bool constrained) {
    lat.validate();
    std::size_t fl = lat.first_leaf();
    bool split = !constrained;
    std::size_t nv = split ? 2 * fl : fl;

    auto var_coef = [&](const std::vector<Rational>& node_coef, std::size_t j) {
        if (!split) return node_coef[j];
        return j < fl ? node_coef[j] : -node_coef[j - fl];
    };

    std::vector<std::vector<Rational>> A;
    std::vector<Rational> b;
    // 1-admissibility: 1 + gain(v) >= 0 at every non-root node
    for (std::size_t v = 1; v < lat.n_nodes(); ++v) {
        auto coef = node_gain_coefficients(lat, v);
        std::vector<Rational> row(nv, 0);
        for (std::size_t j = 0; j < nv; ++j) row[j] = -var_coef(coef, j);
        A.push_back(std::move(row));
        b.push_back(1);
    }
    std::vector<Rational> c(nv, 0);
    auto leaf_coef = gain_coefficients(lat);
    for (std::size_t l = 0; l < lat.n_leaves(); ++l)
        for (std::size_t j = 0; j < nv; ++j) c[j] += var_coef(leaf_coef[l], j);

    LpResult res = simplex_max(A, b, c);
    return res.status == LpResult::Status::Optimal;
}

// ---------------------------------------------------------------------------
// Utility maximization (myopic CRRA recursion)
// ---------------------------------------------------------------------------

namespace {

struct NodeReturns {
    std::vector<double> r;      // gross return - 1 per child
    std::vector<double> p;      // reference probabilities
    double rmin = 0.0, rmax = 0.0;
};

NodeReturns node_returns(const MarketLattice& lat, std::size_t v) {
    NodeReturns nr;
    for (std::size_t j = 0; j < lat.branching; ++j) {
        std::size_t c = lat.child(v, j);
        nr.r.push_back(lat.prices[c] / lat.prices[v] - 1.0);
        nr.p.push_back(lat.ref_probs[c]);
    }
    nr.rmin = *std::min_element(nr.r.begin(), nr.r.end());
    nr.rmax = *std::max_element(nr.r.begin(), nr.r.end());
    return nr;
}

// maximize sum_j p_j w_j f(1 + pi r_j) by bisection on the strictly
// decreasing derivative; f is log or x^{1-gamma}/(1-gamma)
struct FractionOpt {
    double pi = 0.0;
    bool unbounded = false;
};

template <typename Deriv>
FractionOpt optimize_fraction(const NodeReturns& nr, bool constrained,
                              const Deriv& fprime) {
    FractionOpt out;
    bool has_up = nr.rmax > 0.0, has_down = nr.rmin < 0.0;
    if (!has_up && !has_down) return out;  // flat node: pi = 0 (minimum norm)
    if (!has_down && has_up) {
        out.unbounded = true;  // one-step arbitrage going long
        return out;
    }
    if (!has_up && has_down) {
        if (!constrained) {
            out.unbounded = true;  // arbitrage going short
            return out;
        }
        out.pi = 0.0;  // constrained boundary
        return out;
    }
    double lo = constrained ? 0.0 : -1.0 / nr.rmax;
    double hi = -1.0 / nr.rmin;
    if (constrained && fprime(0.0) <= 0.0) return out;  // pi* = 0
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (fprime(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    out.pi = 0.5 * (lo + hi);
    return out;
}

}  // namespace

UtilitySolution solve_constrained_utility(const MarketLattice& lat,
                                          const AgentProblem& agent) {
    lat.validate();
    if (!(agent.wealth > 0.0))
        throw std::invalid_argument("solve_constrained_utility: wealth must be > 0");
    if (agent.utility == AgentProblem::Utility::Power &&
        !(agent.gamma > 0.0 && agent.gamma < 1.0))
        throw std::invalid_argument("solve_constrained_utility: gamma in (0,1)");
    std::size_t fl = lat.first_leaf();
    std::size_t nn = lat.n_nodes();
    std::vector<double> weights(lat.n_leaves(), 1.0);
    if (!agent.leaf_weights.empty()) {
        if (agent.leaf_weights.size() != lat.n_leaves())
            throw std::invalid_argument("solve_constrained_utility: bad leaf weights");
        weights = agent.leaf_weights;
        for (double w : weights)
            if (!(w > 0.0))
                throw std::invalid_argument("solve_constrained_utility: weights > 0");
    }

    UtilitySolution sol;
    sol.fractions.assign(fl, 0.0);
    sol.holdings.assign(fl, 0.0);

    bool is_log = agent.utility == AgentProblem::Utility::Log;
    double gamma = agent.gamma;

    // backward recursion: log -> V(w) = C log w + B ; power -> A w^(1-g)/(1-g)
    std::vector<double> A(nn, 0.0), B(nn, 0.0), C(nn, 0.0);
    for (std::size_t l = 0; l < lat.n_leaves(); ++l) {
        A[fl + l] = weights[l];
        C[fl + l] = weights[l];
    }
    for (std::size_t v = fl; v-- > 0;) {
        NodeReturns nr = node_returns(lat, v);
        std::vector<double> cw(lat.branching), aw(lat.branching);
        for (std::size_t j = 0; j < lat.branching; ++j) {
            std::size_t c = lat.child(v, j);
            cw[j] = C[c];
            aw[j] = A[c];
        }
        FractionOpt opt;
        if (is_log) {
            opt = optimize_fraction(nr, agent.constrained, [&](double pi) {
                double d = 0.0;
                for (std::size_t j = 0; j < lat.branching; ++j)
                    d += nr.p[j] * cw[j] * nr.r[j] / (1.0 + pi * nr.r[j]);
                return d;
            });
        } else {
            opt = optimize_fraction(nr, agent.constrained, [&](double pi) {
                double d = 0.0;
                for (std::size_t j = 0; j < lat.branching; ++j)
                    d += nr.p[j] * aw[j] * nr.r[j] *
                         std::pow(1.0 + pi * nr.r[j], -gamma);
                return d;
            });
        }
        if (opt.unbounded) {
            sol.unbounded = true;
            sol.value = std::numeric_limits<double>::infinity();
            sol.arbitrage = find_arbitrage(lat, agent.constrained);
            return sol;
        }
        sol.fractions[v] = opt.pi;
        if (is_log) {
            double b = 0.0, cc = 0.0;
            for (std::size_t j = 0; j < lat.branching; ++j) {
                std::size_t c = lat.child(v, j);
                cc += nr.p[j] * cw[j];
                b += nr.p[j] * (B[c] + cw[j] * std::log1p(opt.pi * nr.r[j]));
            }
            C[v] = cc;
            B[v] = b;
        } else {
            double a = 0.0;
            for (std::size_t j = 0; j < lat.branching; ++j)
                a += nr.p[j] * aw[j] * std::pow(1.0 + opt.pi * nr.r[j], 1.0 - gamma);
            A[v] = a;
        }
    }

    // log value: C[0] = E[zeta] multiplies log(wealth), B[0] collects the
    // per-node optimized terms
    sol.value = is_log ? C[0] * std::log(agent.wealth) + B[0]
                       : A[0] * std::pow(agent.wealth, 1.0 - gamma) / (1.0 - gamma);

    // forward wealth propagation
    std::vector<double> wealth(nn, 0.0);
    wealth[0] = agent.wealth;
    for (std::size_t v = 0; v < fl; ++v) {
        NodeReturns nr = node_returns(lat, v);
        sol.holdings[v] = sol.fractions[v] * wealth[v] / lat.prices[v];
        for (std::size_t j = 0; j < lat.branching; ++j)
            wealth[lat.child(v, j)] = wealth[v] * (1.0 + sol.fractions[v] * nr.r[j]);
    }
    sol.leaf_wealth.assign(wealth.begin() + static_cast<std::ptrdiff_t>(fl),
                           wealth.end());
    return sol;
}

// ---------------------------------------------------------------------------
// Dual problem over the supermartingale-deflator cone
// ---------------------------------------------------------------------------

namespace {

struct NodeDualResult {
    bool infeasible = false;
    std::vector<double> rho;  // optimal child ratios
};

// Solve per node:
//   log:   max sum a_j log rho_j    s.t. sum p_j rho_j <= 1, sum p rho d <= 0
//   power: min sum b_j rho_j^(-s)   same constraints, s = 1/gamma - 1 > 0
// KKT gives rho_j = a_j / (p_j (mu + nu d_j)) (log) or the analogous power
// form; mu solves the mass constraint (monotone), nu >= 0 the drift one.
struct NodeDualProblem {
    std::vector<double> p, d, w;  // probs, price increments, positive weights
    bool is_log = true;
    double s = 0.0;  // power exponent parameter

    double rho_of(double mu, double nu, std::size_t j) const {
        double denom = mu + nu * d[j];
        if (is_log) return w[j] / denom;
        return std::pow(s * w[j] / denom, 1.0 / (1.0 + s));
    }
    double mass(double mu, double nu) const {
        double m = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) m += p[j] * rho_of(mu, nu, j);
        return m;
    }
    double drift(double mu, double nu) const {
        double g = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j)
            g += p[j] * rho_of(mu, nu, j) * d[j];
        return g;
    }
    // mu solving mass(mu, nu) = 1 for fixed nu
    double solve_mu(double nu) const {
        double lo = 0.0;
        for (std::size_t j = 0; j < d.size(); ++j)
            lo = std::max(lo, -nu * d[j]);
        double span = 1.0;
                        // bracket: mass decreases in mu from +inf to 0
        while (mass(lo + span, nu) > 1.0) span *= 2.0;
        double a = lo + span * 1e-18, b = lo + span;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (a + b);
            if (mass(mid, nu) > 1.0)
                a = mid;
            else
                b = mid;
        }
        return 0.5 * (a + b);
    }
};

NodeDualResult solve_node_dual(const NodeDualProblem& prob) {
    NodeDualResult out;
    double dmin = *std::min_element(prob.d.begin(), prob.d.end());
    double dmax = *std::max_element(prob.d.begin(), prob.d.end());
    bool flat = dmin == 0.0 && dmax == 0.0;
    if (!flat && dmin >= 0.0) {
        out.infeasible = true;  // strictly positive drift node: empty cone
        return out;
    }
    double mu0 = prob.solve_mu(0.0);
    double nu = 0.0, mu = mu0;
    if (!flat && prob.drift(mu0, 0.0) > 0.0) {
        // drift constraint binds: bracket nu by doubling
        double lo = 0.0, hi = 1.0;
        while (prob.drift(prob.solve_mu(hi), hi) > 0.0) {
            hi *= 2.0;
            if (hi > 1e18) break;
        }
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            if (prob.drift(prob.solve_mu(mid), mid) > 0.0)
                lo = mid;
            else
                hi = mid;
        }
        nu = 0.5 * (lo + hi);
        mu = prob.solve_mu(nu);
    }
    out.rho.resize(prob.p.size());
    for (std::size_t j = 0; j < prob.p.size(); ++j)
        out.rho[j] = prob.rho_of(mu, nu, j);
    return out;
}

}  // namespace

DualSolution solve_dual(const MarketLattice& lat, const AgentProblem& agent,
                        double y) {
    lat.validate();
    if (!(y > 0.0)) throw std::invalid_argument("solve_dual: y must be > 0");
    std::size_t fl = lat.first_leaf();
    std::size_t nn = lat.n_nodes();
    std::vector<double> weights(lat.n_leaves(), 1.0);
    if (!agent.leaf_weights.empty()) weights = agent.leaf_weights;
    bool is_log = agent.utility == AgentProblem::Utility::Log;
    double gamma = agent.gamma;
    double s = 1.0 / gamma - 1.0;

    // bottom-up aggregated weights:
    //   log:   W(v) = E_v[zeta]               (coefficient of log Y)
    //   power: K(v) = E_v[zeta^{1/gamma} Y^{-s}-recursion]
    std::vector<double> W(nn, 0.0);
    for (std::size_t l = 0; l < lat.n_leaves(); ++l)
        W[fl + l] = is_log ? weights[l] : std::pow(weights[l], 1.0 / gamma);

    DualSolution sol;
    sol.deflator.assign(nn, 1.0);
    std::vector<std::vector<double>> rho(fl);

    for (std::size_t v = fl; v-- > 0;) {
        NodeDualProblem prob;
        prob.is_log = is_log;
        prob.s = s;
        for (std::size_t j = 0; j < lat.branching; ++j) {
            std::size_t c = lat.child(v, j);
            prob.p.push_back(lat.ref_probs[c]);
            prob.d.push_back(lat.prices[c] - lat.prices[v]);
            prob.w.push_back(W[c]);
        }
        NodeDualResult res = solve_node_dual(prob);
        if (res.infeasible) {
            sol.infeasible = true;
            return sol;
        }
        rho[v] = res.rho;
        double agg = 0.0;
        for (std::size_t j = 0; j < lat.branching; ++j) {
            std::size_t c = lat.child(v, j);
            if (is_log)
                agg += prob.p[j] * W[c];
            else
                agg += prob.p[j] * W[c] * std::pow(res.rho[j], -s);
        }
        W[v] = agg;
    }

    // assemble the deflator path and the dual value
    for (std::size_t v = 0; v < fl; ++v)
        for (std::size_t j = 0; j < lat.branching; ++j)
            sol.deflator[lat.child(v, j)] = sol.deflator[v] * rho[v][j];

    if (is_log) {
        // v(y) = E[zeta log(zeta)] - E[zeta](1 + log y) - max E[zeta log Y]
        double ezeta = 0.0, ezlogz = 0.0, ezlogy = 0.0;
        for (std::size_t l = 0; l < lat.n_leaves(); ++l) {
            double pl = 1.0;
            std::size_t cur = fl + l;
            while (cur != 0) {
                pl *= lat.ref_probs[cur];
                cur = lat.parent(cur);
            }
            ezeta += pl * weights[l];
            ezlogz += pl * weights[l] * std::log(weights[l]);
            ezlogy += pl * weights[l] * std::log(sol.deflator[fl + l]);
        }
        sol.value = ezlogz - ezeta * (1.0 + std::log(y)) - ezlogy;
    } else {
        sol.value = gamma / (1.0 - gamma) * std::pow(y, -s) * W[0];
    }
    return sol;
}

double conjugacy_gap(const MarketLattice& lat, const AgentProblem& agent) {
    UtilitySolution primal = solve_constrained_utility(lat, agent);
    if (primal.unbounded) {
        DualSolution d = solve_dual(lat, agent, 1.0);
        return d.infeasible ? 0.0 : std::numeric_limits<double>::infinity();
    }
    // closed-form infimum of v(y) + x y over y
    double x = agent.wealth;
    bool is_log = agent.utility == AgentProblem::Utility::Log;
    if (is_log) {
        // v(y) = k0 - E[zeta] log y; minimizer y* = E[zeta]/x
        DualSolution d1 = solve_dual(lat, agent, 1.0);
        if (d1.infeasible) return std::numeric_limits<double>::infinity();
        double ezeta = 0.0;
        std::size_t fl = lat.first_leaf();
        for (std::size_t l = 0; l < lat.n_leaves(); ++l) {
            double pl = 1.0;
            std::size_t cur = fl + l;
            while (cur != 0) {
                pl *= lat.ref_probs[cur];
                cur = lat.parent(cur);
            }
            pl *= agent.leaf_weights.empty() ? 1.0 : agent.leaf_weights[l];
            ezeta += pl;
        }
        double ystar = ezeta / x;
        DualSolution d = solve_dual(lat, agent, ystar);
        return std::abs(primal.value - (d.value + x * ystar));
    }
    double s = 1.0 / agent.gamma - 1.0;
    DualSolution d1 = solve_dual(lat, agent, 1.0);
    if (d1.infeasible) return std::numeric_limits<double>::infinity();
    double cst = d1.value;  // v(y) = cst * y^{-s}
    double ystar = std::pow(s * cst / x, 1.0 / (1.0 + s));
    DualSolution d = solve_dual(lat, agent, ystar);
    return std::abs(primal.value - (d.value + x * ystar));
}

bool is_c_maximal(const MarketLattice& lat, const UtilitySolution& sol) {
    if (sol.unbounded) return false;
    std::size_t fl = lat.first_leaf();
    // deviation k from the solved holdings; K = holdings + k must stay >= 0,
    // gains of k must be >= 0 at every leaf, improving iff total gain > 0
    std::size_t nv = 2 * fl;  // k = k+ - k-
    auto coef = gain_coefficients(lat);
    std::vector<std::vector<Rational>> A;
    std::vector<Rational> b;
    for (std::size_t l = 0; l < lat.n_leaves(); ++l) {
        std::vector<Rational> row(nv, 0);
        for (std::size_t j = 0; j < fl; ++j) {
            row[j] = -coef[l][j];
            row[fl + j] = coef[l][j];
        }
        A.push_back(std::move(row));
        b.push_back(0);
    }
    // boxes: k+ <= 1, k- <= min(holdings, 1)
    for (std::size_t j = 0; j < nv; ++j) {
        std::vector<Rational> row(nv, 0);
        row[j] = 1;
        A.push_back(std::move(row));
        Rational ub = 1;
        if (j >= fl) {
            Rational h = rational_from_double(sol.holdings[j - fl]);
            ub = std::min(ub, h);
        }
        b.push_back(ub);
    }
    std::vector<Rational> c(nv, 0);
    for (std::size_t l = 0; l < lat.n_leaves(); ++l)
        for (std::size_t j = 0; j < fl; ++j) {
            c[j] += coef[l][j];
            c[fl + j] -= coef[l][j];
        }
    LpResult res = simplex_max(A, b, c);
    if (res.status != LpResult::Status::Optimal) return false;
    return res.objective <= rational_from_double(1e-8);
}

// ---------------------------------------------------------------------------
// Duality verification
// ---------------------------------------------------------------------------

DualityRow verify_duality_instance(const MarketLattice& lat, const std::string& id) {
    DualityRow row;
    row.instance_id = id;
    row.m_nonempty = find_martingale_measure(lat).has_value();
    row.mloc_nonempty = find_local_martingale_measure(lat).has_value();
    row.msup_nonempty = find_supermartingale_measure(lat).has_value();
    row.dloc_nonempty = has_local_martingale_deflator(lat);
    row.dsup_nonempty = has_supermartingale_deflator(lat);
    row.na = !find_arbitrage(lat, false).has_value();
    row.na_c = !find_arbitrage(lat, true).has_value();
    row.nd = !find_dominating_strategy(lat, false).has_value();
    row.nd_c = !find_dominating_strategy(lat, true).has_value();
    row.nupbr = nupbr_holds(lat, false);
    row.nupbr_c = nupbr_holds(lat, true);

    bool nflvr = row.na && row.nupbr;
    bool nflvr_c = row.na_c && row.nupbr_c;
    row.consistent = (row.nupbr == row.dloc_nonempty) &&
                     (row.nupbr_c == row.dsup_nonempty) &&
                     (nflvr == row.mloc_nonempty) &&
                     (nflvr_c == row.msup_nonempty) &&
                     ((nflvr && row.nd) == row.m_nonempty) &&
                     (row.m_nonempty == row.mloc_nonempty);  // finite tree: M = M_loc
    return row;
}

std::vector<DualityRow> verify_duality_theorem(const LatticeFamilyConfig& cfg) {
    std::vector<DualityRow> rows;
    auto add = [&](const MarketLattice& lat, const std::string& id) {
        rows.push_back(verify_duality_instance(lat, id));
    };

    // one-period and iid multi-period binomials
    for (double u : cfg.up_factors)
        for (double d : cfg.down_factors) {
            if (d > u) continue;
            for (std::size_t depth = 1; depth <= cfg.max_depth; ++depth) {
                MarketLattice lat =
                    MarketLattice::iid_tree(1.0, {u, d}, {0.5, 0.5}, depth);
                std::ostringstream name;
                name << "bin_u" << u << "_d" << d << "_T" << depth;
                add(lat, name.str());
            }
        }

    // one- and two-period iid trinomials
    for (double u : cfg.up_factors)
        for (double m : cfg.down_factors)
            for (double d : cfg.down_factors) {
                if (!(d <= m && m <= u)) continue;
                for (std::size_t depth = 1; depth <= std::min<std::size_t>(2, cfg.max_depth);
                     ++depth) {
                    MarketLattice lat = MarketLattice::iid_tree(
                        1.0, {u, m, d}, {0.3, 0.4, 0.3}, depth);
                    std::ostringstream name;
                    name << "tri_u" << u << "_m" << m << "_d" << d << "_T" << depth;
                    add(lat, name.str());
                }
            }

    // level-heterogeneous two-period binomials on a coarse grid
    std::vector<double> coarse{0.5, 0.75, 1.0, 1.5, 2.0};
    for (double u1 : coarse)
        for (double d1 : coarse)
            for (double u2 : coarse)
                for (double d2 : coarse) {
                    if (d1 > u1 || d2 > u2) continue;
                    MarketLattice lat;
                    lat.depth = 2;
                    lat.branching = 2;
                    lat.prices.assign(7, 0.0);
                    lat.ref_probs.assign(7, 0.5);
                    lat.ref_probs[0] = 1.0;
                    lat.prices[0] = 1.0;
                    lat.prices[1] = u1;
                    lat.prices[2] = d1;
                    lat.prices[3] = u1 * u2;
                    lat.prices[4] = u1 * d2;
                    lat.prices[5] = d1 * u2;
                    lat.prices[6] = d1 * d2;
                    std::ostringstream name;
                    name << "mix_" << u1 << "_" << d1 << "_" << u2 << "_" << d2;
                    add(lat, name.str());
                }
    return rows;
}

// ---------------------------------------------------------------------------
// Tatonnement equilibrium
// ---------------------------------------------------------------------------

namespace {

// Demand fractions for tatonnement. Off-equilibrium prices can sit in the
// arbitrage region where the exact demand is infinite; those nodes get a
// capped fraction so the price adjustment pushes them back out.
std::vector<double> demand_fractions(const MarketLattice& lat,
                                     const AgentProblem& agent, double cap) {
    std::size_t fl = lat.first_leaf();
    std::size_t nn = lat.n_nodes();
    std::vector<double> weights(lat.n_leaves(), 1.0);
    if (!agent.leaf_weights.empty()) weights = agent.leaf_weights;
    bool is_log = agent.utility == AgentProblem::Utility::Log;
    double gamma = agent.gamma;

    std::vector<double> A(nn, 0.0), C(nn, 0.0), pi(fl, 0.0);
    for (std::size_t l = 0; l < lat.n_leaves(); ++l) {
        A[fl + l] = is_log ? 0.0 : weights[l];
        C[fl + l] = weights[l];
    }
    for (std::size_t v = fl; v-- > 0;) {
        NodeReturns nr = node_returns(lat, v);
        std::vector<double> cw(lat.branching), aw(lat.branching);
        for (std::size_t j = 0; j < lat.branching; ++j) {
            std::size_t c = lat.child(v, j);
            cw[j] = C[c];
            aw[j] = A[c];
        }
        FractionOpt opt;
        if (is_log) {
            opt = optimize_fraction(nr, true, [&](double p) {
                double d = 0.0;
                for (std::size_t j = 0; j < lat.branching; ++j)
                    d += nr.p[j] * cw[j] * nr.r[j] / (1.0 + p * nr.r[j]);
                return d;
            });
        } else {
            opt = optimize_fraction(nr, true, [&](double p) {
                double d = 0.0;
                for (std::size_t j = 0; j < lat.branching; ++j)
                    d += nr.p[j] * aw[j] * nr.r[j] *
                         std::pow(1.0 + p * nr.r[j], -gamma);
                return d;
            });
        }
        pi[v] = opt.unbounded ? cap : opt.pi;
        double cc = 0.0, a = 0.0;
        for (std::size_t j = 0; j < lat.branching; ++j) {
            std::size_t c = lat.child(v, j);
            cc += nr.p[j] * cw[j];
            if (!is_log)
                a += nr.p[j] * aw[j] *
                     std::pow(std::max(1.0 + pi[v] * nr.r[j], 1e-12), 1.0 - gamma);
        }
        C[v] = cc;
        A[v] = a;
    }
    return pi;
}

}  // namespace

EquilibriumResult solve_equilibrium(const MarketLattice& lat,
                                    std::vector<EquilibriumAgent> agents,
                                    const TatonnementConfig& cfg) {
    lat.validate();
    if (agents.empty() || agents.size() > 3)
        throw std::invalid_argument("solve_equilibrium: need 1..3 agents");
    double total_share = 0.0;
    for (const auto& a : agents) total_share += a.endowment_share;
    if (std::abs(total_share - 1.0) > 1e-12)
        throw std::invalid_argument("solve_equilibrium: endowment shares must sum to 1");

    EquilibriumResult out;
    MarketLattice work = lat;
    std::size_t fl = lat.first_leaf();

    // initial interior prices: reference-measure expectations of dividends
    for (std::size_t v = fl; v-- > 0;) {
        double e = 0.0;
        for (std::size_t j = 0; j < lat.branching; ++j) {
            std::size_t c = lat.child(v, j);
            e += work.ref_probs[c] * work.prices[c];
        }
        work.prices[v] = e;
    }

    std::vector<std::vector<double>> holdings(agents.size());
    std::vector<double> step(fl, cfg.damping), z_prev(fl, 0.0);
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        double s0 = work.prices[0];
        double max_excess = 0.0;
        std::vector<double> excess(fl, -1.0);
        for (std::size_t k = 0; k < agents.size(); ++k) {
            std::vector<double> pi = demand_fractions(work, agents[k].problem, 1e3);
            // CRRA demands: wealth fractions, so holdings scale with wealth
            std::vector<double> wealth(work.n_nodes(), 0.0);
            wealth[0] = agents[k].endowment_share * s0;
            holdings[k].assign(fl, 0.0);
            for (std::size_t v = 0; v < fl; ++v) {
                holdings[k][v] = pi[v] * wealth[v] / work.prices[v];
                NodeReturns nr = node_returns(work, v);
                for (std::size_t j = 0; j < work.branching; ++j)
                    wealth[work.child(v, j)] = wealth[v] * (1.0 + pi[v] * nr.r[j]);
            }
            for (std::size_t v = 0; v < fl; ++v) excess[v] += holdings[k][v];
        }
        for (std::size_t v = 0; v < fl; ++v)
            max_excess = std::max(max_excess, std::abs(excess[v]));
        out.iterations = it + 1;
        out.max_excess = max_excess;
        if (max_excess < cfg.tolerance) {
            out.converged = true;
            break;
        }
        // bounded relative steps; a sign flip in a node's excess demand
        // halves that node's step, which kills the two-cycle oscillation
        for (std::size_t v = 0; v < fl; ++v) {
            double z = excess[v];
            if (z * z_prev[v] < 0.0)
                step[v] *= 0.5;
            else
                step[v] = std::min(step[v] * 1.05, cfg.damping);
            z_prev[v] = z;
            work.prices[v] *= 1.0 + step[v] * z / (1.0 + std::abs(z));
        }
    }
    out.prices = work.prices;
    out.holdings = holdings;
    for (const auto& a : agents)
        out.wealths.push_back(a.endowment_share * work.prices[0]);
    return out;
}

}  // namespace martlab
