#include "martlab/equilibrium.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "martlab/calculus.hpp"

namespace martlab {

UtilitySpec UtilitySpec::log_utility() { return UtilitySpec(Kind::Log, 0.0); }

UtilitySpec UtilitySpec::power(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("UtilitySpec::power: gamma must be in (0,1)");
    return UtilitySpec(Kind::Power, gamma);
}

UtilitySpec UtilitySpec::weighted_log(std::vector<double> weights) {
    UtilitySpec u(Kind::Log, 0.0);
    for (double w : weights)
        if (!(w > 0.0))
            throw std::invalid_argument("UtilitySpec: weights must be positive");
    u.weights_ = std::move(weights);
    return u;
}

double UtilitySpec::value(std::size_t path, double x) const {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    double w = weight(path);
    switch (kind_) {
        case Kind::Log:
            return w * std::log(x);
        case Kind::Power:
        case Kind::Representative:
            return w * std::pow(x, 1.0 - gamma_) / (1.0 - gamma_);
    }
    return 0.0;
}

double UtilitySpec::marginal(std::size_t path, double x) const {
    if (!(x > 0.0)) throw std::invalid_argument("UtilitySpec: x must be positive");
    double w = weight(path);
    switch (kind_) {
        case Kind::Log:
            return w / x;
        case Kind::Power:
        case Kind::Representative:
            return w * std::pow(x, -gamma_);
    }
    return 0.0;
}

double UtilitySpec::inverse_marginal(std::size_t path, double y) const {
    if (!(y > 0.0)) throw std::invalid_argument("UtilitySpec: y must be positive");
    double w = weight(path);
    switch (kind_) {
        case Kind::Log:
            return w / y;
        case Kind::Power:
        case Kind::Representative:
            return std::pow(y / w, -1.0 / gamma_);
    }
    return 0.0;
}

UtilitySpec representative_utility(double gamma, std::span<const double> z_T,
                                   std::span<const double> s_T) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("representative_utility: gamma must be in (0,1)");
    if (z_T.size() != s_T.size() || z_T.empty())
        throw std::invalid_argument("representative_utility: bad sample sizes");
    UtilitySpec u(UtilitySpec::Kind::Representative, gamma);
    u.weights_.resize(z_T.size());
    for (std::size_t i = 0; i < z_T.size(); ++i) {
        if (!(z_T[i] > 0.0 && s_T[i] > 0.0))
            throw std::invalid_argument(
                "representative_utility: Z_T and S_T must be positive");
        u.weights_[i] = z_T[i] * std::pow(s_T[i], gamma);
    }
    return u;
}

OptimalityGap optimality_gap(const UtilitySpec& u, std::span<const double> x_T,
                             std::span<const double> s_T,
                             std::span<const double> z_T) {
    if (x_T.size() != s_T.size() || x_T.size() != z_T.size() || x_T.empty())
        throw std::invalid_argument("optimality_gap: mismatched samples");
    OptimalityGap out;
    Accumulator du, dz;
    for (std::size_t i = 0; i < x_T.size(); ++i) {
        if (!(x_T[i] > 0.0)) {
            ++out.excluded;  // U(x) = -infinity for x <= 0
            continue;
        }
        double ux = u.value(i, x_T[i]);
        double us = u.value(i, s_T[i]);
        du.add(ux - us);
        dz.add(z_T[i] * (x_T[i] - s_T[i]));
        // pathwise concavity: U(X) <= U(S) + U'(S)(X - S), with U'(S_T)=Z_T
        // for the representative utility
        double rhs = us + u.marginal(i, s_T[i]) * (x_T[i] - s_T[i]);
        if (ux > rhs + 1e-9 * (1.0 + std::abs(rhs))) ++out.chain_violations;
    }
    out.utility_gap = du.estimate();
    out.deflated_gap = dz.estimate();
    return out;
}

NegishiWeights negishi_weights(std::span<const double> z_T,
                               const std::vector<AgentOutcome>& agents) {
    NegishiWeights w;
    w.lambda.resize(agents.size());
    for (std::size_t k = 0; k < agents.size(); ++k) {
        const AgentOutcome& a = agents[k];
        if (a.terminal_wealth.size() != z_T.size())
            throw std::invalid_argument("negishi_weights: sample size mismatch");
        w.lambda[k].resize(z_T.size());
        for (std::size_t i = 0; i < z_T.size(); ++i) {
            if (!(a.terminal_wealth[i] > 0.0))
                throw std::invalid_argument(
                    "negishi_weights: nonpositive wealth, agent " +
                    std::to_string(k) + " path " + std::to_string(i));
            w.lambda[k][i] = z_T[i] / a.utility.marginal(i, a.terminal_wealth[i]);
        }
    }
    return w;
}

Allocation aggregate_allocation(std::span<const double> lambda, double x,
                                const std::vector<AgentOutcome>& agents,
                                std::size_t path) {
    std::size_t n = agents.size();
    if (lambda.size() != n || n == 0)
        throw std::invalid_argument("aggregate_allocation: bad agent count");
    if (!(x > 0.0))
        throw std::invalid_argument("aggregate_allocation: x must be positive");
    for (double l : lambda)
        if (!(l > 0.0))
            throw std::invalid_argument("aggregate_allocation: weights must be positive");

    Allocation out;
    out.c.resize(n);
    if (n == 1) {
        out.c[0] = x;
        out.multiplier = lambda[0] * agents[0].utility.marginal(path, x);
        return out;
    }
    auto excess = [&](double mu) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            s += agents[k].utility.inverse_marginal(path, mu / lambda[k]);
        return s - x;
    };
    // bracket: at mu_lo some c_k = x (excess >= 0); at mu_hi all c_k <= x/n
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        lo = std::min(lo, lambda[k] * agents[k].utility.marginal(path, x));
        hi = std::max(hi, lambda[k] * agents[k].utility.marginal(
                              path, x / static_cast<double>(n)));
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        if (excess(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    out.multiplier = 0.5 * (lo + hi);
    for (std::size_t k = 0; k < n; ++k)
        out.c[k] = agents[k].utility.inverse_marginal(path, out.multiplier / lambda[k]);
    return out;
}

double aggregate_utility_value(std::span<const double> lambda, double x,
                               const std::vector<AgentOutcome>& agents,
                               std::size_t path) {
    Allocation a = aggregate_allocation(lambda, x, agents, path);
    double v = 0.0;
    for (std::size_t k = 0; k < agents.size(); ++k)
        v += lambda[k] * agents[k].utility.value(path, a.c[k]);
    return v;
}

bool AggregationReport::all_upper_ci_nonpositive(double level, double tol) const {
    for (const auto& g : candidate_gaps)
        if (g.ci(level).hi > tol) return false;
    return true;
}

AggregationReport verify_aggregation(
    const NegishiWeights& weights, std::span<const double> z_T,
    std::span<const double> s_T, const std::vector<AgentOutcome>& agents,
    const std::vector<std::vector<double>>& candidate_wealths) {
    std::size_t n_paths = z_T.size();
    std::size_t n_agents = agents.size();
    if (weights.lambda.size() != n_agents)
        throw std::invalid_argument("verify_aggregation: weight/agent mismatch");

    AggregationReport rep;
    std::vector<double> lam(n_agents);

    // round trip: allocation at total wealth S_T recovers Xhat exactly and
    // the multiplier equals Z_T
    for (std::size_t i = 0; i < n_paths; ++i) {
        for (std::size_t k = 0; k < n_agents; ++k) lam[k] = weights.lambda[k][i];
        Allocation a = aggregate_allocation(lam, s_T[i], agents, i);
        bool ok = std::abs(a.multiplier - z_T[i]) <= 1e-8 * (1.0 + z_T[i]);
        for (std::size_t k = 0; k < n_agents; ++k) {
            double resid = std::abs(a.c[k] - agents[k].terminal_wealth[i]);
            rep.max_roundtrip_residual = std::max(rep.max_roundtrip_residual, resid);
            if (resid > 1e-10 * (1.0 + agents[k].terminal_wealth[i])) ok = false;
        }
        if (!ok) ++rep.roundtrip_failures;
    }

    for (const auto& x_col : candidate_wealths) {
        if (x_col.size() != n_paths)
            throw std::invalid_argument("verify_aggregation: bad candidate column");
        Accumulator gap;
        for (std::size_t i = 0; i < n_paths; ++i) {
            if (!(x_col[i] > 0.0)) continue;  // -infinity convention
            for (std::size_t k = 0; k < n_agents; ++k) lam[k] = weights.lambda[k][i];
            double ux = aggregate_utility_value(lam, x_col[i], agents, i);
            double us = aggregate_utility_value(lam, s_T[i], agents, i);
            gap.add(ux - us);
            double rhs = us + z_T[i] * (x_col[i] - s_T[i]);
            if (ux > rhs + 1e-9 * (1.0 + std::abs(rhs))) ++rep.chain_violations;
        }
        rep.candidate_gaps.push_back(gap.estimate());
    }
    return rep;
}

PatchedDeflator patch_deflators(const std::vector<Path>& holdings,
                                const std::vector<Path>& integrands) {
    if (holdings.empty() || holdings.size() != integrands.size())
        throw std::invalid_argument("patch_deflators: agent count mismatch");
    const GridPtr& grid = holdings[0].grid();
    std::size_t np = grid->n_points();
    for (std::size_t k = 0; k < holdings.size(); ++k) {
        require_same_grid(holdings[k], holdings[0], "patch_deflators");
        require_same_grid(integrands[k], holdings[0], "patch_deflators");
    }

    PatchedDeflator out;
    out.selector.resize(np - 1);
    std::vector<double> n_vals(np, 0.0);
    for (std::size_t s = 0; s + 1 < np; ++s) {
        std::size_t chosen = kNever;
        for (std::size_t k = 0; k < holdings.size(); ++k) {
            if (holdings[k].value_unchecked(s) > 0.0) {
                chosen = k;
                break;
            }
        }
        if (chosen == kNever)
            throw std::invalid_argument(
                "patch_deflators: no agent holds at step " + std::to_string(s) +
                " (market clearing violated)");
        out.selector[s] = chosen;
        const Path& nk = integrands[chosen];
        n_vals[s + 1] = n_vals[s] + (nk.value_unchecked(s + 1) - nk.value_unchecked(s));
    }
    out.integrand = Path(grid, std::move(n_vals));
    std::vector<double> neg(np);
    for (std::size_t i = 0; i < np; ++i) neg[i] = -out.integrand.value_unchecked(i);
    out.deflator = stochastic_exponential(Path(grid, std::move(neg)));
    return out;
}

}  // namespace martlab
