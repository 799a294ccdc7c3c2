#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "martlab/grid.hpp"
#include "martlab/stats.hpp"

namespace martlab {

// Stochastic utility evaluated per path. Weights multiply the base utility:
// the representative kind carries w_i = Z_T S_T^gamma on each path, so that
// U(x) = Z_T S_T^gamma x^(1-gamma) / (1-gamma) and U'(S_T) = Z_T.
class UtilitySpec {
  public:
    enum class Kind { Log, Power, Representative };

    static UtilitySpec log_utility();
    static UtilitySpec power(double gamma);
    static UtilitySpec weighted_log(std::vector<double> weights);

    Kind kind() const { return kind_; }
    double gamma() const { return gamma_; }

    double value(std::size_t path, double x) const;
    double marginal(std::size_t path, double x) const;
    double inverse_marginal(std::size_t path, double y) const;

    friend UtilitySpec representative_utility(double gamma,
                                              std::span<const double> z_T,
                                              std::span<const double> s_T);

  private:
    UtilitySpec(Kind k, double g) : kind_(k), gamma_(g) {}
    double weight(std::size_t path) const {
        return weights_.empty() ? 1.0 : weights_[path];
    }
    Kind kind_;
    double gamma_ = 0.0;
    std::vector<double> weights_;
};

// U(x) = Z_T S_T^gamma x^(1-gamma) / (1-gamma); requires gamma in (0,1) and
// strictly positive per-path Z_T, S_T.
UtilitySpec representative_utility(double gamma, std::span<const double> z_T,
                                   std::span<const double> s_T);

struct OptimalityGap {
    McEstimate utility_gap;   // E[U(X_T)] - E[U(S_T)]
    McEstimate deflated_gap;  // E[Z_T X_T] - E[Z_T S_T]
    std::size_t excluded = 0; // candidates with nonpositive terminal wealth
    std::size_t chain_violations = 0;  // pathwise concavity chain failures
};

// Estimates both gaps in the concavity chain
//   E[U(X_T)] <= E[U(S_T)] + E[Z_T X_T] - E[Z_T S_T] <= E[U(S_T)].
OptimalityGap optimality_gap(const UtilitySpec& u, std::span<const double> x_T,
                             std::span<const double> s_T,
                             std::span<const double> z_T);

// Stochastic Negishi weights lambda_k = Z_T / U_k'(Xhat_T^k), one per agent
// per path; all strictly positive.
struct NegishiWeights {
    std::vector<std::vector<double>> lambda;  // [agent][path]
};

struct AgentOutcome {
    UtilitySpec utility;
    std::vector<double> terminal_wealth;  // Xhat_T per path, > 0
};

NegishiWeights negishi_weights(std::span<const double> z_T,
                               const std::vector<AgentOutcome>& agents);

struct Allocation {
    std::vector<double> c;  // per agent
    double multiplier = 0.0;
};

// Solves x = sum_k c_k, lambda_k U_k'(c_k) = mu by monotone bisection on mu.
// Residual below 1e-10 in both the clearing and the first-order conditions.
Allocation aggregate_allocation(std::span<const double> lambda, double x,
                                const std::vector<AgentOutcome>& agents,
                                std::size_t path);

// Aggregate (sup-convolution) utility U(x; lambda) at one path.
double aggregate_utility_value(std::span<const double> lambda, double x,
                               const std::vector<AgentOutcome>& agents,
                               std::size_t path);

struct AggregationReport {
    std::vector<McEstimate> candidate_gaps;  // E[U(X;lambda)] - E[U(S;lambda)]
    std::size_t chain_violations = 0;
    std::size_t roundtrip_failures = 0;  // allocation at S_T != generating wealths
    double max_roundtrip_residual = 0.0;
    bool all_upper_ci_nonpositive(double level, double tol) const;
};

// Checks E[U(X_T;lambda)] <= E[U(S_T;lambda)] for each candidate terminal
// wealth column, the pathwise chain U(X;l) <= U(S;l) + Z_T (X - S), and the
// weight/allocation round trip at total wealth S_T.
AggregationReport verify_aggregation(
    const NegishiWeights& weights, std::span<const double> z_T,
    std::span<const double> s_T, const std::vector<AgentOutcome>& agents,
    const std::vector<std::vector<double>>& candidate_wealths);

// ---------------------------------------------------------------------------
// Deflator patching (the D_k construction): per grid cell pick the first
// agent with a positive holding and splice that agent's integrand increment.
// ---------------------------------------------------------------------------
struct PatchedDeflator {
    Path integrand;                     // N = sum 1_{D_k} . N^k
    Path deflator;                      // Y = E(-N)
    std::vector<std::size_t> selector;  // agent chosen per step
};

PatchedDeflator patch_deflators(const std::vector<Path>& holdings,
                                const std::vector<Path>& integrands);

}  // namespace martlab
