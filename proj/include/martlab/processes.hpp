#pragma once

#include <cstdint>

#include "martlab/grid.hpp"
#include "martlab/rng.hpp"
#include "martlab/sde.hpp"

namespace martlab {

// P(inf_{0<=t<=T} W_t <= -1) = 2 Phi(-1/sqrt(T)) by the reflection principle.
double hitting_prob_p(double horizon);

// Parameters of the stopped-density construction: threshold defaults to
// 1 + 1/p(T), the level whose first crossing by L defines tau.
struct PropParams {
    double horizon = 1.0;
    double beta = 2.0;
    double threshold = 0.0;  // 0 -> computed as 1 + 1/p(T)
    GridPtr grid;

    static PropParams make(double horizon, double beta, std::size_t n_steps);
    void validate() const;
};

// L_t = E(-beta X . W) / E(-X . W)
//     = exp(-(beta-1) int X dW - (beta^2-1)/2 int X^2 ds),
// computed through the log identity int X dW = -log X - int X^2 ds / 2,
// which collapses to the measure-free form
//     L_t = X_t^{beta-1} exp(-beta(beta-1)/2 int_0^t X^2 ds).
Path likelihood_ratio_L(const Path& x, double beta);

// Same quantity with int X dW supplied explicitly (test oracle: pass the
// direct discretized stochastic integral instead of the log route).
Path likelihood_ratio_L_from_integral(const Path& x, const Path& x_dw, double beta);

// First grid index with L >= threshold, kNever if none.
std::size_t stopping_tau_index(const Path& l, double threshold);
// Corresponding grid time, +infinity if never.
double stopping_tau(const Path& l, double threshold);

enum class ExampleVariant { ExampleOne, ExampleTwo };

// One simulated realization of the Section-5 scenarios under the reference
// measure. Z_primary is the strict-local-martingale deflator (Z^(1), or the
// Example-2 Z); Z_secondary the true-martingale one (Z^(beta) / Z^sup).
struct ScenarioRealization {
    Path x;            // dX = -X^2 dW, X0 = 1 (never stopped)
    Path w;            // driving Brownian motion
    Path l;            // likelihood ratio, valid up to (and at) tau
    Path z_primary;
    Path z_secondary;
    Path s;            // price: 1 / Z_primary
    std::size_t tau_index = kNever;
    double tau = 0.0;  // +infinity if never fired
    double q_at_tau = 0.0;  // int_0^{T ^ tau} X^2 ds
};

ScenarioRealization build_example_one(const PropParams& params,
                                      const RandomSource& src,
                                      uint64_t path_index);

ScenarioRealization build_example_two(const PropParams& params,
                                      const RandomSource& src,
                                      uint64_t path_index);

}  // namespace martlab
