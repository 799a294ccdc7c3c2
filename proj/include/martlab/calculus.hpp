#pragma once

#include <vector>

#include "martlab/grid.hpp"

namespace martlab {

// Grid-adapted holdings in the risky asset. When `constrained` is set the
// short-sale ban H >= 0 is a contract checked by wealth_process.
struct Strategy {
    Path holdings;
    bool constrained = true;
    double admissibility_floor = 0.0;  // a in "(H.S)_t >= -a"
};

// Left-endpoint (predictable) stochastic integral
//   (h . s)_t = sum_i  h(t_i) (s(t_{i+1}) - s(t_i)),   value 0 at t = 0.
Path ito_integral(const Path& integrand, const Path& integrator);

// Cumulative sum of squared increments.
Path quadratic_variation(const Path& x);

// E(m)_t = exp(m_t - [m]_t / 2) for m with m(0) = 0. Strictly positive at
// every finite sample; an exploded input propagates its explosion index.
Path stochastic_exponential(const Path& m);

// Trapezoidal time integral int_0^t f ds.
Path time_integral(const Path& f);

struct WealthResult {
    Path wealth;
    bool floor_respected = true;      // 1 + (H.S) >= 1 - a pathwise
    std::size_t first_violation = kNever;
};

// x0 + (H . S); throws if a constrained strategy carries a negative
// holdings sample anywhere on the grid.
WealthResult wealth_process(double x0, const Strategy& strategy, const Path& price);

// Self-financing constant-fraction wealth: X_{i+1} = X_i (1 + pi dS/S),
// X_0 = x0. This is the wealth of H_t = pi X_t / S_t, rebalanced on the grid.
Path constant_fraction_wealth(double x0, double fraction, const Path& price);

// Holdings path of the constant-fraction strategy (pi X / S).
Strategy constant_fraction_strategy(double x0, double fraction, const Path& price);

}  // namespace martlab
