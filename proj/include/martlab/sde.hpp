#pragma once

#include "martlab/grid.hpp"
#include "martlab/rng.hpp"

namespace martlab {

// Brownian path on the grid: W(0) = 0, independent N(0, dt) increments.
Path sample_brownian(const GridPtr& grid, const RandomSource& src,
                     uint64_t path_index, uint32_t domain = rng_domain::kBrownian,
                     uint32_t substream = rng_sub::kCoord0);

struct XPathPair {
    Path x;  // solution of dX = -X^2 dW, X0 = 1; strictly positive
    Path w;  // the driving Brownian motion, recovered pathwise
};

// Exact simulation of dX = -X^2 dW, X0 = 1, as the reciprocal norm of
// shifted 3-d Brownian motion: X_t = 1 / |(1 + B1_t, B2_t, B3_t)|.
// The scalar driver is recovered from the integrated form of dW = -dX/X^2,
//   W_t = 1/X_t - 1 - int_0^t X_s ds   (trapezoidal time integral),
// so that (X, W) satisfy the SDE relation on the grid. X never explodes
// under the reference measure (Bessel(3) from 1 a.s. avoids 0).
XPathPair simulate_X(const GridPtr& grid, const RandomSource& src,
                     uint64_t path_index);

// int_0^t X dW via the log identity  log X_t + int X dW + int X^2 ds / 2 = 0.
// This is the preferred route for exponents of stochastic exponentials in X;
// direct discretized integration is kept as a test oracle.
Path x_dw_integral_via_log(const Path& x);

}  // namespace martlab
