#pragma once

#include <vector>

#include "martlab/lattice.hpp"

namespace martlab {

// Exact simplex for max c.x s.t. A x <= b, x >= 0 with b >= 0 (the callers
// arrange a feasible origin, so no phase 1 is needed). Bland's rule ensures
// termination; rational arithmetic makes the verdicts exact, which is what
// lets the duality verifier demand literally zero mismatches.
struct LpResult {
    enum class Status { Optimal, Unbounded };
    Status status = Status::Optimal;
    Rational objective = 0;
    std::vector<Rational> x;
};

LpResult simplex_max(const std::vector<std::vector<Rational>>& A,
                     const std::vector<Rational>& b,
                     const std::vector<Rational>& c);

}  // namespace martlab
