#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "martlab/grid.hpp"
#include "martlab/processes.hpp"
#include "martlab/rng.hpp"
#include "martlab/stats.hpp"

namespace martlab {

enum class MeasureTag { Reference, Follmer1, FollmerBeta, ExampleTwoTilde };

// Per-path stopping/explosion record. tau is the first crossing of the
// L-threshold; sigma the explosion time of the density. Both are +infinity
// when the event does not occur within the horizon.
struct PathMeta {
    double tau = std::numeric_limits<double>::infinity();
    std::size_t tau_index = kNever;
    bool tau_fired = false;
    double sigma = std::numeric_limits<double>::infinity();
    std::size_t sigma_index = kNever;
    bool exploded = false;       // explosion happened before tau and before T
    bool cutoff_hit = false;     // explosion declared by the near-zero cutoff
    double z_terminal = 0.0;     // density at T (meaningless if exploded)
    double q_at_stop = 0.0;      // int X^2 ds at min(tau, sigma, T)
};

class PathBundle {
  public:
    MeasureTag measure = MeasureTag::Reference;
    GridPtr grid;
    double beta = 0.0;
    double threshold = 0.0;
    uint64_t seed = 0;
    std::vector<PathMeta> meta;

    std::size_t n_paths() const { return meta.size(); }
    std::size_t explosion_count() const;
    std::size_t tau_fired_count() const;
};

struct FollmerConfig {
    PropParams params;
    bool bridge_correction = true;   // Brownian-bridge crossing of the 0 barrier
    double explosion_cutoff = 1e-6;  // declare explosion when 1 + W^(1) <= cutoff
    double du_target = 0.01;         // quadratic-variation resolution (beta stepper)
    double u_budget = 0.0;           // 0 -> derived from beta
    unsigned n_threads = 0;          // 0 -> hardware default

    double effective_u_budget() const;
};

// W_t - int_0^t theta ds (trapezoidal drift integral).
Path girsanov_shift(const Path& w, const Path& theta);

// ---------------------------------------------------------------------------
// Simulation directly under P^(1) (the Föllmer measure of Z^(1)).
//
// W^(1) is Brownian motion; X = 1/(1 + W^(1)) up to the first hit of zero by
// 1 + W^(1), which is the explosion time of Z^(1) when it beats tau. The
// threshold crossing of L uses plain first-grid-crossing; the 0 barrier gets
// a bridge correction (probability exp(-2ab/dt) per step).
// ---------------------------------------------------------------------------
struct Follmer1Realization {
    Path w1;
    Path x;  // exploded from sigma_index onward
    Path l;  // valid strictly before the explosion index
    PathMeta meta;
};

using Follmer1Observer =
    std::function<void(uint64_t path_index, unsigned worker,
                       const Follmer1Realization&)>;

PathBundle simulate_under_follmer1(const FollmerConfig& cfg, const RandomSource& src,
                                   std::size_t n_paths,
                                   const Follmer1Observer& observer = nullptr);

// ---------------------------------------------------------------------------
// Simulation directly under P^(beta) (and the Example-2 supermartingale
// variant). The state is advanced in log X with adaptive steps
// dt <= du_target / X^2, which keeps the quadratic-variation clock resolved
// uniformly: near the singularity the density would otherwise appear to
// explode on any fixed grid even though tau fires first almost surely.
// ---------------------------------------------------------------------------
enum class BetaVariant { PropIntegrand, ExampleTwoSup };

struct FollmerBetaRealization {
    Path s;  // Example-1 price 1/Z^(1) = 1/X stopped at tau
             // (ExampleTwoSup: continues as a lognormal martingale after tau)
    PathMeta meta;
    std::size_t substeps = 0;
};

using FollmerBetaObserver =
    std::function<void(uint64_t path_index, unsigned worker,
                       const FollmerBetaRealization&)>;

PathBundle simulate_under_follmer_beta(const FollmerConfig& cfg,
                                       const RandomSource& src, std::size_t n_paths,
                                       BetaVariant variant = BetaVariant::PropIntegrand,
                                       const FollmerBetaObserver& observer = nullptr);

// ---------------------------------------------------------------------------
// Martingale-defect estimators.
// ---------------------------------------------------------------------------

// 1 - mean(Z_T) from terminal density samples under the reference measure.
McEstimate defect_direct(std::span<const double> z_terminals);

struct ExplosionDefect {
    McEstimate normal_approx;  // binomial proportion with normal stderr
    BinomialEstimate exact;    // Clopper-Pearson at the requested level
};

// P*(sigma <= T) = 1 - E[Z_T] as a binomial proportion over the bundle.
ExplosionDefect defect_via_explosion(const PathBundle& bundle, double level = 0.99);

}  // namespace martlab
