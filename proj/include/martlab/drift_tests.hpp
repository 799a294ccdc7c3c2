#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "martlab/calculus.hpp"
#include "martlab/grid.hpp"
#include "martlab/stats.hpp"

namespace martlab {

enum class BinVerdict { Positive, Negative, Zero };

struct DriftBin {
    double t_lo = 0.0;
    double t_hi = 0.0;
    McEstimate increment;  // mean per-path increment over the bin
    double t_stat = 0.0;
    BinVerdict verdict = BinVerdict::Zero;
};

struct DriftTestReport {
    std::vector<DriftBin> bins;
    McEstimate total;           // whole-horizon increment
    double total_t_stat = 0.0;
    double significance = 0.0;  // per-bin level used for the verdicts
    std::size_t n_paths = 0;

    bool any_bin_positive() const;
    bool any_bin_negative() const;
    bool any_bin_nonzero() const;
    bool supermartingale_pass() const { return !any_bin_positive(); }
    bool local_martingale_pass() const { return !any_bin_nonzero(); }
};

// Streaming collector of per-bin increments. Feed one path at a time (values
// on the shared grid; an optional active mask restricts to steps where it
// holds, e.g. "pre-tau" or "on D_k"); merge worker copies, then report.
class DriftAccumulator {
  public:
    DriftAccumulator(GridPtr grid, std::size_t n_bins);

    void add_path(const std::vector<double>& values);
    void add_path_masked(const std::vector<double>& values,
                         const std::function<bool(std::size_t step)>& active);
    void merge(const DriftAccumulator& other);

    DriftTestReport report(double significance) const;
    std::size_t n_bins() const { return bins_.size(); }

  private:
    GridPtr grid_;
    std::vector<std::size_t> bin_of_step_;
    std::vector<Accumulator> bins_;
    Accumulator total_;
    std::vector<double> scratch_;
};

inline constexpr double kDefaultDriftSignificance = 0.001;
inline constexpr std::size_t kDefaultDriftBins = 16;

// Convenience wrappers over stored small bundles of paths.
using PathExtractor = std::function<std::vector<double>(std::size_t path_index)>;

DriftTestReport supermartingale_test(std::size_t n_paths, const PathExtractor& get,
                                     const GridPtr& grid,
                                     std::size_t n_bins = kDefaultDriftBins,
                                     double significance = kDefaultDriftSignificance);

DriftTestReport local_martingale_drift_test(
    std::size_t n_paths, const PathExtractor& get, const GridPtr& grid,
    std::size_t n_bins = kDefaultDriftBins,
    double significance = kDefaultDriftSignificance);

// ---------------------------------------------------------------------------
// Strategy families and deflator checks
// ---------------------------------------------------------------------------

// Generates constrained 1-admissible strategies on a given price path.
// Constant risky fractions pi in [0,1] by default; buy-then-switch and
// threshold rules cover the non-constant cases.
struct StrategyFamily {
    std::vector<double> fractions{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> switch_times;      // buy-and-hold until t, then flat
    std::vector<double> sell_thresholds;   // hold 1 share until S >= level
    bool constrained = true;

    std::size_t size() const {
        return fractions.size() + switch_times.size() + sell_thresholds.size();
    }
    std::string label(std::size_t k) const;
    // wealth path of member k on the given price path, started from x0 = 1
    std::vector<double> wealth(std::size_t k, const Path& price) const;
};

struct DeflatorCheckResult {
    std::vector<DriftTestReport> per_strategy;
    std::vector<std::string> labels;
    bool all_pass = false;
};

// supermartingale test of Y (1 + H.S) for every strategy in the family.
DeflatorCheckResult deflator_check(std::size_t n_paths,
                                   const std::function<Path(std::size_t)>& deflator,
                                   const std::function<Path(std::size_t)>& price,
                                   const StrategyFamily& family, const GridPtr& grid,
                                   std::size_t n_bins = kDefaultDriftBins,
                                   double significance = kDefaultDriftSignificance);

struct LogWealthBound {
    McEstimate log_zx;          // estimate of E[log(Z_T X_T)]
    std::size_t excluded = 0;   // paths dropped for nonpositive terminal wealth
    bool pass(double tolerance, double level = 0.99) const {
        return log_zx.ci(level).hi <= tolerance;
    }
};

LogWealthBound log_wealth_bound_check(std::size_t n_paths,
                                      const std::function<double(std::size_t)>& z_T,
                                      const std::function<double(std::size_t)>& x_T);

}  // namespace martlab
