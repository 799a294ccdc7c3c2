#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "martlab/drift_tests.hpp"
#include "martlab/follmer.hpp"
#include "martlab/lattice.hpp"
#include "martlab/stats.hpp"

namespace martlab {

// Configuration for the named experiments. Serializes losslessly to JSON;
// command-line flags override file values.
struct ExperimentConfig {
    std::string experiment = "prop51";
    double horizon = 1.0;
    double beta = 2.0;
    double gamma = 0.5;
    std::size_t n_paths = 100000;
    std::size_t n_steps = 0;  // 0 -> round(4096 * horizon)
    uint64_t master_seed = 42;
    std::string out_dir = ".";
    double significance = 0.001;  // per-bin drift significance
    double ci_level = 0.99;
    std::size_t n_bins = 16;
    unsigned n_threads = 0;  // 0 -> hardware
    std::size_t dump_paths = 0;
    LatticeFamilyConfig lattice;

    std::size_t effective_steps() const;
    void validate() const;
    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
    std::string comment_header() const;  // single '#' line for CSV outputs
};

struct ClaimResult {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string note;
};

struct ExperimentResult {
    std::string name;
    std::vector<ClaimResult> claims;
    std::vector<std::string> artifacts;  // files written
    bool all_pass() const {
        for (const auto& c : claims)
            if (!c.pass) return false;
        return true;
    }
};

// ---------------------------------------------------------------------------
// Reference-measure sweep over the Example-1/2 scenarios: terminal samples
// and binned increments collected into per-path slots (bit-identical results
// for any thread count).
// ---------------------------------------------------------------------------
struct ReferenceSweep {
    std::vector<double> z1_T, zb_T;      // Z^(1), Z^(beta) (or Z, Z^sup) at T
    std::vector<double> s_T;             // price at T
    std::vector<double> log_s_T;
    std::vector<double> tau;             // +inf when not fired
    std::size_t tau_fired = 0;
    // per-candidate-fraction wealth terminals, aligned with `fractions`
    std::vector<double> fractions;
    std::vector<std::vector<double>> wealth_T;
    // binned increment matrices [path][bin] for the drift tests
    std::vector<std::vector<double>> s_bins_pre_tau;
    std::vector<std::vector<double>> s_bins_post_tau;
    std::vector<std::vector<double>> s_bins_all;
};

ReferenceSweep run_reference_sweep(const ExperimentConfig& cfg, bool example_two,
                                   const std::vector<double>& fractions);

DriftTestReport drift_report_from_bins(const std::vector<std::vector<double>>& bins,
                                       const GridPtr& grid, double significance);

// Matched-grid estimator pair for 1 - E[Z_T^(1)].
struct DefectComparison {
    McEstimate direct;            // reference-measure sample mean
    McEstimate explosion;         // P^(1) explosion frequency
    double combined_se = 0.0;
    bool agree = false;           // |difference| <= 3 combined se
    std::size_t tau_fired_p1 = 0;
    std::size_t n_paths = 0;
};

DefectComparison run_defect_comparison(const ExperimentConfig& cfg);

// Bridge-corrected barrier Monte Carlo for p(T) (first passage to -1).
McEstimate barrier_hitting_estimate(const ExperimentConfig& cfg);

// Named experiments (the CLI catalog).
ExperimentResult run_prop51(const ExperimentConfig& cfg);
ExperimentResult run_example1(const ExperimentConfig& cfg);
ExperimentResult run_example2(const ExperimentConfig& cfg);
ExperimentResult run_lattice_duality(const ExperimentConfig& cfg);
ExperimentResult run_negishi(const ExperimentConfig& cfg);
ExperimentResult run_patching(const ExperimentConfig& cfg);
ExperimentResult run_repr_agent(const ExperimentConfig& cfg);

struct CatalogEntry {
    std::string name;
    std::string claim;
};
std::vector<CatalogEntry> experiment_catalog();

ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace martlab
