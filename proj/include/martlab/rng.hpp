#pragma once

#include <cstdint>
#include <cstddef>

namespace martlab {

// Counter-based RNG (Philox-4x32, 10 rounds). Every draw is a pure function
// of (key, counter), so path simulations are reproducible for a given
// (master_seed, path_index) no matter how work is scheduled across threads.
//
// Counter layout used by SubStream:
//   ctr = { path_lo, path_hi, (domain << 8) | substream, block }
// so distinct experiments (domains) and distinct per-path substreams
// (e.g. the three Bessel coordinates) never share a counter.
struct PhiloxBlock {
    uint32_t v[4];
};

PhiloxBlock philox4x32(const uint32_t ctr[4], const uint32_t key[2]);

// Inverse standard normal CDF. Rational approximation refined by one
// Halley step against std::erfc, accurate to ~1e-15.
double inverse_normal_cdf(double p);

// Standard normal CDF / density / upper quantile helpers.
double normal_cdf(double x);
double normal_pdf(double x);

class RandomSource {
  public:
    explicit RandomSource(uint64_t master_seed) : master_seed_(master_seed) {}
    uint64_t master_seed() const { return master_seed_; }

  private:
    uint64_t master_seed_;
};

// One independent stream of uniforms/normals, identified by
// (master seed, path index, domain, substream id).
class SubStream {
  public:
    SubStream(const RandomSource& src, uint64_t path_index, uint32_t domain,
              uint32_t substream);

    // Uniform on (0,1), 53-bit resolution, never exactly 0 or 1.
    double next_uniform();
    // Standard normal via inverse CDF.
    double next_normal() { return inverse_normal_cdf(next_uniform()); }

  private:
    void refill();

    uint32_t key_[2];
    uint32_t ctr_[4];
    uint32_t buf_[4];
    int pos_ = 4;  // force refill on first use
};

// Experiment domains. Each simulation family draws from its own domain so
// that bundles simulated under different measures are independent.
namespace rng_domain {
inline constexpr uint32_t kBrownian = 1;
inline constexpr uint32_t kBesselX = 2;
inline constexpr uint32_t kFollmerOne = 3;
inline constexpr uint32_t kFollmerBeta = 4;
inline constexpr uint32_t kScenario = 5;
inline constexpr uint32_t kStatsSelfTest = 6;
inline constexpr uint32_t kLatticeSearch = 7;
}  // namespace rng_domain

// Per-path substream ids (within a domain).
namespace rng_sub {
inline constexpr uint32_t kCoord0 = 0;
inline constexpr uint32_t kCoord1 = 1;
inline constexpr uint32_t kCoord2 = 2;
inline constexpr uint32_t kAuxUniform = 3;
inline constexpr uint32_t kSecondary = 4;
}  // namespace rng_sub

}  // namespace martlab
