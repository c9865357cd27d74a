#pragma once

#include <cstdint>
#include <random>

namespace ntkspec {

// Named stream identifiers so weights and data drawn from the same user seed
// never share a generator state.
enum class Stream : std::uint64_t {
    Weights = 0x57454947ULL,
    Data = 0x44415441ULL,
    Probe = 0x50524f42ULL,
    PowerIteration = 0x504f5745ULL,
    Targets = 0x54415247ULL,
};

std::uint64_t splitmix64(std::uint64_t x);

// Seeded mt19937_64 with Box-Muller normals. Reproducible within this
// implementation; no cross-implementation guarantee.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}
    Rng(std::uint64_t seed, Stream stream)
        : engine_(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream)))) {}

    // Uniform on the open interval (0, 1).
    double uniform();
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace ntkspec
