#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace ovit {

// Seeded random source. The engine is std::mt19937_64, whose output stream
// is fixed by the C++ standard; the conversions to uniform and normal
// variates are implemented here (53-bit mantissa fill, Box-Muller) because
// the standard distributions are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, n); n must be positive.
    std::size_t below(std::size_t n);
    bool bernoulli(double p) { return uniform() < p; }
    // Standard normal.
    double normal();

    // Independent stream for worker `stream`: seeded with seed XOR stream.
    Rng split(std::uint64_t stream) const { return Rng(seed_ ^ stream); }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace ovit
