#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace paflab {

/// Deterministic generator: std::mt19937_64 for raw bits, with uniform and
/// normal variates derived here rather than through std distributions, whose
/// output is implementation-defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 bits of precision.
    double uniform();
    /// Standard normal via the Marsaglia polar method.
    double normal();
    /// Uniform integer in [0, bound).
    std::size_t below(std::size_t bound);

    /// Child generator for an independent named stream.
    Rng fork(std::uint64_t stream) const;

  private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// splitmix64 finalizer; used to derive per-purpose seeds from one root seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace paflab
