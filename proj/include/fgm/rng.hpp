#pragma once

#include <cstdint>
#include <random>

namespace fgm {

/// Seedable 64-bit generator: std::mt19937_64 (MT19937-64) seeded through
/// std::seed_seq from (seed, stream). Both the engine and seed_seq are fully
/// specified by the standard, and the variate transforms below are written
/// out explicitly instead of using std::*_distribution, whose algorithms are
/// implementation-defined. Sequences are therefore identical across
/// platforms and standard libraries.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();

    /// Uniform on (0, 1).
    double uniform_open();

    /// Uniform integer on [0, bound), rejection sampled, bound > 0.
    std::uint64_t below(std::uint64_t bound);

    /// Standard normal by the Box-Muller transform; the second variate of
    /// each pair is kept for the next call.
    double normal();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stream identifiers used by the synthetic generator. Each gets an
/// independent seed_seq expansion.
namespace streams {
inline constexpr std::uint64_t truth = 1;
inline constexpr std::uint64_t train = 2;
inline constexpr std::uint64_t test = 3;
}  // namespace streams

}  // namespace fgm
