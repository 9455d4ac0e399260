#include "fgm/rng.hpp"

#include <cmath>
#include <numbers>

namespace fgm {

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream & 0xffffffffu),
                      static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() {
    double u;
    do {
        u = uniform();
    } while (u == 0.0);
    return u;
}

std::uint64_t Rng::below(std::uint64_t bound) {
    // largest multiple of bound that fits, to avoid modulo bias
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % bound;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

}  // namespace fgm
