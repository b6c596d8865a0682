#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace priorweaver {

/// splitmix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed of the substream reached from `seed` by following `path`.
///
/// Substreams are the only way randomness is split: a consumer that needs
/// independent streams per resample / draw / column derives one seed per index
/// instead of sharing a generator, so results never depend on evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = mix64(seed);
    for (std::uint64_t index : path) s = mix64(s ^ mix64(index ^ 0xD1B54A32D192ED03ULL));
    return s;
}

/// Stream tags used with derive_seed.
namespace stream {
inline constexpr std::uint64_t generate = 1;
inline constexpr std::uint64_t connect = 2;
inline constexpr std::uint64_t bootstrap = 3;
inline constexpr std::uint64_t predictors = 4;
inline constexpr std::uint64_t parameters = 5;
inline constexpr std::uint64_t response = 6;
inline constexpr std::uint64_t simulate = 7;
}  // namespace stream

/// xoshiro256** seeded through splitmix64. The integer sequence and every
/// derived real-valued draw are identical across platforms and compilers (the
/// normal draw relies on libm log/cos/sqrt, which are correctly rounded on the
/// supported toolchains).
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept;

    static Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
        return Rng(derive_seed(seed, path));
    }

    std::uint64_t next() noexcept;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;

    /// Uniform on the closed interval [lo, hi].
    double uniform(double lo, double hi) noexcept;

    /// Unbiased integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept;

    /// Standard normal via Box-Muller; one output per call, no cached state.
    double normal() noexcept;

private:
    std::array<std::uint64_t, 4> s_{};
};

}  // namespace priorweaver
