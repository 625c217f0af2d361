#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace backfire {

/// xoshiro256** seeded through SplitMix64.
///
/// Every simulator and resampler draws from an `Rng` built by `Rng::stream`,
/// which mixes the user seed with a purpose label and a replicate index. The
/// bit stream is therefore a pure function of (seed, purpose, index) and does
/// not depend on the standard library's distribution implementations, which
/// vary between vendors. All variates below are generated by hand for the
/// same reason.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed);

    /// Independent substream for (seed, purpose, index).
    static Rng stream(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()();

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform integer on [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);
    /// Standard normal (Box-Muller, one variate per call).
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }
    /// Gamma(shape, scale) via Marsaglia-Tsang.
    double gamma(double shape, double scale);
    /// Poisson(mean): inversion below mean 10, PTRS (Hormann 1993) above.
    std::uint64_t poisson(double mean);

private:
    std::array<std::uint64_t, 4> s_{};
};

/// FNV-1a hash used to turn purpose labels into stream identifiers.
std::uint64_t hash_label(std::string_view label);

/// Draw `k` distinct indices from [0, n) in ascending order.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k);

}  // namespace backfire
