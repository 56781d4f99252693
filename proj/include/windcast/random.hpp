#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace windcast {

/// Seeded generator with portable derived distributions. The engine output is
/// fixed by the standard; the std:: distributions are not, so uniform draws
/// and shuffles are derived here directly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double canonical() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * canonical(); }

    /// Uniform integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n)
    {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r;
        do r = engine_();
        while (r >= limit);
        return r % n;
    }

    template <typename T>
    void shuffle(std::span<T> xs)
    {
        for (std::size_t i = xs.size(); i > 1; --i) std::swap(xs[i - 1], xs[below(i)]);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace windcast
