#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace stv {

/// Counter-based deterministic RNG. Draw i of stream (seed) is a pure
/// function of (seed, i), so identical (seed, counter) pairs reproduce
/// identical sequences on every platform. split() derives independent
/// named substreams, which is how task generation, training and policy
/// sampling stay decoupled.
struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t counter = 0;

    explicit RngState(std::uint64_t s = 0, std::uint64_t c = 0) : seed(s), counter(c) {}

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t next_u64() {
        ++counter;
        return mix(seed + counter * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform double in [0, 1), 53 bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; consumes exactly two counter steps.
    double normal() {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [0, n) by masked rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("RngState::below: n == 0");
        if (n == 1) return 0;
        const std::uint64_t mask = std::bit_ceil(n) - 1;
        std::uint64_t x;
        do {
            x = next_u64() & mask;
        } while (x >= n);
        return x;
    }

    RngState split(std::uint64_t tag) const {
        return RngState(mix(seed ^ mix(tag ^ 0xA3EC647659359ACDULL)));
    }

    RngState split(std::string_view name) const {
        std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
        for (unsigned char c : name) {
            h ^= c;
            h *= 0x100000001B3ULL;
        }
        return split(h);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices drawn from [0, n), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        std::vector<std::size_t> out;
        out.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = static_cast<std::size_t>(below(n - i));
            out.push_back(pool[j]);
            std::swap(pool[j], pool[n - i - 1]);
        }
        return out;
    }
};

/// Categorical draw from (possibly unnormalized) nonnegative weights.
inline std::size_t sample_categorical(std::span<const double> w, RngState& rng) {
    double total = 0.0;
    for (double x : w) total += x;
    const double r = rng.uniform() * total;
    double c = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        c += w[i];
        if (r < c) return i;
    }
    return w.empty() ? 0 : w.size() - 1;
}

}  // namespace stv
