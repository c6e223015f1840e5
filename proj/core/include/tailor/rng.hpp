// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace tailor {

// SplitMix64. Every sampling decision that affects exported artifacts goes
// through this generator so results are identical across platforms and
// standard-library versions (std::mt19937 distributions are not portable).
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) { return next() % n; }

    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

// Order-sensitive combine: mix_seed(a, b) != mix_seed(b, a) in general.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    SplitMix64 g(a ^ (b + 0x9E3779B97F4A7C15ULL));
    return g.next();
}

template <typename T>
void shuffle_inplace(std::vector<T>& v, SplitMix64& rng) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
        using std::swap;
        swap(v[i], v[j]);
    }
}

// k distinct indices drawn from [0, n), in draw order. k must be <= n.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, SplitMix64& rng);

}  // namespace tailor
