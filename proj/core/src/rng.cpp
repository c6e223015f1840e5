// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include "tailor/rng.hpp"

#include "tailor/errors.hpp"

namespace tailor {

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, SplitMix64& rng) {
    if (k > n) throw PreconditionViolation("sample_indices: k > n");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t draw = 0; draw < k; ++draw) {
        std::size_t j = static_cast<std::size_t>(rng.below(n - draw));
        out.push_back(pool[j]);
        pool[j] = pool[n - draw - 1];
    }
    return out;
}

}  // namespace tailor
