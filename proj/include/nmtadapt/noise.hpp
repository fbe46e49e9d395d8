#pragma once

// The noising function used by denoising autoencoding: a local shuffle where
// no token moves more than max_shift positions, followed by random masking.

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "nmtadapt/corpus.hpp"
#include "nmtadapt/rng.hpp"

namespace nmtadapt {

struct NoiseParams {
    int max_shift = 3;
    double p_mask = 0.1;
};

inline TokenSequence apply_noise(const TokenSequence& t, const NoiseParams& params,
                                 std::mt19937_64& rng) {
    if (params.max_shift < 0 || params.p_mask < 0.0 || params.p_mask > 1.0)
        throw std::invalid_argument("apply_noise: bad params");
    const int n = static_cast<int>(t.tokens.size());

    // Each index gets an independent uniform key in [0, max_shift + 1) added
    // to its position; a stable sort on the noised key yields a permutation
    // with |pi(i) - i| <= max_shift.
    std::vector<double> keys(n);
    for (int i = 0; i < n; ++i)
        keys[i] = i + uniform01(rng) * (params.max_shift + 1);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return keys[a] < keys[b]; });

    TokenSequence out;
    out.lang = t.lang;
    out.tokens.resize(n);
    for (int i = 0; i < n; ++i) out.tokens[i] = t.tokens[order[i]];

    // Mask after shuffling; replacement, not deletion, so reconstruction
    // targets stay length-aligned.
    for (int i = 0; i < n; ++i)
        if (uniform01(rng) < params.p_mask) out.tokens[i] = Vocabulary::kMask;
    return out;
}

}  // namespace nmtadapt
