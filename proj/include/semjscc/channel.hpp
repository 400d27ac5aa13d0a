#pragma once

#include <cstdint>
#include <vector>

#include "semjscc/errors.hpp"

namespace semjscc {

// A block of k complex channel symbols stored as 2k interleaved real
// components: symbols[2i] is the real part and symbols[2i+1] the imaginary
// part of symbol i. After power normalization (1/k)*||symbols||^2 == 1.
struct ChannelCodeword {
    std::vector<double> symbols;
    int k = 0;
};

struct NoiseSpec {
    double snr_db = 0.0;
    double sigma_sq = 1.0;  // complex noise variance per symbol

    static NoiseSpec from_snr_db(double snr_db);
};

// sigma^2 = 10^(-snr_db/10). Throws std::invalid_argument for non-finite input.
double snr_to_noise_variance(double snr_db);

// Scales `raw` (even length 2k) so the average complex-symbol power is exactly
// 1: out = raw * sqrt(k)/||raw||. Throws DegenerateCodeword for an all-zero
// input and std::invalid_argument for odd or empty input.
ChannelCodeword normalize_power(const std::vector<double>& raw);

// y = x + n with independent zero-mean Gaussian noise of variance sigma_sq/2
// on each real component, so each complex symbol sees variance sigma_sq.
// Pure function; deterministic given seed.
ChannelCodeword awgn(const ChannelCodeword& x, double sigma_sq, std::uint64_t seed);

}  // namespace semjscc
