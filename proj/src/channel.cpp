#include "semjscc/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "semjscc/rng.hpp"
#include "semjscc/tensor.hpp"

namespace semjscc {

NoiseSpec NoiseSpec::from_snr_db(double snr_db) {
    return NoiseSpec{snr_db, snr_to_noise_variance(snr_db)};
}

double snr_to_noise_variance(double snr_db) {
    if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_to_noise_variance: non-finite SNR");
    return std::pow(10.0, -snr_db / 10.0);
}

ChannelCodeword normalize_power(const std::vector<double>& raw) {
    if (raw.size() < 2 || raw.size() % 2 != 0)
        throw std::invalid_argument("normalize_power: length must be even and >= 2");
    const double nsq = squared_norm(raw);
    if (nsq == 0.0) throw DegenerateCodeword("normalize_power: all-zero input, scale undefined");
    const int k = static_cast<int>(raw.size() / 2);
    const double scale = std::sqrt(static_cast<double>(k)) / std::sqrt(nsq);
    ChannelCodeword out;
    out.k = k;
    out.symbols.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out.symbols[i] = raw[i] * scale;
    return out;
}

ChannelCodeword awgn(const ChannelCodeword& x, double sigma_sq, std::uint64_t seed) {
    if (!(sigma_sq >= 0.0)) throw std::invalid_argument("awgn: sigma_sq must be >= 0");
    ChannelCodeword y = x;
    if (sigma_sq == 0.0) return y;
    Rng rng(seed);
    const double sd = std::sqrt(sigma_sq / 2.0);
    for (double& v : y.symbols) v += sd * rng.normal();
    return y;
}

}  // namespace semjscc
