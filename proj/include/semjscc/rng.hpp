#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace semjscc {

// Seed derivation scheme
// ----------------------
// Every stochastic operation in the toolkit takes an explicit 64-bit seed.
// Per-call seeds are derived from the experiment seed by hashing the stream
// tag and up to three counters through splitmix64:
//
//     seed = mix(mix(mix(mix(root ^ tag) ^ a) ^ b) ^ c)
//
// Streams are fixed at compile time; counters are loop indices (epoch, step,
// hop, image index, ...). Re-running any stage with the same experiment seed
// therefore reproduces its random draws exactly, including after a resume.
enum class Stream : std::uint64_t {
    WeightInit = 0x5eed0001,
    DataOrder = 0x5eed0002,
    ChannelNoise = 0x5eed0003,
    Augment = 0x5eed0004,
    Synthetic = 0x5eed0005,
    KMeans = 0x5eed0006,
    Eval = 0x5eed0007,
    ProxyInit = 0x5eed0008,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, Stream stream, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = splitmix64(root ^ static_cast<std::uint64_t>(stream));
    s = splitmix64(s ^ a);
    s = splitmix64(s ^ b);
    s = splitmix64(s ^ c);
    return s;
}

// Deterministic generator. mt19937_64 output is fully specified by the
// standard, and the uniform/normal mappings below are spelled out here rather
// than delegated to the implementation-defined std distributions, so streams
// are bit-identical across compilers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0,1): top 53 bits scaled by 2^-53.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform on [lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0,n). Rejection-free modulo is fine here: n is tiny
    // compared to 2^64 in every call site, so the bias is far below noise.
    std::uint64_t uniform_int(std::uint64_t n) { return engine_() % n; }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller on two fresh uniforms. The log argument
    // is kept away from zero by drawing from (0,1].
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0,1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace semjscc
