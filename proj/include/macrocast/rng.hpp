#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace macrocast {

// Deterministic random source. mt19937_64 is fully specified by the standard;
// the distributions are hand-rolled because std::normal_distribution and
// friends are implementation-defined and would break bit-reproducibility
// across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform on (0, 1]. Never returns 0, so log(u) is always finite.
    double uniform01() {
        const uint64_t bits = gen_() >> 11;  // 53 random bits
        return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller. No cached spare: two uniforms per
    // draw keeps the stream position a pure function of the draw count.
    double normal() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(6.283185307179586477 * u2);
    }

    // Gamma(shape a >= 1, scale 1), Marsaglia-Tsang squeeze method.
    double gamma(double a);

    // Student-t with nu > 2 degrees of freedom, rescaled by sqrt((nu-2)/nu)
    // so the variate has unit variance for every admissible nu.
    double student_t_unit(double nu);

    // Unbiased integer in [0, n). Rejection sampling on the top bits.
    size_t uniform_index(size_t n);

private:
    std::mt19937_64 gen_;
};

// Named seed derivation: every random stream in the pipeline is a pure
// function of (base seed, component name, index).
uint64_t derive_seed(uint64_t base, std::string_view component, uint64_t index);

// FNV-1a 64-bit hash, also used as the file/payload checksum.
uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace macrocast
