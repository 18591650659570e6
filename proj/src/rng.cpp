#include "macrocast/rng.hpp"

#include <cmath>
#include <cstring>

#include "macrocast/errors.hpp"

namespace macrocast {

double Rng::gamma(double a) {
    if (a < 1.0) {
        throw NumericError("gamma sampler requires shape >= 1");
    }
    const double d = a - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x;
        double v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform01();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) {
            return d * v;
        }
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
            return d * v;
        }
    }
}

double Rng::student_t_unit(double nu) {
    if (!(nu > 2.0)) {
        throw NumericError("student-t innovation requires degrees of freedom > 2");
    }
    const double z = normal();
    const double chi2 = 2.0 * gamma(0.5 * nu);  // chi-square with nu dof
    const double t = z / std::sqrt(chi2 / nu);
    return t * std::sqrt((nu - 2.0) / nu);
}

size_t Rng::uniform_index(size_t n) {
    if (n == 0) {
        throw NumericError("uniform_index on empty range");
    }
    const uint64_t span = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t x = gen_();
    while (x >= limit) {
        x = gen_();
    }
    return static_cast<size_t>(x % span);
}

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

uint64_t derive_seed(uint64_t base, std::string_view component, uint64_t index) {
    const uint64_t h = fnv1a64(component.data(), component.size());
    return splitmix64(base ^ splitmix64(h) ^ splitmix64(index * 0x9e3779b97f4a7c15ull + 1));
}

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace macrocast
