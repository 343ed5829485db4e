#include "dwa/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace dwa {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
constexpr double kTwoPow53Inv = 0x1.0p-53;
}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(seed ^ splitmix64(a)) ^ splitmix64(b ^ kGolden));
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    for (int k = 0; k < kNumStreams; ++k) {
        engines_[k].seed(splitmix64(seed + static_cast<std::uint64_t>(k) * kGolden));
    }
}

std::uint64_t Rng::raw(Stream s) {
    int k = static_cast<int>(s);
    ++counts_[k];
    return engines_[k]();
}

double Rng::uniform(Stream s) {
    return static_cast<double>(raw(s) >> 11) * kTwoPow53Inv;
}

double Rng::uniform(Stream s, double lo, double hi) {
    return lo + (hi - lo) * uniform(s);
}

double Rng::gaussian(Stream s, double mean, double stddev) {
    // u1 in (0,1] keeps the log finite.
    double u1 = static_cast<double>((raw(s) >> 11) + 1) * kTwoPow53Inv;
    double u2 = static_cast<double>(raw(s) >> 11) * kTwoPow53Inv;
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + stddev * z;
}

std::uint64_t Rng::uniform_int(Stream s, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    // Reject the short final interval so the modulus is exact.
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        std::uint64_t x = raw(s);
        if (x >= threshold) return x % n;
    }
}

void Rng::restore(Stream s, std::uint64_t count) {
    int k = static_cast<int>(s);
    engines_[k].seed(splitmix64(seed_ + static_cast<std::uint64_t>(k) * kGolden));
    engines_[k].discard(count);
    counts_[k] = count;
}

}  // namespace dwa
