#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace dwa {

// Purpose-keyed substreams of one seeded generator. Each substream is an
// mt19937_64 seeded from the master seed through a splitmix64 finalizer,
// and every engine draw is counted so a generator can be restored exactly
// from (seed, per-stream draw counts).
//
// Distributions are hand-mapped from raw 64-bit draws (not <random>
// distribution objects) so the output stream is identical everywhere.
enum class Stream : int { Init = 0, Shuffle = 1, Synth = 2, Split = 3 };
inline constexpr int kNumStreams = 4;

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent seed from a master seed and up to two tags.
// Used for random-access sub-generators (e.g. one per synthetic sample).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t raw(Stream s);
    double uniform(Stream s);                                // [0, 1)
    double uniform(Stream s, double lo, double hi);          // [lo, hi)
    double gaussian(Stream s, double mean, double stddev);   // Box-Muller, 2 raws
    std::uint64_t uniform_int(Stream s, std::uint64_t n);    // [0, n), unbiased

    template <typename T>
    void shuffle(std::vector<T>& v, Stream s) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(s, i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::uint64_t draws(Stream s) const { return counts_[static_cast<int>(s)]; }
    // Rebuilds the substream from scratch and fast-forwards to `count` draws.
    void restore(Stream s, std::uint64_t count);

private:
    std::uint64_t seed_;
    std::array<std::mt19937_64, kNumStreams> engines_;
    std::array<std::uint64_t, kNumStreams> counts_{};
};

}  // namespace dwa
