#pragma once

#include <cstdint>
#include <random>

namespace gbeta {

// Derives an independent stream seed from a master seed plus up to three
// counters (e.g. (seed, N, replication, stage)). splitmix64 steps keyed by
// the counters; collisions across distinct counter tuples are negligible.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a = 0,
                              std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = seed;
    auto step = [&s](std::uint64_t v) {
        s += 0x9e3779b97f4a7c15ULL + v;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        s = z ^ (z >> 31);
    };
    step(a);
    step(b);
    step(c);
    return s;
}

// mt19937_64 wrapper producing doubles without std::uniform_real_distribution,
// whose output is implementation-defined. All sampling in the library goes
// through this so runs are reproducible bit-for-bit across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    // Uniform integer in [0, n). Modulo bias is < n / 2^64, irrelevant here.
    std::uint64_t below(std::uint64_t n) { return gen_() % n; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t k = v.size(); k > 1; --k) {
            std::size_t j = static_cast<std::size_t>(below(k));
            std::swap(v[k - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace gbeta
