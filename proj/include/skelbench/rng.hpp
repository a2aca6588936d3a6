#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace skelbench {

// mt19937_64 is fully pinned by the standard; the distribution helpers are
// hand-rolled because std::uniform_*_distribution output differs between
// standard library implementations, which would break seeded reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // [0, n), unbiased
    std::size_t index(std::size_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return static_cast<std::size_t>(r % n);
    }

    // [lo, hi] inclusive
    int range(int lo, int hi) {
        return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo + 1)));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
};

// splitmix64 finalizer; used to derive independent seed streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace skelbench
