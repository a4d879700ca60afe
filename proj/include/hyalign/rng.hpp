#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace hyalign {

// Seeded RNG with explicitly specified value mappings, so every sampled
// number is a pure function of the seed (std distributions are
// implementation-defined and would not be portable to freeze in tests).
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    int64_t below(int64_t n) {
        int64_t v = static_cast<int64_t>(uniform() * static_cast<double>(n));
        return v >= n ? n - 1 : v;
    }

    // k distinct indices from [0, n), order given by a partial Fisher-Yates pass
    std::vector<int64_t> sample_without_replacement(int64_t n, int64_t k) {
        std::vector<int64_t> idx(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
        if (k > n) k = n;
        for (int64_t i = 0; i < k; ++i) {
            int64_t j = i + below(n - i);
            std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
        }
        idx.resize(static_cast<size_t>(k));
        return idx;
    }

private:
    std::mt19937_64 gen_;
};

} // namespace hyalign
