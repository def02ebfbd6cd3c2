#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace fewshot {

// All randomness in the project flows from one experiment seed through
// named substreams ("init", "episode", "jigsaw", ...), so that disabling
// one consumer never shifts the draws seen by another.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    static uint64_t hash_name(std::string_view name) {
        uint64_t h = 1469598103934665603ull;  // FNV-1a
        for (char ch : name) {
            h ^= static_cast<unsigned char>(ch);
            h *= 1099511628211ull;
        }
        return h;
    }

    static Rng substream(uint64_t seed, std::string_view name, uint64_t index = 0) {
        uint64_t tag = hash_name(name);
        std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                          static_cast<uint32_t>(tag), static_cast<uint32_t>(tag >> 32),
                          static_cast<uint32_t>(index), static_cast<uint32_t>(index >> 32)};
        Rng r(0);
        r.eng_.seed(seq);
        return r;
    }

    uint64_t next_u64() { return eng_(); }

    // Unbiased draw from [0, n) via rejection; avoids the
    // implementation-defined behaviour of std::uniform_int_distribution.
    long uniform_index(long n) {
        const uint64_t un = static_cast<uint64_t>(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return static_cast<long>(x % un);
    }

    double uniform_real() {  // [0, 1)
        return (eng_() >> 11) * 0x1.0p-53;
    }

    double uniform_range(double lo, double hi) {
        return lo + (hi - lo) * uniform_real();
    }

    double normal() {  // Box-Muller with a cached spare
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform_real();
        double u2 = uniform_real();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    bool bernoulli(double p) { return uniform_real() < p; }

    template <class T>
    void shuffle(std::vector<T>& v) {  // Fisher-Yates
        for (long i = static_cast<long>(v.size()) - 1; i > 0; --i) {
            long j = uniform_index(i + 1);
            std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
        }
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace fewshot
