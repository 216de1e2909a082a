#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace reco {

// std::uniform_int_distribution / normal_distribution are implementation
// defined, which breaks bit-reproducibility guarantees across standard
// libraries. The pipeline promises byte-identical artifacts for a fixed
// seed, so the distribution layer is spelled out here on top of
// mt19937_64 (whose output sequence is fixed by the standard).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, n) by rejection; n > 0.
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Box-Muller; one value per call, the pair's second half is cached.
    double normal(double mean, double stddev) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1, u2;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(theta);
        have_spare_ = true;
        return mean + stddev * radius * std::cos(theta);
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_below(i)]);
        }
    }

    // Sequential selection sampling: k distinct indices from [0, n),
    // returned in ascending order.
    std::vector<std::uint64_t> sample_indices(std::uint64_t n, std::uint64_t k) {
        std::vector<std::uint64_t> out;
        out.reserve(k);
        std::uint64_t needed = k;
        for (std::uint64_t i = 0; i < n && needed > 0; ++i) {
            if (uniform_below(n - i) < needed) {
                out.push_back(i);
                --needed;
            }
        }
        return out;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace reco
