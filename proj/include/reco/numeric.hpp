#pragma once

#include <cstddef>
#include <span>

namespace reco {

// Pairwise (cascade) summation. Error grows O(log n) instead of O(n),
// which matters for the 100M-term metric aggregations.
inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 32) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double clamp_rating(double v) {
    if (v < 1.0) return 1.0;
    if (v > 5.0) return 5.0;
    return v;
}

}  // namespace reco
