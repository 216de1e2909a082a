#pragma once

#include <cstdint>
#include <vector>

namespace reco {

// Bias model: r' = mu + b_user[u] + b_movie[j]. Fitting lives in
// predictors; the raw struct is shared with the similarity engine, whose
// shrunk correlation centers ratings on these baseline values.
struct BaselineModel {
    double mu = 0.0;
    std::vector<double> b_user;   // indexed by dense user id
    std::vector<double> b_movie;  // indexed by dense movie id

    // Raw (unclamped) baseline value for a known (dense) pair.
    double value(std::uint32_t u, std::uint32_t j) const {
        return mu + b_user[u] + b_movie[j];
    }
};

}  // namespace reco
