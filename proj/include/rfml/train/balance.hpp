#pragma once

#include <cstddef>
#include <vector>

#include "rfml/common.hpp"

namespace rfml::train {

// Inverse-size loss balancing: b_i = N_total / (n_datasets * N_i). Each
// dataset then contributes the same total loss mass, so the sample-weighted
// mean of b is exactly 1.
inline std::vector<double> derive_balancing_factors(const std::vector<std::size_t>& sizes) {
    if (sizes.empty()) throw InvalidArgument("derive_balancing_factors: no datasets");
    std::size_t total = 0;
    for (auto n : sizes) {
        if (n == 0) throw InvalidArgument("derive_balancing_factors: empty dataset");
        total += n;
    }
    std::vector<double> b;
    b.reserve(sizes.size());
    for (auto n : sizes)
        b.push_back(static_cast<double>(total) /
                    (static_cast<double>(sizes.size()) * static_cast<double>(n)));
    return b;
}

}  // namespace rfml::train
