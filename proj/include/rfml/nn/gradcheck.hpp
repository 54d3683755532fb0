#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "rfml/nn/tensor.hpp"

namespace rfml::nn {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped_nondifferentiable = 0;
};

// Central finite differences against reverse-mode gradients, 64-bit only.
// The closure must rebuild its graph from the current leaf values on every
// call. Coordinates where one-sided derivatives disagree (a kink, e.g. relu
// at 0 or a pooling argmax flip inside the probe interval) are reported and
// skipped. max_coords_per_tensor > 0 subsamples coordinates deterministically.
inline GradCheckReport grad_check(const std::function<Ptr<double>()>& op_closure,
                                  const std::vector<Ptr<double>>& inputs, double eps = 1e-5,
                                  std::size_t max_coords_per_tensor = 0,
                                  std::uint64_t coord_seed = 0) {
    GradCheckReport report;

    for (const auto& in : inputs) in->zero_grad();
    auto out = op_closure();
    if (out->size() != 1) throw InvalidArgument("grad_check: closure must produce a scalar");
    backward(out);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const auto& in : inputs) {
        in->ensure_grad();
        analytic.push_back(in->g);
    }

    const double center = out->v[0];
    auto eval = [&]() {
        NoGradGuard ng;
        return op_closure()->v[0];
    };

    Rng pick(coord_seed);
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        auto& x = *inputs[ti];
        std::vector<std::size_t> coords(x.size());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        if (max_coords_per_tensor > 0 && coords.size() > max_coords_per_tensor) {
            pick.shuffle(coords.begin(), coords.end());
            coords.resize(max_coords_per_tensor);
            std::sort(coords.begin(), coords.end());
        }
        for (std::size_t c : coords) {
            const double orig = x.v[c];
            x.v[c] = orig + eps;
            const double fp = eval();
            x.v[c] = orig - eps;
            const double fm = eval();
            x.v[c] = orig;

            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[ti][c];
            // Central differences resolve derivatives down to roughly
            // ulp(f)/eps; disagreements below that are measurement noise, not
            // gradient error (structurally-zero coordinates hit this).
            const double atol = 1e-9 * std::max(1.0, std::abs(center)) * (1e-5 / eps);
            const double rel = std::abs(a - numeric) <= atol
                                   ? 0.0
                                   : std::abs(a - numeric) /
                                         std::max(1e-8, std::abs(a) + std::abs(numeric));
            if (rel > 1e-4) {
                // One-sided probes disagreeing flags a non-differentiable point.
                const double dplus = (fp - center) / eps;
                const double dminus = (center - fm) / eps;
                const double disagree =
                    std::abs(dplus - dminus) / std::max({std::abs(dplus), std::abs(dminus), 1e-6});
                if (disagree > 0.05) {
                    ++report.skipped_nondifferentiable;
                    continue;
                }
            }
            report.max_rel_error = std::max(report.max_rel_error, rel);
            ++report.checked;
        }
    }
    return report;
}

}  // namespace rfml::nn
