#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "rfml/signal/frame.hpp"

namespace rfml::signal {

// (i', q') = (i cos t - q sin t, i sin t + q cos t), i.e. s(t) * e^{j theta}.
inline IQFrame augment_phase_rotate(const IQFrame& frame, double theta) {
    if (!std::isfinite(theta)) throw InvalidArgument("augment_phase_rotate: non-finite theta");
    const double c = std::cos(theta), s = std::sin(theta);
    IQFrame out = frame;
    for (std::size_t n = 0; n < frame.length(); ++n) {
        out.i[n] = frame.i[n] * c - frame.q[n] * s;
        out.q[n] = frame.i[n] * s + frame.q[n] * c;
    }
    return out;
}

// s'[n] = s[N-1-n] on both channels.
inline IQFrame augment_reverse(const IQFrame& frame) {
    IQFrame out = frame;
    std::reverse(out.i.begin(), out.i.end());
    std::reverse(out.q.begin(), out.q.end());
    return out;
}

// Piecewise-linear warp through the given (t, phi(t)) knots; endpoints pinned
// to 0 -> 0 and N-1 -> N-1 so the warped frame keeps its length and range.
inline IQFrame augment_time_warp(const IQFrame& frame,
                                 const std::vector<std::pair<double, double>>& knots) {
    frame.validate();
    const double n1 = static_cast<double>(frame.length() - 1);
    if (knots.size() < 2) throw InvalidWarp("augment_time_warp: need at least two knots");
    for (std::size_t k = 1; k < knots.size(); ++k) {
        if (!(knots[k].first > knots[k - 1].first) || !(knots[k].second > knots[k - 1].second))
            throw InvalidWarp("augment_time_warp: knots must be strictly increasing");
    }
    if (knots.front().first != 0.0 || knots.front().second != 0.0 ||
        knots.back().first != n1 || knots.back().second != n1)
        throw InvalidWarp("augment_time_warp: endpoints must map 0->0 and N-1->N-1");

    auto warp = [&](double t) {
        auto it = std::upper_bound(knots.begin(), knots.end(), t,
                                   [](double v, const auto& k) { return v < k.first; });
        if (it == knots.begin()) return knots.front().second;
        if (it == knots.end()) return knots.back().second;
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        const double a = (t - lo.first) / (hi.first - lo.first);
        return lo.second + a * (hi.second - lo.second);
    };
    auto sample = [](const std::vector<double>& x, double t) {
        const auto lo = static_cast<std::size_t>(std::floor(t));
        if (lo + 1 >= x.size()) return x.back();
        const double a = t - static_cast<double>(lo);
        return (1.0 - a) * x[lo] + a * x[lo + 1];
    };

    IQFrame out = frame;
    for (std::size_t n = 0; n < frame.length(); ++n) {
        const double t = warp(static_cast<double>(n));
        out.i[n] = sample(frame.i, t);
        out.q[n] = sample(frame.q, t);
    }
    return out;
}

}  // namespace rfml::signal
