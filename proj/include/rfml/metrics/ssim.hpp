#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "rfml/signal/frame.hpp"

namespace rfml::metrics {

// Mean over both channels of (x - y)^2.
inline double mse(const signal::IQFrame& x, const signal::IQFrame& y) {
    if (x.length() != y.length()) throw ShapeMismatch("mse: length mismatch");
    if (x.length() == 0) throw InvalidArgument("mse: empty frames");
    double acc = 0.0;
    for (std::size_t n = 0; n < x.length(); ++n) {
        const double di = x.i[n] - y.i[n];
        const double dq = x.q[n] - y.q[n];
        acc += di * di + dq * dq;
    }
    return acc / (2.0 * static_cast<double>(x.length()));
}

namespace detail {

// SSIM over one sliding window pair with biased moments.
inline double ssim_window(const double* x, const double* y, int w, double c1, double c2) {
    double mx = 0.0, my = 0.0;
    for (int n = 0; n < w; ++n) {
        mx += x[n];
        my += y[n];
    }
    mx /= w;
    my /= w;
    double vx = 0.0, vy = 0.0, cov = 0.0;
    for (int n = 0; n < w; ++n) {
        const double dx = x[n] - mx;
        const double dy = y[n] - my;
        vx += dx * dx;
        vy += dy * dy;
        cov += dx * dy;
    }
    vx /= w;
    vy /= w;
    cov /= w;
    return ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
           ((mx * mx + my * my + c1) * (vx + vy + c2));
}

}  // namespace detail

// Windowed 1-D SSIM between reference x and candidate y. I and Q are treated
// as two independent signals; the result is the mean over every valid window
// position on both channels. The dynamic range is (max - min) of the
// reference per channel; lr_override substitutes a fixed range (test hook).
inline double ssim_1d(const signal::IQFrame& x, const signal::IQFrame& y, int window_w = 11,
                      double k1 = 0.01, double k2 = 0.03,
                      std::optional<double> lr_override = std::nullopt) {
    if (x.length() != y.length()) throw ShapeMismatch("ssim_1d: length mismatch");
    if (window_w < 1 || window_w % 2 == 0) throw InvalidArgument("ssim_1d: window must be odd");
    if (static_cast<std::size_t>(window_w) > x.length())
        throw InvalidArgument("ssim_1d: window larger than frame");

    auto range_of = [](const std::vector<double>& v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return *hi - *lo;
    };
    double lr_i = lr_override.value_or(range_of(x.i));
    double lr_q = lr_override.value_or(range_of(x.q));
    if (lr_i == 0.0 && lr_q == 0.0)
        throw DegenerateReference("ssim_1d: reference has zero range on both channels");
    if (lr_i == 0.0) lr_i = lr_q;
    if (lr_q == 0.0) lr_q = lr_i;

    const std::size_t positions = x.length() - static_cast<std::size_t>(window_w) + 1;
    double acc = 0.0;
    for (int ch = 0; ch < 2; ++ch) {
        const auto& xv = ch == 0 ? x.i : x.q;
        const auto& yv = ch == 0 ? y.i : y.q;
        const double lr = ch == 0 ? lr_i : lr_q;
        const double c1 = (k1 * lr) * (k1 * lr);
        const double c2 = (k2 * lr) * (k2 * lr);
        for (std::size_t p = 0; p < positions; ++p)
            acc += detail::ssim_window(xv.data() + p, yv.data() + p, window_w, c1, c2);
    }
    return acc / (2.0 * static_cast<double>(positions));
}

}  // namespace rfml::metrics
