#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "rfml/signal/frame.hpp"

namespace rfml::signal {

namespace detail {

// Solves the (p+1)x(p+1) system M a = b in place, partial pivoting.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> m, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        std::swap(m[col], m[piv]);
        std::swap(b[col], b[piv]);
        if (m[col][col] == 0.0) throw InvalidArgument("sg_filter: singular fit system");
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = m[r][col] / m[col][col];
            for (std::size_t c = col; c < n; ++c) m[r][c] -= f * m[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t ri = n; ri-- > 0;) {
        double acc = b[ri];
        for (std::size_t c = ri + 1; c < n; ++c) acc -= m[ri][c] * x[c];
        x[ri] = acc / m[ri][ri];
    }
    return x;
}

// Least-squares polynomial coefficients for window values y at integer
// offsets t = -h..h (a0 + a1 t + ... + ap t^p).
inline std::vector<double> sg_fit(const std::vector<double>& y, int h, int polyorder) {
    const int p1 = polyorder + 1;
    std::vector<std::vector<double>> ata(p1, std::vector<double>(p1, 0.0));
    std::vector<double> aty(p1, 0.0);
    for (int t = -h; t <= h; ++t) {
        double powk = 1.0;
        std::vector<double> pw(p1);
        for (int k = 0; k < p1; ++k) {
            pw[k] = powk;
            powk *= t;
        }
        for (int r = 0; r < p1; ++r) {
            for (int c = 0; c < p1; ++c) ata[r][c] += pw[r] * pw[c];
            aty[r] += pw[r] * y[static_cast<std::size_t>(t + h)];
        }
    }
    return solve_dense(std::move(ata), std::move(aty));
}

inline double poly_eval(const std::vector<double>& a, double t) {
    double v = 0.0;
    for (std::size_t k = a.size(); k-- > 0;) v = v * t + a[k];
    return v;
}

inline std::vector<double> sg_channel(const std::vector<double>& x, int window, int polyorder) {
    const int h = window / 2;
    const auto len = static_cast<std::ptrdiff_t>(x.size());
    std::vector<double> out(x.size());
    std::vector<double> win(static_cast<std::size_t>(window));

    // Interior: centered window, evaluate the fit at offset 0.
    for (std::ptrdiff_t n = h; n < len - h; ++n) {
        for (int j = 0; j < window; ++j) win[static_cast<std::size_t>(j)] = x[n - h + j];
        out[static_cast<std::size_t>(n)] = sg_fit(win, h, polyorder)[0];
    }
    // Edges: evaluate the first/last full-window fit at the edge offsets, so
    // inputs lying on a polynomial of degree <= polyorder reproduce exactly.
    if (len >= static_cast<std::ptrdiff_t>(window)) {
        for (int j = 0; j < window; ++j) win[static_cast<std::size_t>(j)] = x[j];
        auto head = sg_fit(win, h, polyorder);
        for (std::ptrdiff_t n = 0; n < h && n < len; ++n)
            out[static_cast<std::size_t>(n)] = poly_eval(head, static_cast<double>(n - h));
        for (int j = 0; j < window; ++j) win[static_cast<std::size_t>(j)] = x[len - window + j];
        auto tail = sg_fit(win, h, polyorder);
        for (std::ptrdiff_t n = std::max<std::ptrdiff_t>(len - h, 0); n < len; ++n)
            out[static_cast<std::size_t>(n)] = poly_eval(tail, static_cast<double>(n - (len - 1 - h)));
    }
    return out;
}

}  // namespace detail

// Savitzky-Golay smoothing, applied to I and Q independently.
inline IQFrame sg_filter(const IQFrame& frame, int window, int polyorder) {
    if (window < 1 || window % 2 == 0)
        throw InvalidArgument("sg_filter: window must be odd and positive");
    if (polyorder < 0 || polyorder >= window)
        throw InvalidArgument("sg_filter: need window > polyorder >= 0");
    frame.validate();
    if (frame.length() < static_cast<std::size_t>(window))
        throw InvalidArgument("sg_filter: frame shorter than window");
    IQFrame out = frame;
    out.i = detail::sg_channel(frame.i, window, polyorder);
    out.q = detail::sg_channel(frame.q, window, polyorder);
    return out;
}

}  // namespace rfml::signal
