#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rfml/common.hpp"

namespace rfml::signal {

// One radio frame as paired I/Q sample vectors plus optional metadata.
struct IQFrame {
    std::vector<double> i;
    std::vector<double> q;
    std::optional<int> label;
    std::optional<double> snr_db;
    std::optional<std::string> scheme;

    IQFrame() = default;
    IQFrame(std::vector<double> i_samples, std::vector<double> q_samples)
        : i(std::move(i_samples)), q(std::move(q_samples)) {
        if (i.size() != q.size()) throw ShapeMismatch("IQFrame: i/q length mismatch");
    }

    std::size_t length() const { return i.size(); }

    void validate() const {
        if (i.size() != q.size()) throw ShapeMismatch("IQFrame: i/q length mismatch");
        if (i.empty()) throw InvalidArgument("IQFrame: empty frame");
        for (std::size_t n = 0; n < i.size(); ++n) {
            if (!std::isfinite(i[n]) || !std::isfinite(q[n]))
                throw InvalidArgument("IQFrame: non-finite sample at index " + std::to_string(n));
        }
    }
};

// Total power sum(i^2 + q^2).
inline double total_power(const IQFrame& f) {
    double p = 0.0;
    for (std::size_t n = 0; n < f.length(); ++n) p += f.i[n] * f.i[n] + f.q[n] * f.q[n];
    return p;
}

// Mean per-sample power.
inline double mean_power(const IQFrame& f) {
    if (f.length() == 0) throw InvalidArgument("mean_power: empty frame");
    return total_power(f) / static_cast<double>(f.length());
}

// Rescales to unit mean per-sample power. Metadata is preserved.
inline IQFrame normalize(const IQFrame& f) {
    f.validate();
    const double p = mean_power(f);
    if (p <= 0.0) throw DegenerateSignal("normalize: all-zero frame");
    const double s = 1.0 / std::sqrt(p);
    IQFrame out = f;
    for (std::size_t n = 0; n < out.length(); ++n) {
        out.i[n] *= s;
        out.q[n] *= s;
    }
    return out;
}

// 10*log10(P_clean / P_residual); kNoiselessDb when the residual vanishes.
inline double estimate_snr(const IQFrame& clean, const IQFrame& noisy) {
    if (clean.length() != noisy.length())
        throw ShapeMismatch("estimate_snr: length mismatch");
    double sig = 0.0, res = 0.0;
    for (std::size_t n = 0; n < clean.length(); ++n) {
        const double di = noisy.i[n] - clean.i[n];
        const double dq = noisy.q[n] - clean.q[n];
        sig += clean.i[n] * clean.i[n] + clean.q[n] * clean.q[n];
        res += di * di + dq * dq;
    }
    if (res == 0.0) return kNoiselessDb;
    return 10.0 * std::log10(sig / res);
}

}  // namespace rfml::signal
