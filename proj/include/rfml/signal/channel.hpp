#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "rfml/rng.hpp"
#include "rfml/signal/frame.hpp"

namespace rfml::signal {

// Channel response taps plus target received SNR. snr_db == kNoiselessDb
// disables the AWGN term.
struct ChannelSpec {
    std::vector<std::complex<double>> taps{{1.0, 0.0}};
    double snr_db = kNoiselessDb;
    std::uint64_t seed = 0;

    void validate() const {
        if (taps.empty()) throw InvalidArgument("ChannelSpec: empty taps");
        bool nonzero = false;
        for (const auto& t : taps) {
            if (!std::isfinite(t.real()) || !std::isfinite(t.imag()))
                throw InvalidArgument("ChannelSpec: non-finite tap");
            if (t != std::complex<double>{0.0, 0.0}) nonzero = true;
        }
        if (!nonzero) throw InvalidArgument("ChannelSpec: all taps zero");
        if (!std::isfinite(snr_db) && !is_noiseless(snr_db))
            throw InvalidArgument("ChannelSpec: snr_db must be finite or noiseless");
    }
};

// y[n] = sum_k h[k] x[n-k] (same length, tail truncated) + AWGN scaled so the
// measured post-convolution signal power hits the target SNR.
inline IQFrame apply_channel(const IQFrame& frame, const ChannelSpec& chan) {
    frame.validate();
    chan.validate();
    const std::size_t len = frame.length();
    IQFrame out = frame;

    const bool identity_taps =
        chan.taps.size() == 1 && chan.taps[0] == std::complex<double>{1.0, 0.0};
    if (!identity_taps) {
        for (std::size_t n = 0; n < len; ++n) {
            std::complex<double> acc{0.0, 0.0};
            const std::size_t kmax = std::min(chan.taps.size() - 1, n);
            for (std::size_t k = 0; k <= kmax; ++k)
                acc += chan.taps[k] * std::complex<double>{frame.i[n - k], frame.q[n - k]};
            out.i[n] = acc.real();
            out.q[n] = acc.imag();
        }
    }

    if (!is_noiseless(chan.snr_db)) {
        const double psig = mean_power(out);
        const double pnoise = psig / std::pow(10.0, chan.snr_db / 10.0);
        const double sigma = std::sqrt(pnoise / 2.0);  // per real component
        Rng rng(chan.seed);
        for (std::size_t n = 0; n < len; ++n) {
            out.i[n] += sigma * rng.normal();
            out.q[n] += sigma * rng.normal();
        }
        out.snr_db = chan.snr_db;
    }
    return out;
}

// AWGN-only shorthand used by the training corruption path.
inline IQFrame add_awgn(const IQFrame& frame, double snr_db, std::uint64_t seed) {
    ChannelSpec chan;
    chan.snr_db = snr_db;
    chan.seed = seed;
    return apply_channel(frame, chan);
}

}  // namespace rfml::signal
