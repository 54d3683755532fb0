#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "rfml/rng.hpp"
#include "rfml/signal/frame.hpp"

namespace rfml::signal {

enum class Scheme { BPSK, QPSK, PSK8, PAM4, QAM16, QAM64, GFSK, CPFSK };

inline const std::vector<std::pair<std::string, Scheme>>& scheme_names() {
    static const std::vector<std::pair<std::string, Scheme>> table = {
        {"BPSK", Scheme::BPSK},   {"QPSK", Scheme::QPSK},   {"8PSK", Scheme::PSK8},
        {"PAM4", Scheme::PAM4},   {"QAM16", Scheme::QAM16}, {"QAM64", Scheme::QAM64},
        {"GFSK", Scheme::GFSK},   {"CPFSK", Scheme::CPFSK},
    };
    return table;
}

inline Scheme parse_scheme(const std::string& name) {
    for (const auto& [n, s] : scheme_names())
        if (n == name) return s;
    throw UnsupportedScheme("unknown modulation scheme: " + name);
}

inline std::string scheme_name(Scheme s) {
    for (const auto& [n, v] : scheme_names())
        if (v == s) return n;
    throw UnsupportedScheme("unnamed scheme");
}

inline bool is_fsk(Scheme s) { return s == Scheme::GFSK || s == Scheme::CPFSK; }

// Symbols per constellation; FSK schemes are binary.
inline int scheme_order(Scheme s) {
    switch (s) {
        case Scheme::BPSK: return 2;
        case Scheme::QPSK: return 4;
        case Scheme::PSK8: return 8;
        case Scheme::PAM4: return 4;
        case Scheme::QAM16: return 16;
        case Scheme::QAM64: return 64;
        case Scheme::GFSK: return 2;
        case Scheme::CPFSK: return 2;
    }
    throw UnsupportedScheme("unknown scheme enum");
}

namespace detail {

// Gray-coded PAM levels {-(m-1),...,+(m-1)} step 2, normalized later.
inline double gray_pam_level(int sym, int m) {
    int gray = sym ^ (sym >> 1);
    return static_cast<double>(2 * gray - (m - 1));
}

inline std::complex<double> map_symbol(Scheme s, int sym) {
    constexpr double pi = 3.14159265358979323846;
    switch (s) {
        case Scheme::BPSK:
            return {sym == 0 ? 1.0 : -1.0, 0.0};
        case Scheme::QPSK: {
            const double a = pi / 4.0 + (sym ^ (sym >> 1)) * pi / 2.0;
            return {std::cos(a), std::sin(a)};
        }
        case Scheme::PSK8: {
            const double a = (sym ^ (sym >> 1)) * pi / 4.0;
            return {std::cos(a), std::sin(a)};
        }
        case Scheme::PAM4:
            // {+-1,+-3}/sqrt(5): E[a^2] = (1+9)/2 = 5
            return {gray_pam_level(sym & 3, 4) / std::sqrt(5.0), 0.0};
        case Scheme::QAM16: {
            // {+-1,+-3}^2 / sqrt(10): per-axis E = 5, total 10
            const double re = gray_pam_level(sym & 3, 4);
            const double im = gray_pam_level((sym >> 2) & 3, 4);
            return std::complex<double>(re, im) / std::sqrt(10.0);
        }
        case Scheme::QAM64: {
            // {+-1,+-3,+-5,+-7}^2 / sqrt(42)
            const double re = gray_pam_level(sym & 7, 8);
            const double im = gray_pam_level((sym >> 3) & 7, 8);
            return std::complex<double>(re, im) / std::sqrt(42.0);
        }
        default:
            throw UnsupportedScheme("map_symbol: not a linear scheme");
    }
}

// Gaussian frequency pulse for GFSK: rect(1 symbol) convolved with a Gaussian
// of BT = 0.35, truncated to `span` symbols, normalized to integrate to 1/2
// (modulation index 0.5 contributes pi per full symbol transition).
inline std::vector<double> gfsk_pulse(int sps, int span = 3, double bt = 0.35) {
    constexpr double pi = 3.14159265358979323846;
    const int n = span * sps;
    std::vector<double> p(n, 0.0);
    const double sigma = std::sqrt(std::log(2.0)) / (2.0 * pi * bt);  // in symbols
    for (int k = 0; k < n; ++k) {
        const double t = (k + 0.5) / sps - span / 2.0;  // symbol units, centered
        // integral of the Gaussian over the one-symbol rect around t
        const double a = (t + 0.5) / (sigma * std::sqrt(2.0));
        const double b = (t - 0.5) / (sigma * std::sqrt(2.0));
        p[k] = 0.5 * (std::erf(a) - std::erf(b));
    }
    double sum = 0.0;
    for (double v : p) sum += v;
    for (double& v : p) v *= 0.5 / sum;
    return p;
}

// Root-raised-cosine taps, unit-energy, roll-off beta, truncated to
// `span` symbols. Optional pulse shaping for the linear schemes.
inline std::vector<double> rrc_taps(int sps, double beta = 0.35, int span = 8) {
    constexpr double pi = 3.14159265358979323846;
    const int n = span * sps + 1;
    std::vector<double> h(n);
    for (int k = 0; k < n; ++k) {
        const double t = (k - span * sps / 2.0) / sps;
        double v;
        if (std::abs(t) < 1e-12) {
            v = 1.0 + beta * (4.0 / pi - 1.0);
        } else if (std::abs(std::abs(4.0 * beta * t) - 1.0) < 1e-9) {
            v = (beta / std::sqrt(2.0)) *
                ((1 + 2 / pi) * std::sin(pi / (4 * beta)) + (1 - 2 / pi) * std::cos(pi / (4 * beta)));
        } else {
            v = (std::sin(pi * t * (1 - beta)) + 4 * beta * t * std::cos(pi * t * (1 + beta))) /
                (pi * t * (1 - std::pow(4 * beta * t, 2)));
        }
        h[k] = v;
    }
    double e = 0.0;
    for (double v : h) e += v * v;
    const double s = 1.0 / std::sqrt(e);
    for (double& v : h) v *= s;
    return h;
}

}  // namespace detail

enum class Pulse { Rect, Rrc };

// Deterministic map from symbol indices to a modulated frame. This is the
// test hook behind generate_modulated: callers can force any symbol stream.
inline IQFrame modulate_symbols(Scheme scheme, const std::vector<int>& symbols, int sps,
                                Pulse pulse = Pulse::Rect) {
    if (symbols.empty()) throw InvalidArgument("modulate_symbols: empty symbol stream");
    if (sps < 1) throw InvalidArgument("modulate_symbols: sps must be >= 1");
    const int order = scheme_order(scheme);
    for (int s : symbols)
        if (s < 0 || s >= order) throw InvalidArgument("modulate_symbols: symbol out of range");

    const std::size_t num = symbols.size();
    const std::size_t len = num * static_cast<std::size_t>(sps);
    IQFrame out;
    out.i.assign(len, 0.0);
    out.q.assign(len, 0.0);
    out.scheme = scheme_name(scheme);

    if (is_fsk(scheme)) {
        // Continuous-phase modulation, index h = 0.5, binary alphabet {-1,+1}.
        constexpr double pi = 3.14159265358979323846;
        std::vector<double> finst(len, 0.0);  // phase increment per sample
        if (scheme == Scheme::CPFSK) {
            for (std::size_t k = 0; k < num; ++k) {
                const double a = symbols[k] == 0 ? -1.0 : 1.0;
                for (int n = 0; n < sps; ++n) finst[k * sps + n] = a * pi * 0.5 / sps;
            }
        } else {
            const auto g = detail::gfsk_pulse(sps);
            for (std::size_t k = 0; k < num; ++k) {
                const double a = symbols[k] == 0 ? -1.0 : 1.0;
                for (std::size_t j = 0; j < g.size(); ++j) {
                    const std::size_t n = k * sps + j;
                    if (n < len) finst[n] += a * 2.0 * pi * 0.5 * g[j];
                }
            }
        }
        double phase = 0.0;
        for (std::size_t n = 0; n < len; ++n) {
            phase += finst[n];
            out.i[n] = std::cos(phase);
            out.q[n] = std::sin(phase);
        }
        return out;  // constant modulus, already unit power
    }

    if (pulse == Pulse::Rect) {
        for (std::size_t k = 0; k < num; ++k) {
            const auto c = detail::map_symbol(scheme, symbols[k]);
            for (int n = 0; n < sps; ++n) {
                out.i[k * sps + n] = c.real();
                out.q[k * sps + n] = c.imag();
            }
        }
        return out;  // constellations are unit average power by construction
    }

    // RRC shaping: upsample impulses then filter; renormalize to unit power.
    const auto h = detail::rrc_taps(sps);
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(h.size()) / 2;
    std::vector<std::complex<double>> sym(num);
    for (std::size_t k = 0; k < num; ++k) sym[k] = detail::map_symbol(scheme, symbols[k]);
    for (std::size_t n = 0; n < len; ++n) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t j = 0; j < h.size(); ++j) {
            const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(n) - static_cast<std::ptrdiff_t>(j) + half;
            if (m >= 0 && m % sps == 0) {
                const std::size_t k = static_cast<std::size_t>(m) / sps;
                if (k < num) acc += sym[k] * h[j];
            }
        }
        out.i[n] = acc.real();
        out.q[n] = acc.imag();
    }
    return normalize(out);
}

// Random-symbol frame of num_symbols*sps samples, unit average power,
// deterministic per seed.
inline IQFrame generate_modulated(Scheme scheme, int num_symbols, int sps, std::uint64_t seed,
                                  Pulse pulse = Pulse::Rect) {
    if (num_symbols < 1) throw InvalidArgument("generate_modulated: num_symbols must be >= 1");
    if (sps < 1) throw InvalidArgument("generate_modulated: sps must be >= 1");
    Rng rng(seed);
    const int order = scheme_order(scheme);
    std::vector<int> symbols(static_cast<std::size_t>(num_symbols));
    for (auto& s : symbols) s = static_cast<int>(rng.below(static_cast<std::uint64_t>(order)));
    return modulate_symbols(scheme, symbols, sps, pulse);
}

inline IQFrame generate_modulated(const std::string& scheme, int num_symbols, int sps,
                                  std::uint64_t seed, Pulse pulse = Pulse::Rect) {
    return generate_modulated(parse_scheme(scheme), num_symbols, sps, seed, pulse);
}

}  // namespace rfml::signal
