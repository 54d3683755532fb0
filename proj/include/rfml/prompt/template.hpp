#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <string>
#include <vector>

#include "rfml/signal/frame.hpp"

namespace rfml::prompt {

struct FrameStats {
    double min = 0.0, max = 0.0, median = 0.0;
    std::string trend;           // flat | increasing | decreasing
    std::vector<std::size_t> top_lags;  // strongest autocorrelation lags >= 1
};

// Descriptive statistics feeding the prompt template: sample extrema/median
// over both channels, the sign of the least-squares slope of per-sample
// power, and the five strongest autocorrelation lags.
inline FrameStats frame_stats(const signal::IQFrame& frame, std::size_t num_lags = 5) {
    frame.validate();
    const std::size_t len = frame.length();
    FrameStats st;

    std::vector<double> all;
    all.reserve(2 * len);
    all.insert(all.end(), frame.i.begin(), frame.i.end());
    all.insert(all.end(), frame.q.begin(), frame.q.end());
    std::sort(all.begin(), all.end());
    st.min = all.front();
    st.max = all.back();
    st.median = all.size() % 2 == 1 ? all[all.size() / 2]
                                    : 0.5 * (all[all.size() / 2 - 1] + all[all.size() / 2]);

    // Least-squares slope of p_n = i_n^2 + q_n^2 against n.
    double sn = 0.0, sp = 0.0, snp = 0.0, snn = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
        const double p = frame.i[n] * frame.i[n] + frame.q[n] * frame.q[n];
        const double t = static_cast<double>(n);
        sn += t;
        sp += p;
        snp += t * p;
        snn += t * t;
    }
    const double denom = static_cast<double>(len) * snn - sn * sn;
    const double slope = denom == 0.0 ? 0.0 : (static_cast<double>(len) * snp - sn * sp) / denom;
    st.trend = std::abs(slope) < 1e-9 ? "flat" : (slope > 0.0 ? "increasing" : "decreasing");

    // |r(l)| for complex autocorrelation, ties broken toward the lower lag.
    std::vector<std::pair<double, std::size_t>> mags;
    for (std::size_t lag = 1; lag < len; ++lag) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t n = 0; n + lag < len; ++n) {
            const std::complex<double> a{frame.i[n], -frame.q[n]};  // conj(x_n)
            const std::complex<double> b{frame.i[n + lag], frame.q[n + lag]};
            acc += a * b;
        }
        mags.emplace_back(std::abs(acc), lag);
    }
    std::stable_sort(mags.begin(), mags.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t k = 0; k < std::min(num_lags, mags.size()); ++k)
        st.top_lags.push_back(mags[k].second);
    return st;
}

inline constexpr const char* kDatasetDelimiter = "[DATASET]";
inline constexpr const char* kTaskDelimiter = "[TASK]";
inline constexpr const char* kStatsDelimiter = "[STATS]";

// Fig-3-style hardware prompt: dataset description, task instruction, and
// per-instance statistics, each behind a fixed delimiter.
inline std::string build_prompt_text(const std::string& dataset_desc, const std::string& task_desc,
                                     const signal::IQFrame& frame) {
    if (dataset_desc.empty() || task_desc.empty())
        throw InvalidArgument("build_prompt_text: empty description");
    const FrameStats st = frame_stats(frame);
    char stats[256];
    std::string lags;
    for (std::size_t k = 0; k < st.top_lags.size(); ++k) {
        if (k) lags += ",";
        lags += std::to_string(st.top_lags[k]);
    }
    std::snprintf(stats, sizeof(stats), "min=%.4f max=%.4f median=%.4f trend=%s top_lags=%s",
                  st.min, st.max, st.median, st.trend.c_str(), lags.c_str());
    std::string out;
    out += kDatasetDelimiter;
    out += " " + dataset_desc + "\n";
    out += kTaskDelimiter;
    out += " " + task_desc + "\n";
    out += kStatsDelimiter;
    out += " ";
    out += stats;
    return out;
}

}  // namespace rfml::prompt
