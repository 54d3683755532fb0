#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfml/metrics/confusion.hpp"
#include "rfml/signal/dataset.hpp"

namespace rfml::metrics {

struct MetricsReport {
    double oa = 0.0;
    double kappa = 0.0;
    std::map<double, double> per_snr_oa;
    std::optional<double> ssim_mean;
    std::optional<double> mse_mean;
    double seconds_per_batch = 0.0;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["oa"] = oa;
        j["kappa"] = kappa;
        auto snr = nlohmann::ordered_json::object();
        for (const auto& [s, v] : per_snr_oa) {
            std::ostringstream key;
            key << s;
            snr[key.str()] = v;
        }
        j["per_snr_oa"] = snr;
        j["ssim_mean"] = ssim_mean ? nlohmann::ordered_json(*ssim_mean) : nullptr;
        j["mse_mean"] = mse_mean ? nlohmann::ordered_json(*mse_mean) : nullptr;
        j["seconds_per_batch"] = seconds_per_batch;
        return j;
    }

    // One row per SNR, for the plot command.
    std::string per_snr_csv() const {
        std::ostringstream os;
        os << "snr_db,oa\n";
        for (const auto& [s, v] : per_snr_oa) os << s << "," << v << "\n";
        return os.str();
    }
};

struct EvalResult {
    MetricsReport report;
    ConfusionMatrix confusion;
};

// Predicts class indices for a batch of frames.
using BatchPredictor = std::function<std::vector<int>(const std::vector<signal::IQFrame>&)>;

inline EvalResult evaluate_classifier(const BatchPredictor& predict,
                                      const signal::SignalDataset& ds, int batch_size) {
    if (batch_size < 1) throw InvalidArgument("evaluate_classifier: batch_size must be >= 1");
    if (ds.frames.empty()) throw InvalidArgument("evaluate_classifier: empty dataset");
    for (const auto& f : ds.frames)
        if (!f.label) throw MissingLabels("evaluate_classifier: unlabeled frame");

    EvalResult out;
    out.confusion = ConfusionMatrix(ds.class_names.size());
    std::map<double, std::pair<std::int64_t, std::int64_t>> snr_hits;  // snr -> {correct, total}

    double seconds = 0.0;
    std::size_t batches = 0;
    for (std::size_t at = 0; at < ds.frames.size(); at += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(ds.frames.size(), at + static_cast<std::size_t>(batch_size));
        std::vector<signal::IQFrame> batch(ds.frames.begin() + static_cast<std::ptrdiff_t>(at),
                                           ds.frames.begin() + static_cast<std::ptrdiff_t>(end));
        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<int> pred = predict(batch);
        seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ++batches;
        if (pred.size() != batch.size())
            throw ShapeMismatch("evaluate_classifier: predictor returned wrong count");
        for (std::size_t k = 0; k < batch.size(); ++k) {
            const int truth = *batch[k].label;
            out.confusion.add(truth, pred[k]);
            if (batch[k].snr_db) {
                auto& cell = snr_hits[*batch[k].snr_db];
                cell.second++;
                if (pred[k] == truth) cell.first++;
            }
        }
    }

    out.report.oa = overall_accuracy(out.confusion);
    out.report.kappa = metrics::kappa(out.confusion);
    out.report.seconds_per_batch = seconds / static_cast<double>(batches);
    for (const auto& [snr, cell] : snr_hits)
        out.report.per_snr_oa[snr] =
            static_cast<double>(cell.first) / static_cast<double>(cell.second);
    return out;
}

}  // namespace rfml::metrics
