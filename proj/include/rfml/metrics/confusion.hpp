#pragma once

#include <cstdint>
#include <vector>

#include "rfml/common.hpp"

namespace rfml::metrics {

// k x k counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
    std::vector<std::vector<std::int64_t>> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t k) : counts(k, std::vector<std::int64_t>(k, 0)) {}
    ConfusionMatrix(std::initializer_list<std::vector<std::int64_t>> rows) : counts(rows) {}

    std::size_t num_classes() const { return counts.size(); }

    void add(int true_class, int predicted) {
        counts.at(static_cast<std::size_t>(true_class)).at(static_cast<std::size_t>(predicted))++;
    }

    std::int64_t total() const {
        std::int64_t n = 0;
        for (const auto& row : counts)
            for (auto c : row) {
                if (c < 0) throw InvalidArgument("ConfusionMatrix: negative count");
                n += c;
            }
        return n;
    }

    std::int64_t row_sum(std::size_t i) const {
        std::int64_t n = 0;
        for (auto c : counts[i]) n += c;
        return n;
    }

    std::int64_t col_sum(std::size_t j) const {
        std::int64_t n = 0;
        for (const auto& row : counts) n += row[j];
        return n;
    }
};

// sum_i n_ii / N
inline double overall_accuracy(const ConfusionMatrix& cm) {
    const std::int64_t n = cm.total();
    if (cm.num_classes() == 0 || n < 1) throw InvalidArgument("overall_accuracy: empty matrix");
    std::int64_t diag = 0;
    for (std::size_t i = 0; i < cm.num_classes(); ++i) diag += cm.counts[i][i];
    return static_cast<double>(diag) / static_cast<double>(n);
}

// (OA - PE) / (1 - PE), PE = sum_i row_i * col_i / N^2
inline double kappa(const ConfusionMatrix& cm) {
    const std::int64_t n = cm.total();
    if (cm.num_classes() == 0 || n < 1) throw InvalidArgument("kappa: empty matrix");
    const double oa = overall_accuracy(cm);
    double pe = 0.0;
    const double nn = static_cast<double>(n) * static_cast<double>(n);
    for (std::size_t i = 0; i < cm.num_classes(); ++i)
        pe += static_cast<double>(cm.row_sum(i)) * static_cast<double>(cm.col_sum(i)) / nn;
    if (pe == 1.0) throw DegenerateKappa("kappa: expected agreement is 1 (single populated cell)");
    return (oa - pe) / (1.0 - pe);
}

}  // namespace rfml::metrics
