#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rfml/metrics/confusion.hpp"
#include "rfml/metrics/report.hpp"
#include "rfml/metrics/ssim.hpp"
#include "rfml/rng.hpp"

using namespace rfml;
using namespace rfml::metrics;
using rfml::signal::IQFrame;

namespace {

IQFrame random_frame(std::size_t len, std::uint64_t seed) {
    Rng rng(seed);
    IQFrame f;
    f.i.resize(len);
    f.q.resize(len);
    for (std::size_t n = 0; n < len; ++n) {
        f.i[n] = rng.normal();
        f.q[n] = rng.normal();
    }
    return f;
}

// Independent SSIM oracle: raw-moment accumulation (E[x^2]-mu^2) rather than
// the centered two-pass form used by the implementation.
double ssim_oracle(const IQFrame& x, const IQFrame& y, int w, double k1, double k2) {
    auto range = [](const std::vector<double>& v) {
        return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
    };
    double lr[2] = {range(x.i), range(x.q)};
    if (lr[0] == 0.0) lr[0] = lr[1];
    if (lr[1] == 0.0) lr[1] = lr[0];
    double acc = 0.0;
    std::size_t count = 0;
    for (int ch = 0; ch < 2; ++ch) {
        const auto& xv = ch == 0 ? x.i : x.q;
        const auto& yv = ch == 0 ? y.i : y.q;
        const double c1 = (k1 * lr[ch]) * (k1 * lr[ch]);
        const double c2 = (k2 * lr[ch]) * (k2 * lr[ch]);
        for (std::size_t p = 0; p + w <= xv.size(); ++p) {
            double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
            for (int n = 0; n < w; ++n) {
                sx += xv[p + n];
                sy += yv[p + n];
                sxx += xv[p + n] * xv[p + n];
                syy += yv[p + n] * yv[p + n];
                sxy += xv[p + n] * yv[p + n];
            }
            const double mx = sx / w, my = sy / w;
            const double vx = sxx / w - mx * mx;
            const double vy = syy / w - my * my;
            const double cov = sxy / w - mx * my;
            acc += ((2 * mx * my + c1) * (2 * cov + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

}  // namespace

// --- overall accuracy and kappa ----------------------------------------------

TEST(Confusion, OverallAccuracy) {
    ConfusionMatrix diag{{7, 0}, {0, 3}};
    EXPECT_DOUBLE_EQ(overall_accuracy(diag), 1.0);
    ConfusionMatrix off{{0, 5}, {9, 0}};
    EXPECT_DOUBLE_EQ(overall_accuracy(off), 0.0);
    ConfusionMatrix hand{{40, 10}, {5, 45}};
    EXPECT_DOUBLE_EQ(overall_accuracy(hand), 0.85);
    ConfusionMatrix empty(3);
    EXPECT_THROW(overall_accuracy(empty), InvalidArgument);
    EXPECT_THROW(overall_accuracy(ConfusionMatrix{}), InvalidArgument);
}

TEST(Confusion, KappaHandCases) {
    ConfusionMatrix diag{{7, 0}, {0, 3}};
    EXPECT_DOUBLE_EQ(kappa(diag), 1.0);
    // PE = (50*45 + 50*55)/100^2 = 0.5, kappa = (0.85-0.5)/0.5 = 0.70
    ConfusionMatrix hand{{40, 10}, {5, 45}};
    EXPECT_DOUBLE_EQ(kappa(hand), 0.70);
    ConfusionMatrix chance{{25, 25}, {25, 25}};
    EXPECT_DOUBLE_EQ(kappa(chance), 0.0);
    ConfusionMatrix degenerate{{12, 0}, {0, 0}};
    EXPECT_THROW(kappa(degenerate), DegenerateKappa);
}

TEST(Confusion, PermutationInvariance) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 2 + rng.below(4);
        ConfusionMatrix cm(k);
        for (auto& row : cm.counts)
            for (auto& c : row) c = static_cast<std::int64_t>(rng.below(20));
        cm.counts[0][0] += 1;  // ensure N >= 1 and some diagonal mass
        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm.begin(), perm.end());
        ConfusionMatrix pm(k);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) pm.counts[perm[i]][perm[j]] = cm.counts[i][j];
        EXPECT_NEAR(overall_accuracy(pm), overall_accuracy(cm), 1e-15);
        bool degenerate = false;
        double kc = 0.0, kp = 0.0;
        try {
            kc = kappa(cm);
            kp = kappa(pm);
        } catch (const DegenerateKappa&) {
            degenerate = true;
        }
        if (!degenerate) {
            EXPECT_NEAR(kp, kc, 1e-12);
        }
    }
}

TEST(Confusion, KappaBoundedByAccuracy) {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 2 + rng.below(3);
        ConfusionMatrix cm(k);
        for (auto& row : cm.counts)
            for (auto& c : row) c = static_cast<std::int64_t>(rng.below(30)) + 1;
        const double oa = overall_accuracy(cm);
        double pe = 0.0;
        const double n = static_cast<double>(cm.total());
        for (std::size_t i = 0; i < k; ++i)
            pe += static_cast<double>(cm.row_sum(i)) * static_cast<double>(cm.col_sum(i)) / (n * n);
        if (pe > 0.0 && pe < 1.0 && oa >= pe) {
            EXPECT_LE(kappa(cm), oa + 1e-12);
        }
    }
}

// --- mse ----------------------------------------------------------------------

TEST(Mse, HandCases) {
    auto x = random_frame(32, 1);
    EXPECT_DOUBLE_EQ(mse(x, x), 0.0);

    IQFrame zero;
    zero.i.assign(64, 0.0);
    zero.q.assign(64, 0.0);
    IQFrame unit;  // unit mean square per element
    unit.i.assign(64, 1.0);
    unit.q.assign(64, -1.0);
    EXPECT_DOUBLE_EQ(mse(zero, unit), 1.0);

    IQFrame a, b;
    a.i = {1.0, 0.0};
    a.q = {0.0, 0.0};
    b.i = {0.0, 1.0};
    b.q = {0.0, 0.0};
    EXPECT_DOUBLE_EQ(mse(a, b), 0.5);  // residuals i=[1,-1], q=[0,0]

    auto c = random_frame(8, 2);
    EXPECT_THROW(mse(x, c), ShapeMismatch);
}

// --- ssim_1d ------------------------------------------------------------------

TEST(Ssim, IdenticalSignalsGiveOne) {
    auto x = random_frame(64, 3);
    EXPECT_NEAR(ssim_1d(x, x), 1.0, 1e-9);
}

TEST(Ssim, AffineCopyGivesOne) {
    auto x = random_frame(64, 4);
    IQFrame y = x;
    for (auto& v : y.i) v = 2.5 * v - 1.0;
    for (auto& v : y.q) v = 2.5 * v - 1.0;
    EXPECT_NEAR(ssim_1d(y, y), 1.0, 1e-9);
}

TEST(Ssim, SingleWindowHandCase) {
    IQFrame x, y;
    x.i.assign(11, 1.0);
    x.q.assign(11, 1.0);
    y.i.assign(11, 2.0);
    y.q.assign(11, 2.0);
    const double c1 = 1e-4, c2 = 9e-4;  // (0.01*1)^2, (0.03*1)^2 with Lr forced to 1
    const double want = ((2.0 * 1.0 * 2.0 + c1) * c2) / ((1.0 + 4.0 + c1) * c2);
    EXPECT_NEAR(ssim_1d(x, y, 11, 0.01, 0.03, 1.0), want, 1e-12);
}

TEST(Ssim, MatchesBruteForceOracle) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto x = random_frame(48, 100 + seed);
        auto y = random_frame(48, 200 + seed);
        EXPECT_NEAR(ssim_1d(x, y, 11, 0.01, 0.03), ssim_oracle(x, y, 11, 0.01, 0.03), 1e-9);
    }
}

TEST(Ssim, SymmetricWithFixedRange) {
    auto x = random_frame(40, 7);
    auto y = random_frame(40, 8);
    EXPECT_NEAR(ssim_1d(x, y, 11, 0.01, 0.03, 2.0), ssim_1d(y, x, 11, 0.01, 0.03, 2.0), 1e-9);
}

TEST(Ssim, DegenerateReferenceHandling) {
    IQFrame x, y;
    x.i.assign(16, 1.0);  // zero range on I
    x.q = random_frame(16, 9).q;
    y = random_frame(16, 10);
    EXPECT_NO_THROW(ssim_1d(x, y));  // I channel borrows Q's range

    IQFrame flat;
    flat.i.assign(16, 2.0);
    flat.q.assign(16, -1.0);
    EXPECT_THROW(ssim_1d(flat, y), DegenerateReference);
}

TEST(Ssim, ArgumentValidation) {
    auto x = random_frame(16, 11);
    auto y = random_frame(16, 12);
    EXPECT_THROW(ssim_1d(x, y, 10), InvalidArgument);
    EXPECT_THROW(ssim_1d(x, y, 17), InvalidArgument);
    EXPECT_THROW(ssim_1d(x, random_frame(8, 13)), ShapeMismatch);
}

// --- evaluate_classifier --------------------------------------------------------

namespace {
signal::SignalDataset labeled_dataset(std::size_t per_class, std::size_t k) {
    signal::SignalDataset ds;
    for (std::size_t c = 0; c < k; ++c) ds.class_names.push_back("c" + std::to_string(c));
    ds.split_tag = "test";
    std::uint64_t seed = 0;
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t n = 0; n < per_class; ++n) {
            auto f = random_frame(16, seed++);
            f.label = static_cast<int>(c);
            f.snr_db = (n % 2 == 0) ? 0.0 : 10.0;
            ds.frames.push_back(std::move(f));
        }
    return ds;
}
}  // namespace

TEST(Evaluate, OraclePredictorIsPerfect) {
    auto ds = labeled_dataset(20, 3);
    auto oracle = [](const std::vector<IQFrame>& batch) {
        std::vector<int> out;
        for (const auto& f : batch) out.push_back(*f.label);
        return out;
    };
    auto res = evaluate_classifier(oracle, ds, 8);
    EXPECT_DOUBLE_EQ(res.report.oa, 1.0);
    EXPECT_DOUBLE_EQ(res.report.kappa, 1.0);
    for (const auto& [snr, oa] : res.report.per_snr_oa) EXPECT_DOUBLE_EQ(oa, 1.0);
}

TEST(Evaluate, ConstantPredictorIsChanceLevel) {
    const std::size_t k = 4;
    auto ds = labeled_dataset(25, k);
    auto constant = [](const std::vector<IQFrame>& batch) {
        return std::vector<int>(batch.size(), 2);
    };
    auto res = evaluate_classifier(constant, ds, 16);
    EXPECT_NEAR(res.report.oa, 1.0 / k, 1e-12);
    EXPECT_NEAR(res.report.kappa, 0.0, 1e-12);  // PE = 1/k for a constant column
}

TEST(Evaluate, RowSumsMatchClassCounts) {
    auto ds = labeled_dataset(17, 3);
    auto constant = [](const std::vector<IQFrame>& batch) {
        return std::vector<int>(batch.size(), 0);
    };
    auto res = evaluate_classifier(constant, ds, 5);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(res.confusion.row_sum(i), 17);
}

TEST(Evaluate, UnlabeledFramesRejected) {
    auto ds = labeled_dataset(4, 2);
    ds.frames[3].label.reset();
    auto oracle = [](const std::vector<IQFrame>& batch) {
        return std::vector<int>(batch.size(), 0);
    };
    EXPECT_THROW(evaluate_classifier(oracle, ds, 4), MissingLabels);
}

TEST(Report, JsonAndCsvShape) {
    MetricsReport r;
    r.oa = 0.5;
    r.kappa = 0.25;
    r.per_snr_oa = {{0.0, 0.4}, {10.0, 0.6}};
    r.ssim_mean = 0.9;
    auto j = r.to_json();
    EXPECT_DOUBLE_EQ(j["oa"].get<double>(), 0.5);
    EXPECT_EQ(j["per_snr_oa"].size(), 2u);
    EXPECT_TRUE(j["mse_mean"].is_null());
    const auto csv = r.per_snr_csv();
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);  // header + 2 rows
}
