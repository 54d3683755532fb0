#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "rfml/train/trainer.hpp"
#include "test_util.hpp"

using namespace rfml;
using namespace rfml::train;
using rfml::signal::IQFrame;
using rfml::signal::SignalDataset;
using rfml::testutil::micro_config;

namespace {

signal::DatasetSplits micro_data(std::uint64_t seed, int frames_per_cell = 20) {
    auto cfg = micro_config();
    cfg.data.seed = seed;
    cfg.data.frames_per_cell = frames_per_cell;
    return signal::make_synthetic_benchmark(cfg.data);
}

}  // namespace

// --- balancing factors ------------------------------------------------------------

TEST(Balance, HandCases) {
    auto equal = derive_balancing_factors({100, 100, 100});
    for (double b : equal) EXPECT_DOUBLE_EQ(b, 1.0);

    auto skew = derive_balancing_factors({900, 100});
    EXPECT_NEAR(skew[0], 1000.0 / 1800.0, 1e-12);
    EXPECT_DOUBLE_EQ(skew[1], 5.0);
    // Sample-weighted mean is exactly 1.
    EXPECT_NEAR((skew[0] * 900 + skew[1] * 100) / 1000.0, 1.0, 1e-12);

    auto single = derive_balancing_factors({42});
    EXPECT_DOUBLE_EQ(single[0], 1.0);

    EXPECT_THROW(derive_balancing_factors({}), InvalidArgument);
    EXPECT_THROW(derive_balancing_factors({10, 0}), InvalidArgument);
}

// --- pretrain mechanics -------------------------------------------------------------

TEST(Pretrain, ExplicitWeightsScaleRecordedLosses) {
    auto cfg = micro_config();
    cfg.train.epochs = 1;
    auto data = micro_data(1);
    model::Pipeline<float> pipe(cfg, 2, 3);

    // Dry run twice over the same data: once unweighted, once with b=(2,1).
    std::vector<double> unweighted, weighted;
    {
        PretrainOptions opt;
        opt.dry_run = true;
        opt.balancing = {1.0, 1.0};
        opt.batch_loss_trace = &unweighted;
        pretrain(pipe, {{&data.train, &data.val, "a"}, {&data.train, &data.val, "b"}}, 9, opt);
    }
    {
        PretrainOptions opt;
        opt.dry_run = true;
        opt.balancing = {2.0, 1.0};
        opt.batch_loss_trace = &weighted;
        pretrain(pipe, {{&data.train, &data.val, "a"}, {&data.train, &data.val, "b"}}, 9, opt);
    }
    ASSERT_EQ(unweighted.size(), weighted.size());
    const std::size_t half = unweighted.size() / 2;
    for (std::size_t k = 0; k < half; ++k)
        EXPECT_DOUBLE_EQ(weighted[k], 2.0 * unweighted[k]);  // dataset a: exactly doubled
    for (std::size_t k = half; k < unweighted.size(); ++k)
        EXPECT_DOUBLE_EQ(weighted[k], unweighted[k]);  // dataset b: unchanged
}

TEST(Pretrain, EarlyStopAfterExactlyTwentyStagnantEpochs) {
    auto cfg = micro_config();
    cfg.train.epochs = 50;
    cfg.data.frames_per_cell = 10;
    auto data = micro_data(2, 10);
    model::Pipeline<float> pipe(cfg, 2, 4);

    PretrainOptions opt;
    opt.dry_run = true;  // schedule behavior only
    opt.val_injector = [](int epoch) { return epoch == 0 ? 1.0 : 2.0; };
    auto log = pretrain(pipe, {{&data.train, &data.val, "d"}}, 5, opt);
    // Epoch 0 improves; epochs 1..20 stagnate; stop fires at epoch 20.
    EXPECT_EQ(log.early_stop_epoch, 20);
    EXPECT_EQ(log.epochs.size(), 21u);
}

TEST(Pretrain, LrTraceFollowsWarmupDecayAndHalving) {
    auto cfg = micro_config();
    cfg.train.epochs = 40;  // warmup 10% -> 4 epochs
    cfg.train.base_lr = 1.0;
    cfg.train.lr_floor = 0.0;
    cfg.data.frames_per_cell = 10;
    auto data = micro_data(3, 10);
    model::Pipeline<float> pipe(cfg, 2, 5);

    PretrainOptions opt;
    opt.dry_run = true;
    opt.val_injector = [](int) { return 1.0; };  // never improves after epoch 0
    auto log = pretrain(pipe, {{&data.train, &data.val, "d"}}, 6, opt);
    ASSERT_EQ(log.early_stop_epoch, 20);

    nn::LRSchedule ramp;
    ramp.base_lr = 1.0;
    ramp.warmup_fraction = 0.1;
    ramp.epoch_cap = 40;
    int halvings = 0;
    for (const auto& rec : log.epochs) {
        EXPECT_NEAR(rec.lr, nn::warmup_linear_decay_lr(ramp, rec.epoch) * std::pow(0.5, halvings),
                    1e-12)
            << "epoch " << rec.epoch;
        if (rec.halved) ++halvings;
    }
    // Plateau rule: halving events land exactly at stagnation epochs 5, 10, 15, 20.
    std::vector<int> halve_epochs;
    for (const auto& rec : log.epochs)
        if (rec.halved) halve_epochs.push_back(rec.epoch);
    EXPECT_EQ(halve_epochs, (std::vector<int>{5, 10, 15, 20}));
}

TEST(Pretrain, SeededRunsProduceIdenticalLogs) {
    auto cfg = micro_config();
    cfg.train.epochs = 2;
    auto data = micro_data(4);
    auto run = [&] {
        model::Pipeline<float> pipe(cfg, 2, 6);
        return pretrain(pipe, {{&data.train, &data.val, "d"}}, 11);
    };
    auto a = run();
    auto b = run();
    EXPECT_EQ(a.digest(), b.digest());
}

TEST(Pretrain, FrozenBaseUntouchedAndLossDecreases) {
    auto cfg = micro_config();
    cfg.train.epochs = 3;
    cfg.train.base_lr = 3e-4;
    auto data = micro_data(5, 25);
    int improved = 0;
    const int seeds = 10;
    for (int s = 0; s < seeds; ++s) {
        model::Pipeline<float> pipe(cfg, 2, 100 + static_cast<std::uint64_t>(s));
        const auto frozen_before = pipe.frozen_digest();
        auto log = pretrain(pipe, {{&data.train, &data.val, "d"}}, 200 + static_cast<std::uint64_t>(s));
        EXPECT_EQ(pipe.frozen_digest(), frozen_before);
        ASSERT_EQ(log.epochs.size(), 3u);
        if (log.epochs[2].train_loss[0] < log.epochs[0].train_loss[0]) ++improved;
    }
    EXPECT_GE(improved, 9) << "training failed to reduce MSE on " << (seeds - improved)
                           << " of " << seeds << " seeds";
}

TEST(Pretrain, NonFiniteLossCarriesBatchId) {
    auto cfg = micro_config();
    cfg.train.epochs = 1;
    auto data = micro_data(6, 10);
    data.train.frames[3].i[5] = 1e30;  // squares to inf in float loss math
    model::Pipeline<float> pipe(cfg, 2, 7);
    try {
        pretrain(pipe, {{&data.train, &data.val, "d"}}, 12);
        FAIL() << "expected NonFiniteLoss";
    } catch (const NonFiniteLoss& e) {
        EXPECT_GE(e.batch_id, 0);
    }
}

TEST(Pretrain, MaskedOnlyLossUsesMaskedTokens) {
    auto cfg = micro_config();
    cfg.train.epochs = 1;
    cfg.train.denoise_weight = 0.0;  // mask task only
    cfg.train.mask_weight = 1.0;
    cfg.train.loss_on = "masked";
    auto data = micro_data(7, 10);
    model::Pipeline<float> pipe(cfg, 2, 8);
    PretrainOptions opt;
    opt.dry_run = true;
    std::vector<double> trace;
    opt.batch_loss_trace = &trace;
    auto log = pretrain(pipe, {{&data.train, &data.val, "d"}}, 13, opt);
    EXPECT_FALSE(trace.empty());
    for (double v : trace) EXPECT_TRUE(std::isfinite(v));
}

// --- fine-tuning -----------------------------------------------------------------

TEST(Finetune, InsufficientShotsRejected) {
    auto cfg = micro_config();
    auto data = micro_data(8, 10);  // 16 train frames per class
    model::Pipeline<float> pipe(cfg, 2, 9);
    EXPECT_THROW(finetune_classifier(pipe, data.train, data.test, 1000, 14), InsufficientShots);
}

TEST(Finetune, SamplesExactlyShotsPerClass) {
    auto cfg = micro_config();
    cfg.train.finetune_epochs = 1;
    auto data = micro_data(9, 10);
    model::Pipeline<float> pipe(cfg, 2, 10);
    auto res = finetune_classifier(pipe, data.train, data.test, 5, 15);
    for (auto n : res.sampled_per_class) EXPECT_EQ(n, 5u);
    EXPECT_EQ(res.eval.confusion.total(),
              static_cast<std::int64_t>(data.test.frames.size()));
}

TEST(Finetune, UnlabeledTrainingDataRejected) {
    auto cfg = micro_config();
    auto data = micro_data(10, 10);
    data.train.frames[0].label.reset();
    model::Pipeline<float> pipe(cfg, 2, 11);
    EXPECT_THROW(finetune_classifier(pipe, data.train, data.test, 2, 16), MissingLabels);
}

// --- denoise evaluation -------------------------------------------------------------

TEST(DenoiseEval, IdentityModelMatchesNoisyBaseline) {
    auto data = micro_data(11, 10);
    DenoiseFn identity = [](const std::vector<IQFrame>& batch) { return batch; };
    DenoiseEvalOptions opt;
    opt.with_sg_baseline = false;
    opt.ssim_window = 11;
    auto report = denoise_eval(identity, data.test, {0.0, 5.0, 10.0}, 17, opt);
    ASSERT_EQ(report.rows.size(), 3u);
    for (const auto& row : report.rows) {
        EXPECT_NEAR(row.ssim_model, row.ssim_noisy, 1e-9);
        EXPECT_NEAR(row.mse_model, row.mse_noisy, 1e-12);
    }
}

TEST(DenoiseEval, NoisySsimNonDecreasingInSnr) {
    // Monte-Carlo oracle over a 4-point grid with 500 frames per point.
    signal::GeneratorConfig gen;
    gen.schemes = {"QPSK"};
    gen.snr_grid_db = {0.0};
    gen.frames_per_cell = 625;
    gen.length = 128;
    gen.sps = 8;
    gen.seed = 33;
    auto splits = signal::make_synthetic_benchmark(gen);
    ASSERT_GE(splits.train.frames.size(), 500u);
    DenoiseFn identity = [](const std::vector<IQFrame>& batch) { return batch; };
    DenoiseEvalOptions opt;
    opt.with_sg_baseline = false;
    opt.max_frames = 500;
    auto report = denoise_eval(identity, splits.train, {0.0, 4.0, 8.0, 12.0}, 18, opt);
    for (std::size_t k = 1; k < report.rows.size(); ++k)
        EXPECT_GE(report.rows[k].ssim_noisy, report.rows[k - 1].ssim_noisy);
}

TEST(DenoiseEval, SgBaselineColumnPresent) {
    signal::GeneratorConfig gen;
    gen.schemes = {"QPSK"};
    gen.snr_grid_db = {6.0};
    gen.frames_per_cell = 20;
    gen.length = 128;
    gen.sps = 8;
    gen.seed = 12;
    auto data = signal::make_synthetic_benchmark(gen);
    DenoiseFn identity = [](const std::vector<IQFrame>& batch) { return batch; };
    auto report = denoise_eval(identity, data.test, {6.0}, 19);
    ASSERT_TRUE(report.rows[0].ssim_sg.has_value());
    EXPECT_TRUE(std::isfinite(*report.rows[0].ssim_sg));
}
