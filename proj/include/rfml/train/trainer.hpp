#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "rfml/metrics/report.hpp"
#include "rfml/metrics/ssim.hpp"
#include "rfml/model/pipeline.hpp"
#include "rfml/nn/adamw.hpp"
#include "rfml/nn/schedule.hpp"
#include "rfml/signal/channel.hpp"
#include "rfml/signal/sgfilter.hpp"
#include "rfml/train/balance.hpp"
#include "rfml/train/log.hpp"

namespace rfml::train {

inline constexpr const char* kDenoiseTask =
    "Reconstruct the clean transmitted signal from the noisy received input.";
inline constexpr const char* kMaskTask =
    "Reconstruct the original signal in the zeroed-out masked regions.";
inline constexpr const char* kClassifyTask =
    "Identify the modulation scheme used by the transmitted signal.";

struct NamedDataset {
    const signal::SignalDataset* train = nullptr;
    const signal::SignalDataset* val = nullptr;
    std::string name;
};

struct PretrainOptions {
    bool dry_run = false;                      // record losses without optimizer steps
    std::vector<double> balancing;             // explicit b_i; empty = config mode
    std::function<double(int)> val_injector;   // test hook: synthetic val loss per epoch
    std::function<void(const EpochRecord&)> on_epoch;
    std::vector<double>* batch_loss_trace = nullptr;  // test hook: weighted per-batch losses
};

namespace detail {

// Contiguous patch masking: zeroes the sample span covering patches
// [start, start+count).
inline signal::IQFrame mask_patches(const signal::IQFrame& clean, std::size_t start,
                                    std::size_t count, std::size_t patch_len, std::size_t stride) {
    signal::IQFrame out = clean;
    const std::size_t lo = start * stride;
    const std::size_t hi = std::min(out.length(), lo + patch_len + (count - 1) * stride);
    for (std::size_t n = lo; n < hi; ++n) {
        out.i[n] = 0.0;
        out.q[n] = 0.0;
    }
    return out;
}

struct CorruptedBatch {
    std::vector<signal::IQFrame> corrupted;
    std::vector<signal::IQFrame> clean;
    bool masked = false;
    std::size_t mask_start = 0, mask_count = 0;
    const char* task_desc = kDenoiseTask;
};

// One pretext batch: denoise (AWGN at a sampled SNR) or contiguous patch
// masking, chosen by the configured weights. The mask window is shared
// within a batch so a masked-only loss stays a plain token slice.
inline CorruptedBatch corrupt_batch(const std::vector<signal::IQFrame>& clean,
                                    const TrainConfig& tc, std::size_t patch_len,
                                    std::size_t stride, std::size_t num_patches,
                                    std::uint64_t seed) {
    Rng rng(seed);
    CorruptedBatch out;
    out.clean = clean;
    const double total = tc.denoise_weight + tc.mask_weight;
    const bool denoise = rng.uniform() * total < tc.denoise_weight;
    if (denoise) {
        out.task_desc = kDenoiseTask;
        for (std::size_t k = 0; k < clean.size(); ++k) {
            const double snr = tc.snr_grid_db[rng.below(tc.snr_grid_db.size())];
            out.corrupted.push_back(signal::add_awgn(clean[k], snr, derive_seed(seed, k + 1)));
        }
    } else {
        out.masked = true;
        out.task_desc = kMaskTask;
        out.mask_count = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(tc.mask_ratio * static_cast<double>(num_patches))));
        out.mask_count = std::min(out.mask_count, num_patches);
        out.mask_start = rng.below(num_patches - out.mask_count + 1);
        for (const auto& f : clean)
            out.corrupted.push_back(mask_patches(f, out.mask_start, out.mask_count, patch_len, stride));
    }
    return out;
}

template <class T>
nn::Ptr<T> batch_loss(model::Pipeline<T>& pipe, const CorruptedBatch& batch, bool train_mode) {
    const auto& cfg = pipe.config();
    auto enc = pipe.encode(batch.corrupted, batch.task_desc, train_mode);
    auto pred = pipe.decode(enc);
    auto target = prompt::unfold_frames<T>(batch.clean, static_cast<std::size_t>(cfg.hptr.patch_len),
                                           static_cast<std::size_t>(cfg.hptr.stride));
    if (batch.masked && cfg.train.loss_on == "masked") {
        pred = nn::slice_tokens(pred, batch.mask_start, batch.mask_start + batch.mask_count);
        target = nn::slice_tokens(target, batch.mask_start, batch.mask_start + batch.mask_count);
    }
    return nn::mse_loss(pred, target);
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx.begin(), idx.end());
    return idx;
}

}  // namespace detail

// Stage 1: multi-dataset self-supervised pretraining with loss balancing,
// warmup-then-decay lr, plateau halving, and 20-epoch early stopping.
template <class T>
TrainLog pretrain(model::Pipeline<T>& pipe, const std::vector<NamedDataset>& datasets,
                  std::uint64_t seed, const PretrainOptions& opt = {}) {
    if (datasets.empty()) throw InvalidArgument("pretrain: no datasets");
    const auto& cfg = pipe.config();
    const TrainConfig& tc = cfg.train;
    const auto patch_len = static_cast<std::size_t>(cfg.hptr.patch_len);
    const auto stride = static_cast<std::size_t>(cfg.hptr.stride);
    const std::size_t num_patches = cfg.num_patches();
    if (num_patches * patch_len != static_cast<std::size_t>(cfg.data.length))
        throw InvalidArgument("pretrain: decoder needs non-overlapping patches covering the frame");

    std::vector<std::size_t> sizes;
    for (const auto& d : datasets) {
        if (!d.train || !d.val) throw InvalidArgument("pretrain: dataset missing a split");
        if (d.train->frame_length() != static_cast<std::size_t>(cfg.data.length))
            throw InvalidArgument("pretrain: dataset length disagrees with the config");
        sizes.push_back(d.train->frames.size());
    }
    std::vector<double> balance;
    const auto& explicit_b = !opt.balancing.empty() ? opt.balancing : tc.balancing_factors;
    if (!explicit_b.empty()) {
        if (explicit_b.size() != datasets.size())
            throw InvalidArgument("pretrain: balancing factor count mismatch");
        balance = explicit_b;
    } else if (tc.balancing == "auto") {
        balance = derive_balancing_factors(sizes);
    } else {
        balance.assign(datasets.size(), 1.0);
    }

    // Optional warm phase: the backbone base trains for the first
    // warm_epochs epochs, then freezes for good.
    const int warm_epochs = cfg.model.warm_epochs;
    if (warm_epochs > 0) model::set_backbone_frozen(pipe.store(), "backbone", false);
    auto make_optimizer = [&] {
        typename nn::AdamW<T>::Hyper hp;
        hp.lr = tc.base_lr;
        hp.weight_decay = tc.weight_decay;
        return nn::AdamW<T>(pipe.trainable_params(model::ParamScope::Pretrain), hp);
    };
    auto optimizer = make_optimizer();

    nn::LRSchedule ramp;
    ramp.kind = nn::ScheduleKind::WarmupLinearDecay;
    ramp.base_lr = tc.base_lr;
    ramp.warmup_fraction = tc.warmup_fraction;
    ramp.epoch_cap = tc.epochs;

    nn::PlateauTracker tracker;
    tracker.patience_halve = tc.patience_halve;
    tracker.patience_stop = tc.patience_stop;

    TrainLog log;
    for (const auto& d : datasets) log.dataset_names.push_back(d.name);

    // Fixed per-frame validation corruption so epochs are comparable.
    auto validation_loss = [&](int epoch) -> double {
        if (opt.val_injector) return opt.val_injector(epoch);
        nn::NoGradGuard ng;
        double total = 0.0;
        for (std::size_t di = 0; di < datasets.size(); ++di) {
            const auto& frames = datasets[di].val->frames;
            double ds_loss = 0.0;
            std::size_t batches = 0;
            for (std::size_t at = 0; at < frames.size();
                 at += static_cast<std::size_t>(tc.batch_size)) {
                const std::size_t end =
                    std::min(frames.size(), at + static_cast<std::size_t>(tc.batch_size));
                std::vector<signal::IQFrame> clean(frames.begin() + static_cast<std::ptrdiff_t>(at),
                                                   frames.begin() + static_cast<std::ptrdiff_t>(end));
                auto batch = detail::corrupt_batch(clean, tc, patch_len, stride, num_patches,
                                                   derive_seed(seed, "val" + std::to_string(di) +
                                                                         "_" + std::to_string(at)));
                ds_loss += static_cast<double>(detail::batch_loss(pipe, batch, false)->v[0]);
                ++batches;
            }
            total += ds_loss / static_cast<double>(batches);
        }
        return total / static_cast<double>(datasets.size());
    };

    const auto t_start = std::chrono::steady_clock::now();
    std::int64_t global_batch = 0;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const auto e_start = std::chrono::steady_clock::now();
        const double lr_now =
            std::max(tc.lr_floor, nn::warmup_linear_decay_lr(ramp, epoch) * tracker.factor());

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr_now;
        for (std::size_t di = 0; di < datasets.size(); ++di) {
            const auto& frames = datasets[di].train->frames;
            const auto order = detail::shuffled_indices(
                frames.size(), derive_seed(seed, "order" + std::to_string(epoch) + "_" +
                                                     std::to_string(di)));
            double epoch_loss = 0.0;
            std::size_t batches = 0;
            for (std::size_t at = 0; at < order.size();
                 at += static_cast<std::size_t>(tc.batch_size)) {
                const std::size_t end =
                    std::min(order.size(), at + static_cast<std::size_t>(tc.batch_size));
                std::vector<signal::IQFrame> clean;
                clean.reserve(end - at);
                for (std::size_t k = at; k < end; ++k) clean.push_back(frames[order[k]]);
                auto batch = detail::corrupt_batch(
                    clean, tc, patch_len, stride, num_patches,
                    derive_seed(seed, "batch" + std::to_string(global_batch)));
                if (!opt.dry_run) optimizer.zero_grad();
                auto loss = detail::batch_loss(pipe, batch, !opt.dry_run);
                const double weighted = balance[di] * static_cast<double>(loss->v[0]);
                if (!std::isfinite(weighted))
                    throw NonFiniteLoss("pretrain: non-finite loss", global_batch);
                if (!opt.dry_run) {
                    auto scaled = nn::scale(loss, static_cast<T>(balance[di]));
                    nn::backward(scaled);
                    optimizer.step(lr_now);
                }
                if (opt.batch_loss_trace) opt.batch_loss_trace->push_back(weighted);
                epoch_loss += weighted;
                ++batches;
                ++global_batch;
            }
            rec.train_loss.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(1, batches)));
        }

        rec.val_loss = validation_loss(epoch);
        rec.halved = tracker.observe(rec.val_loss);
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - e_start).count();
        log.epochs.push_back(rec);
        if (opt.on_epoch) opt.on_epoch(rec);

        if (tracker.should_stop()) {
            log.early_stop_epoch = epoch;
            break;
        }
        if (warm_epochs > 0 && epoch + 1 == warm_epochs) {
            model::set_backbone_frozen(pipe.store(), "backbone", true);
            optimizer = make_optimizer();  // trainable set changed
        }
    }
    if (warm_epochs > 0) model::set_backbone_frozen(pipe.store(), "backbone", true);
    log.total_wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return log;
}

// --- stage 2: few-shot classification ------------------------------------------

template <class T>
struct FinetuneResult {
    metrics::EvalResult eval;
    TrainLog log;
    std::vector<std::size_t> sampled_per_class;
};

// Samples `shots` frames per class (seeded), trains the configured scope with
// cross entropy under cosine annealing, and evaluates on the test split.
template <class T>
FinetuneResult<T> finetune_classifier(model::Pipeline<T>& pipe,
                                      const signal::SignalDataset& train_ds,
                                      const signal::SignalDataset& test_ds, int shots,
                                      std::uint64_t seed) {
    const auto& cfg = pipe.config();
    const TrainConfig& tc = cfg.train;
    train_ds.validate();
    test_ds.validate();
    const std::size_t k = train_ds.class_names.size();
    if (k < 2) throw InvalidArgument("finetune_classifier: need at least two classes");
    for (const auto& f : train_ds.frames)
        if (!f.label) throw MissingLabels("finetune_classifier: unlabeled training frame");

    // Per-class seeded sampling, exactly `shots` each.
    std::vector<std::vector<std::size_t>> per_class(k);
    for (std::size_t i = 0; i < train_ds.frames.size(); ++i)
        per_class[static_cast<std::size_t>(*train_ds.frames[i].label)].push_back(i);
    std::vector<std::size_t> sample;
    FinetuneResult<T> result;
    for (std::size_t c = 0; c < k; ++c) {
        if (per_class[c].size() < static_cast<std::size_t>(shots))
            throw InsufficientShots("finetune_classifier: class " + train_ds.class_names[c] +
                                    " has " + std::to_string(per_class[c].size()) + " < " +
                                    std::to_string(shots) + " frames");
        Rng rng(derive_seed(seed, "shots" + std::to_string(c)));
        rng.shuffle(per_class[c].begin(), per_class[c].end());
        per_class[c].resize(static_cast<std::size_t>(shots));
        sample.insert(sample.end(), per_class[c].begin(), per_class[c].end());
        result.sampled_per_class.push_back(per_class[c].size());
    }

    auto scope = model::ParamScope::HeadAdapters;
    if (tc.finetune_scope == "head_only") scope = model::ParamScope::HeadOnly;
    if (tc.finetune_scope == "all_nonfrozen") scope = model::ParamScope::AllNonFrozen;
    typename nn::AdamW<T>::Hyper hp;
    hp.lr = tc.finetune_lr;
    hp.weight_decay = tc.weight_decay;
    nn::AdamW<T> optimizer(pipe.trainable_params(scope), hp);

    nn::LRSchedule cosine;
    cosine.kind = nn::ScheduleKind::CosineAnnealing;
    cosine.base_lr = tc.finetune_lr;
    cosine.floor = tc.lr_floor;
    cosine.epoch_cap = tc.finetune_epochs;

    auto corrupt_at_frame_snr = [&](const signal::IQFrame& f, std::uint64_t s) {
        if (!tc.corrupt_classification || !f.snr_db) return f;
        return signal::add_awgn(f, *f.snr_db, s);
    };

    result.log.dataset_names = {"finetune"};
    const auto t_start = std::chrono::steady_clock::now();
    for (int epoch = 0; epoch < tc.finetune_epochs; ++epoch) {
        const auto e_start = std::chrono::steady_clock::now();
        const double lr_now = nn::cosine_annealing_lr(cosine, epoch);
        auto order = sample;
        Rng rng(derive_seed(seed, "ft_order" + std::to_string(epoch)));
        rng.shuffle(order.begin(), order.end());
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(tc.batch_size)) {
            const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(tc.batch_size));
            std::vector<signal::IQFrame> batch;
            std::vector<int> labels;
            for (std::size_t i = at; i < end; ++i) {
                const auto& f = train_ds.frames[order[i]];
                batch.push_back(corrupt_at_frame_snr(
                    f, derive_seed(seed, "ft_noise" + std::to_string(epoch) + "_" +
                                             std::to_string(order[i]))));
                labels.push_back(*f.label);
            }
            optimizer.zero_grad();
            auto loss = nn::cross_entropy(pipe.logits(pipe.encode(batch, kClassifyTask, true)), labels);
            if (!std::isfinite(static_cast<double>(loss->v[0])))
                throw NonFiniteLoss("finetune_classifier: non-finite loss",
                                    static_cast<std::int64_t>(batches));
            nn::backward(loss);
            optimizer.step(lr_now);
            epoch_loss += static_cast<double>(loss->v[0]);
            ++batches;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = {epoch_loss / static_cast<double>(std::max<std::size_t>(1, batches))};
        rec.val_loss = 0.0;
        rec.lr = lr_now;
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - e_start).count();
        result.log.epochs.push_back(rec);
    }
    result.log.total_wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    // Untouched test split, corrupted once per frame with fixed seeds.
    signal::SignalDataset test_view = test_ds;
    for (std::size_t i = 0; i < test_view.frames.size(); ++i)
        test_view.frames[i] =
            corrupt_at_frame_snr(test_view.frames[i], derive_seed(seed, "test_noise" + std::to_string(i)));
    metrics::BatchPredictor predictor = [&](const std::vector<signal::IQFrame>& batch) {
        return pipe.classify_frames(batch, kClassifyTask);
    };
    result.eval = metrics::evaluate_classifier(predictor, test_view, cfg.eval.batch_size);
    return result;
}

// --- denoising evaluation ---------------------------------------------------------

using DenoiseFn = std::function<std::vector<signal::IQFrame>(const std::vector<signal::IQFrame>&)>;

struct DenoiseRow {
    double snr_db = 0.0;
    double ssim_model = 0.0;
    double ssim_noisy = 0.0;
    double mse_model = 0.0;
    double mse_noisy = 0.0;
    std::optional<double> ssim_sg;
    std::size_t skipped_degenerate = 0;  // constant references carry no structure to compare
};

struct DenoiseReport {
    std::vector<DenoiseRow> rows;
    double seconds_per_batch = 0.0;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        auto arr = nlohmann::ordered_json::array();
        for (const auto& r : rows) {
            nlohmann::ordered_json row = {{"snr_db", r.snr_db},       {"ssim_model", r.ssim_model},
                                          {"ssim_noisy", r.ssim_noisy}, {"mse_model", r.mse_model},
                                          {"mse_noisy", r.mse_noisy}};
            row["ssim_sg"] = r.ssim_sg ? nlohmann::ordered_json(*r.ssim_sg) : nullptr;
            arr.push_back(row);
        }
        j["rows"] = arr;
        double sm = 0, sn = 0, sg = 0;
        bool has_sg = !rows.empty();
        for (const auto& r : rows) {
            sm += r.ssim_model;
            sn += r.ssim_noisy;
            if (r.ssim_sg) sg += *r.ssim_sg; else has_sg = false;
        }
        const auto n = static_cast<double>(rows.empty() ? 1 : rows.size());
        j["mean_over_grid"] = {{"ssim_model", sm / n},
                               {"ssim_noisy", sn / n},
                               {"ssim_sg", has_sg ? nlohmann::ordered_json(sg / n) : nullptr}};
        j["seconds_per_batch"] = seconds_per_batch;
        return j;
    }

    std::string to_csv() const {
        std::ostringstream os;
        os << "snr_db,ssim_model,ssim_noisy,ssim_sg,mse_model,mse_noisy\n";
        for (const auto& r : rows) {
            os << r.snr_db << "," << r.ssim_model << "," << r.ssim_noisy << ",";
            if (r.ssim_sg) os << *r.ssim_sg;
            os << "," << r.mse_model << "," << r.mse_noisy << "\n";
        }
        return os.str();
    }
};

struct DenoiseEvalOptions {
    int batch_size = 32;
    int max_frames = 0;  // 0 = all
    bool with_sg_baseline = true;
    int sg_window = 5;
    int sg_order = 2;
    int ssim_window = 11;
};

// Corrupts the clean dataset at each grid SNR, runs the model, and reports
// SSIM/MSE for the model output and the noisy input (plus the classical
// smoothing baseline) side by side.
inline DenoiseReport denoise_eval(const DenoiseFn& fn, const signal::SignalDataset& clean_ds,
                                  const std::vector<double>& snr_grid, std::uint64_t seed,
                                  const DenoiseEvalOptions& opt = {}) {
    if (clean_ds.frames.empty()) throw InvalidArgument("denoise_eval: empty dataset");
    const std::size_t count = opt.max_frames > 0
                                  ? std::min<std::size_t>(clean_ds.frames.size(),
                                                          static_cast<std::size_t>(opt.max_frames))
                                  : clean_ds.frames.size();
    DenoiseReport report;
    double seconds = 0.0;
    std::size_t batches = 0;
    for (std::size_t gi = 0; gi < snr_grid.size(); ++gi) {
        const double snr = snr_grid[gi];
        DenoiseRow row;
        row.snr_db = snr;
        double ssim_m = 0, ssim_n = 0, ssim_s = 0, mse_m = 0, mse_n = 0;
        for (std::size_t at = 0; at < count; at += static_cast<std::size_t>(opt.batch_size)) {
            const std::size_t end = std::min(count, at + static_cast<std::size_t>(opt.batch_size));
            std::vector<signal::IQFrame> clean(clean_ds.frames.begin() + static_cast<std::ptrdiff_t>(at),
                                               clean_ds.frames.begin() + static_cast<std::ptrdiff_t>(end));
            std::vector<signal::IQFrame> noisy;
            noisy.reserve(clean.size());
            for (std::size_t i = 0; i < clean.size(); ++i)
                noisy.push_back(signal::add_awgn(
                    clean[i], snr, derive_seed(seed, "dn" + std::to_string(gi) + "_" +
                                                         std::to_string(at + i))));
            const auto t0 = std::chrono::steady_clock::now();
            auto restored = fn(noisy);
            seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            ++batches;
            if (restored.size() != clean.size())
                throw ShapeMismatch("denoise_eval: model returned wrong frame count");
            for (std::size_t i = 0; i < clean.size(); ++i) {
                auto range = [](const std::vector<double>& v) {
                    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
                    return *hi - *lo;
                };
                if (range(clean[i].i) == 0.0 && range(clean[i].q) == 0.0) {
                    ++row.skipped_degenerate;
                    continue;
                }
                ssim_m += metrics::ssim_1d(clean[i], restored[i], opt.ssim_window);
                ssim_n += metrics::ssim_1d(clean[i], noisy[i], opt.ssim_window);
                mse_m += metrics::mse(restored[i], clean[i]);
                mse_n += metrics::mse(noisy[i], clean[i]);
                if (opt.with_sg_baseline)
                    ssim_s += metrics::ssim_1d(clean[i], signal::sg_filter(noisy[i], opt.sg_window, opt.sg_order),
                                               opt.ssim_window);
            }
        }
        if (row.skipped_degenerate >= count)
            throw DegenerateReference("denoise_eval: every reference frame is constant");
        const auto n = static_cast<double>(count - row.skipped_degenerate);
        row.ssim_model = ssim_m / n;
        row.ssim_noisy = ssim_n / n;
        row.mse_model = mse_m / n;
        row.mse_noisy = mse_n / n;
        if (opt.with_sg_baseline) row.ssim_sg = ssim_s / n;
        report.rows.push_back(row);
    }
    report.seconds_per_batch = seconds / static_cast<double>(std::max<std::size_t>(1, batches));
    return report;
}

}  // namespace rfml::train
