#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "rfml/common.hpp"

namespace rfml::nn {

enum class ScheduleKind { WarmupLinearDecay, CosineAnnealing, PlateauHalving };

struct LRSchedule {
    ScheduleKind kind = ScheduleKind::WarmupLinearDecay;
    double base_lr = 5e-5;
    double warmup_fraction = 0.1;  // of epoch_cap, WarmupLinearDecay only
    int patience = 5;              // PlateauHalving only
    double floor = 0.0;
    int epoch_cap = 50;

    void validate() const {
        if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
            throw InvalidArgument("LRSchedule: warmup_fraction must be in [0,1)");
        if (patience < 1) throw InvalidArgument("LRSchedule: patience must be >= 1");
        if (epoch_cap < 1) throw InvalidArgument("LRSchedule: epoch_cap must be >= 1");
        if (base_lr <= 0.0) throw InvalidArgument("LRSchedule: base_lr must be positive");
    }
};

// Tracks a validation-loss plateau: halve after `patience_halve` consecutive
// non-improving epochs (counter resets on improvement or halving), stop after
// `patience_stop` consecutive epochs without a new best.
struct PlateauTracker {
    int patience_halve = 5;
    int patience_stop = 20;
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    int since_halve = 0;
    int halvings = 0;

    // Feeds one epoch's validation loss; returns true when the lr halves.
    bool observe(double val_loss) {
        if (val_loss < best) {
            best = val_loss;
            since_best = 0;
            since_halve = 0;
            return false;
        }
        ++since_best;
        ++since_halve;
        if (since_halve >= patience_halve) {
            since_halve = 0;
            ++halvings;
            return true;
        }
        return false;
    }

    bool should_stop() const { return since_best >= patience_stop; }
    double factor() const { return std::pow(0.5, halvings); }
};

// Warmup ramp for the first floor(warmup_fraction*cap) epochs, then linear
// decay hitting zero exactly at the epoch cap.
inline double warmup_linear_decay_lr(const LRSchedule& s, int epoch) {
    const int warmup = static_cast<int>(s.warmup_fraction * s.epoch_cap);
    if (epoch < 0) throw InvalidArgument("schedule_lr: negative epoch");
    if (epoch >= s.epoch_cap) return s.floor;
    double lr;
    if (warmup > 0 && epoch < warmup)
        lr = s.base_lr * static_cast<double>(epoch + 1) / static_cast<double>(warmup);
    else if (s.epoch_cap == warmup)
        lr = s.base_lr;
    else
        lr = s.base_lr * static_cast<double>(s.epoch_cap - epoch) /
             static_cast<double>(s.epoch_cap - warmup);
    return std::max(lr, s.floor);
}

inline double cosine_annealing_lr(const LRSchedule& s, int epoch) {
    if (epoch < 0) throw InvalidArgument("schedule_lr: negative epoch");
    if (s.epoch_cap == 1 || epoch >= s.epoch_cap) return epoch >= s.epoch_cap ? s.floor : s.base_lr;
    constexpr double pi = 3.14159265358979323846;
    const double t = static_cast<double>(epoch) / static_cast<double>(s.epoch_cap - 1);
    return s.floor + 0.5 * (s.base_lr - s.floor) * (1.0 + std::cos(pi * t));
}

// Pure function of the validation-loss history seen so far; the returned lr
// applies to the epoch after the last recorded loss.
inline double schedule_lr(const LRSchedule& s, int epoch,
                          const std::vector<double>& val_loss_history = {}) {
    s.validate();
    switch (s.kind) {
        case ScheduleKind::WarmupLinearDecay:
            return warmup_linear_decay_lr(s, epoch);
        case ScheduleKind::CosineAnnealing:
            return cosine_annealing_lr(s, epoch);
        case ScheduleKind::PlateauHalving: {
            if (epoch < 0) throw InvalidArgument("schedule_lr: negative epoch");
            PlateauTracker tracker;
            tracker.patience_halve = s.patience;
            for (double loss : val_loss_history) tracker.observe(loss);
            return std::max(s.floor, s.base_lr * tracker.factor());
        }
    }
    throw InvalidArgument("schedule_lr: unknown kind");
}

}  // namespace rfml::nn
