#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "rfml/nn/tensor.hpp"

namespace rfml::nn {

// AdamW with decoupled weight decay: the decay shrink is applied to the
// parameter before the moment-based update, independent of the gradients.
template <class T>
class AdamW {
   public:
    struct Hyper {
        double lr = 5e-5;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 5e-3;
    };

    AdamW() = default;
    AdamW(std::vector<Ptr<T>> params, Hyper hp) : hp_(hp), params_(std::move(params)) {
        for (const auto& p : params_) {
            if (p->frozen) throw InvalidArgument("AdamW: frozen parameter handed to optimizer");
            slots_.push_back({std::vector<double>(p->size(), 0.0), std::vector<double>(p->size(), 0.0)});
        }
    }

    void zero_grad() {
        for (const auto& p : params_) p->zero_grad();
    }

    // One update from the currently accumulated gradients. Parameters without
    // an allocated gradient are treated as zero-gradient (decay still applies).
    void step(double lr_override = -1.0) {
        const double lr = lr_override >= 0.0 ? lr_override : hp_.lr;
        ++step_count_;
        const double bc1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(step_count_));
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            auto& p = *params_[pi];
            auto& slot = slots_[pi];
            const bool has_grad = p.g.size() == p.v.size();
            for (std::size_t i = 0; i < p.v.size(); ++i) {
                const double g = has_grad ? static_cast<double>(p.g[i]) : 0.0;
                if (!std::isfinite(g)) throw NonFiniteGradient("AdamW: non-finite gradient");
                double x = static_cast<double>(p.v[i]);
                x -= lr * hp_.weight_decay * x;
                slot.m[i] = hp_.beta1 * slot.m[i] + (1.0 - hp_.beta1) * g;
                slot.s[i] = hp_.beta2 * slot.s[i] + (1.0 - hp_.beta2) * g * g;
                const double mhat = slot.m[i] / bc1;
                const double shat = slot.s[i] / bc2;
                x -= lr * mhat / (std::sqrt(shat) + hp_.eps);
                p.v[i] = static_cast<T>(x);
            }
        }
    }

    std::int64_t step_count() const { return step_count_; }
    void set_step_count(std::int64_t n) { step_count_ = n; }
    const Hyper& hyper() const { return hp_; }
    const std::vector<Ptr<T>>& params() const { return params_; }

    struct Slot {
        std::vector<double> m, s;
    };
    std::vector<Slot>& slots() { return slots_; }
    const std::vector<Slot>& slots() const { return slots_; }

   private:
    Hyper hp_;
    std::vector<Ptr<T>> params_;
    std::vector<Slot> slots_;
    std::int64_t step_count_ = 0;
};

}  // namespace rfml::nn
