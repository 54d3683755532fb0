#pragma once

#include <cmath>
#include <memory>
#include <string>

#include "rfml/nn/ops.hpp"
#include "rfml/nn/params.hpp"

namespace rfml::nn {

// Low-rank delta on a frozen base weight: y = x W^T (+b) + (alpha/r) x A^T B^T.
// B starts at zero, so a fresh adapter is an exact no-op on the forward values.
template <class T>
struct LowRankAdapter {
    Ptr<T> w;  // frozen base (d_out, d_in)
    Ptr<T> b;  // frozen base bias, may be null
    Ptr<T> a;  // (rank, d_in), trainable
    Ptr<T> bm; // (d_out, rank), trainable, zero-init
    int rank = 0;
    double alpha = 0.0;

    double scaling() const { return alpha / static_cast<double>(rank); }
};

template <class T>
LowRankAdapter<T> make_lora(ParamStore<T>& store, const std::string& path, std::size_t d_out,
                            std::size_t d_in, int rank, double alpha, bool base_bias = true) {
    if (rank < 1) throw InvalidArgument("make_lora: rank must be >= 1");
    LowRankAdapter<T> ad;
    ad.rank = rank;
    ad.alpha = alpha;
    ad.w = store.normal(path + ".w", {d_out, d_in}, 1.0 / std::sqrt(static_cast<double>(d_in)),
                        /*frozen=*/true);
    if (base_bias) ad.b = store.constant(path + ".b", {d_out}, T(0), /*frozen=*/true);
    ad.a = store.normal(path + ".lora_a", {static_cast<std::size_t>(rank), d_in},
                        1.0 / std::sqrt(static_cast<double>(d_in)));
    ad.bm = store.constant(path + ".lora_b", {d_out, static_cast<std::size_t>(rank)}, T(0));
    return ad;
}

// The trainable delta alone: (alpha/r) * (x A^T) B^T.
template <class T>
Ptr<T> lora_delta(const LowRankAdapter<T>& ad, const Ptr<T>& x) {
    auto down = linear<T>(x, ad.a, nullptr);
    auto up = linear<T>(down, ad.bm, nullptr);
    return scale(up, static_cast<T>(ad.scaling()));
}

template <class T>
Ptr<T> lora_apply(const LowRankAdapter<T>& ad, const Ptr<T>& x) {
    if (ad.rank < 1) throw InvalidArgument("lora_apply: rank must be >= 1");
    return add(linear(x, ad.w, ad.b), lora_delta(ad, x));
}

// A linear layer that may be plain or adapter-backed; the attention and
// backbone code paths are written against this one shape.
template <class T>
struct LinearOp {
    Ptr<T> w;  // used when no adapter
    Ptr<T> b;
    std::shared_ptr<LowRankAdapter<T>> lora;

    Ptr<T> operator()(const Ptr<T>& x) const {
        if (lora) return lora_apply(*lora, x);
        return linear(x, w, b);
    }

    std::size_t d_out() const { return lora ? lora->w->shape[0] : w->shape[0]; }
};

template <class T>
LinearOp<T> make_linear(ParamStore<T>& store, const std::string& path, std::size_t d_out,
                        std::size_t d_in, bool bias = true, bool frozen = false) {
    LinearOp<T> op;
    op.w = store.normal(path + ".w", {d_out, d_in}, 1.0 / std::sqrt(static_cast<double>(d_in)),
                        frozen);
    if (bias) op.b = store.constant(path + ".b", {d_out}, T(0), frozen);
    return op;
}

}  // namespace rfml::nn
