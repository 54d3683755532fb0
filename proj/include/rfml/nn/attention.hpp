#pragma once

#include <cmath>

#include "rfml/nn/lora.hpp"
#include "rfml/nn/ops.hpp"

namespace rfml::nn {

template <class T>
struct AttentionParams {
    LinearOp<T> q, k, v, o;
    std::size_t heads = 1;
};

// Plain multi-head attention params; d_model must divide by heads. Value and
// output projections can be made bias-free (the fusion module relies on that
// to vanish exactly for zero inputs).
template <class T>
AttentionParams<T> make_attention(ParamStore<T>& store, const std::string& path,
                                  std::size_t d_model, std::size_t d_q_in, std::size_t d_kv_in,
                                  std::size_t heads, bool qk_bias = true, bool vo_bias = true,
                                  bool frozen = false) {
    if (heads < 1 || d_model % heads != 0)
        throw InvalidArgument("make_attention: model dim must divide by heads");
    AttentionParams<T> p;
    p.heads = heads;
    p.q = make_linear(store, path + ".q", d_model, d_q_in, qk_bias, frozen);
    p.k = make_linear(store, path + ".k", d_model, d_kv_in, qk_bias, frozen);
    p.v = make_linear(store, path + ".v", d_model, d_kv_in, vo_bias, frozen);
    p.o = make_linear(store, path + ".o", d_model, d_model, vo_bias, frozen);
    return p;
}

template <class T>
struct MhaOutput {
    Ptr<T> out;      // (B, Tq, D)
    Ptr<T> weights;  // (B*heads, Tq, Tk) softmax rows
};

// softmax(Q K^T / sqrt(d_k)) V per head, heads concatenated then projected.
// q_src (B,Tq,_) supplies queries; kv_src (B,Tk,_) supplies keys and values.
// causal masks strictly-future keys and is only meaningful for self-attention,
// so it demands q_src == kv_src.
template <class T>
MhaOutput<T> multi_head_attention_detailed(const Ptr<T>& q_src, const Ptr<T>& kv_src, bool causal,
                                           const AttentionParams<T>& p) {
    if (causal && q_src.get() != kv_src.get())
        throw InvalidArgument("multi_head_attention: causal mask requires self-attention");
    if (q_src->rank() != 3 || kv_src->rank() != 3)
        throw ShapeMismatch("multi_head_attention: rank-3 inputs required");
    if (q_src->shape[0] != kv_src->shape[0])
        throw ShapeMismatch("multi_head_attention: batch mismatch");

    auto qp = p.q(q_src);
    auto kp = p.k(kv_src);
    auto vp = p.v(kv_src);
    const std::size_t d_model = qp->shape[2];
    if (d_model % p.heads != 0)
        throw InvalidArgument("multi_head_attention: model dim must divide by heads");
    const std::size_t dk = d_model / p.heads;

    auto qh = split_heads(qp, p.heads);
    auto kh = split_heads(kp, p.heads);
    auto vh = split_heads(vp, p.heads);
    auto scores = scale(bmm(qh, kh, false, true), static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk))));
    auto weights = softmax(scores, causal);
    auto ctx = merge_heads(bmm(weights, vh), p.heads);
    return {p.o(ctx), weights};
}

template <class T>
Ptr<T> multi_head_attention(const Ptr<T>& q_src, const Ptr<T>& kv_src, bool causal,
                            const AttentionParams<T>& p) {
    return multi_head_attention_detailed(q_src, kv_src, causal, p).out;
}

}  // namespace rfml::nn
