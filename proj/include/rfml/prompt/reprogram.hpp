#pragma once

#include "rfml/nn/attention.hpp"

namespace rfml::prompt {

// Cross-attention reprogramming: patch embeddings query the semantic anchor
// set, re-expressing the signal in the anchors' span. Projections are
// bias-free, mirroring the plain X_s W_q / E' W_k / E' W_v form.
template <class T>
struct Reprogram {
    nn::AttentionParams<T> attn;
};

template <class T>
Reprogram<T> make_reprogram(nn::ParamStore<T>& store, const std::string& path, std::size_t d_m,
                            std::size_t d_anchor, std::size_t d_out, std::size_t heads) {
    Reprogram<T> r;
    r.attn = nn::make_attention(store, path, d_out, d_m, d_anchor, heads,
                                /*qk_bias=*/false, /*vo_bias=*/false);
    return r;
}

// X_s (B,P,d_m) with anchors E' (V',D) shared across the batch -> F_s (B,P,D).
template <class T>
nn::Ptr<T> reprogram(const Reprogram<T>& r, const nn::Ptr<T>& x_s, const nn::Ptr<T>& anchors) {
    if (anchors->rank() != 2) throw ShapeMismatch("reprogram: anchors must be rank 2");
    auto kv = nn::broadcast_to_batch(anchors, x_s->shape[0]);
    return nn::multi_head_attention(x_s, kv, false, r.attn);
}

template <class T>
nn::MhaOutput<T> reprogram_detailed(const Reprogram<T>& r, const nn::Ptr<T>& x_s,
                                    const nn::Ptr<T>& anchors) {
    auto kv = nn::broadcast_to_batch(anchors, x_s->shape[0]);
    return nn::multi_head_attention_detailed(x_s, kv, false, r.attn);
}

}  // namespace rfml::prompt
