#pragma once

#include "rfml/nn/attention.hpp"

namespace rfml::faf {

// Frequency-attuned fusion: the reprogrammed tokens attend into the
// high-frequency features, and both re-enter additively:
//   F'_s = MHA(q=F_s, kv=F_h) + F_s + F_h.
// Value and output projections carry no bias, so F_h == 0 collapses the
// attention term to zero and the fusion to the exact identity on F_s.
template <class T>
struct Fuse {
    nn::AttentionParams<T> attn;
};

template <class T>
Fuse<T> make_fuse(nn::ParamStore<T>& store, const std::string& path, std::size_t d_model,
                  std::size_t heads) {
    Fuse<T> f;
    f.attn = nn::make_attention(store, path, d_model, d_model, d_model, heads,
                                /*qk_bias=*/true, /*vo_bias=*/false);
    return f;
}

template <class T>
nn::Ptr<T> fuse(const Fuse<T>& f, const nn::Ptr<T>& f_s, const nn::Ptr<T>& f_h) {
    if (f_s->shape != f_h->shape) throw ShapeMismatch("fuse: token shapes must match");
    auto attended = nn::multi_head_attention(f_s, f_h, false, f.attn);
    return nn::add(nn::add(attended, f_s), f_h);
}

}  // namespace rfml::faf
