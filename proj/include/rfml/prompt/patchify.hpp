#pragma once

#include <vector>

#include "rfml/nn/ops.hpp"
#include "rfml/nn/params.hpp"
#include "rfml/signal/frame.hpp"

namespace rfml::prompt {

inline std::size_t patch_count(std::size_t length, std::size_t patch_len, std::size_t stride) {
    if (patch_len < 1 || stride < 1) throw InvalidArgument("patchify: patch_len/stride must be >= 1");
    if (patch_len > length) throw InvalidArgument("patchify: patch_len exceeds frame length");
    return (length - patch_len) / stride + 1;
}

// Raw frames as a (B, 2, L) tensor (I then Q channel).
template <class T>
nn::Ptr<T> frames_to_tensor(const std::vector<signal::IQFrame>& frames) {
    if (frames.empty()) throw InvalidArgument("frames_to_tensor: empty batch");
    const std::size_t len = frames.front().length();
    auto out = nn::make_tensor<T>({frames.size(), 2, len});
    for (std::size_t b = 0; b < frames.size(); ++b) {
        if (frames[b].length() != len) throw ShapeMismatch("frames_to_tensor: ragged batch");
        for (std::size_t n = 0; n < len; ++n) {
            out->v[(b * 2 + 0) * len + n] = static_cast<T>(frames[b].i[n]);
            out->v[(b * 2 + 1) * len + n] = static_cast<T>(frames[b].q[n]);
        }
    }
    return out;
}

// Sliding windows flattened to rows: patch p of sample b is
// [i_0..i_{pl-1}, q_0..q_{pl-1}] starting at p*stride. Output (B, P, 2*pl).
template <class T>
nn::Ptr<T> unfold_frames(const std::vector<signal::IQFrame>& frames, std::size_t patch_len,
                         std::size_t stride) {
    if (frames.empty()) throw InvalidArgument("unfold_frames: empty batch");
    const std::size_t len = frames.front().length();
    const std::size_t p = patch_count(len, patch_len, stride);
    auto out = nn::make_tensor<T>({frames.size(), p, 2 * patch_len});
    for (std::size_t b = 0; b < frames.size(); ++b) {
        if (frames[b].length() != len) throw ShapeMismatch("unfold_frames: ragged batch");
        for (std::size_t pi = 0; pi < p; ++pi) {
            T* row = out->v.data() + (b * p + pi) * 2 * patch_len;
            const std::size_t start = pi * stride;
            for (std::size_t n = 0; n < patch_len; ++n) {
                row[n] = static_cast<T>(frames[b].i[start + n]);
                row[patch_len + n] = static_cast<T>(frames[b].q[start + n]);
            }
        }
    }
    return out;
}

// Linear projection of flattened patches to d_m plus a learned additive
// positional embedding per patch index.
template <class T>
struct PatchEmbed {
    nn::Ptr<T> proj;  // (d_m, 2*patch_len)
    nn::Ptr<T> bias;  // (d_m)
    nn::Ptr<T> pos;   // (P, d_m)
    std::size_t patch_len = 16;
    std::size_t stride = 16;
};

template <class T>
PatchEmbed<T> make_patch_embed(nn::ParamStore<T>& store, const std::string& path,
                               std::size_t patch_len, std::size_t stride, std::size_t num_patches,
                               std::size_t d_m) {
    PatchEmbed<T> pe;
    pe.patch_len = patch_len;
    pe.stride = stride;
    pe.proj = store.normal(path + ".proj", {d_m, 2 * patch_len},
                           1.0 / std::sqrt(static_cast<double>(2 * patch_len)));
    pe.bias = store.constant(path + ".bias", {d_m}, T(0));
    pe.pos = store.normal(path + ".pos", {num_patches, d_m}, 0.02);
    return pe;
}

template <class T>
nn::Ptr<T> patchify_and_embed(const PatchEmbed<T>& pe, const std::vector<signal::IQFrame>& frames) {
    auto unfolded = unfold_frames<T>(frames, pe.patch_len, pe.stride);
    const std::size_t p = unfolded->shape[1];
    if (p != pe.pos->shape[0])
        throw ShapeMismatch("patchify_and_embed: patch count disagrees with positional table");
    auto projected = nn::linear(unfolded, pe.proj, pe.bias);
    return nn::add(projected, nn::broadcast_to_batch(pe.pos, frames.size()));
}

}  // namespace rfml::prompt
