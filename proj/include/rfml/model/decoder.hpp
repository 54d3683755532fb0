#pragma once

#include <string>
#include <vector>

#include "rfml/nn/attention.hpp"
#include "rfml/nn/lora.hpp"
#include "rfml/signal/frame.hpp"

namespace rfml::model {

// Both decoders end in the same per-token block mapping: one D-dim token row
// becomes a 2 x patch_len block, blocks concatenated in patch order.

template <class T>
struct LinearDecoder {
    nn::LinearOp<T> out;  // (2*patch_len, D)
    std::size_t patch_len = 16;
};

template <class T>
LinearDecoder<T> make_linear_decoder(nn::ParamStore<T>& store, const std::string& path,
                                     std::size_t d_model, std::size_t patch_len) {
    LinearDecoder<T> dec;
    dec.patch_len = patch_len;
    dec.out = nn::make_linear(store, path + ".out", 2 * patch_len, d_model);
    return dec;
}

template <class T>
nn::Ptr<T> decode_linear(const LinearDecoder<T>& dec, const nn::Ptr<T>& f_llm) {
    if (f_llm->rank() != 3) throw ShapeMismatch("decode_linear: rank-3 input required");
    return dec.out(f_llm);
}

template <class T>
struct DecoderBlock {
    nn::Ptr<T> ln1_g, ln1_b, ln2_g, ln2_b;
    nn::AttentionParams<T> attn;
    nn::LinearOp<T> fc1, fc2;
};

// Shallow non-causal self-attention refinement before the block mapping.
template <class T>
struct TransformerDecoder {
    nn::Ptr<T> pos;  // (P, D)
    std::vector<DecoderBlock<T>> blocks;
    nn::LinearOp<T> out;
    std::size_t patch_len = 16;
};

template <class T>
TransformerDecoder<T> make_transformer_decoder(nn::ParamStore<T>& store, const std::string& path,
                                               std::size_t d_model, std::size_t heads,
                                               std::size_t num_patches, std::size_t patch_len,
                                               int layers) {
    if (layers < 1 || layers > 2)
        throw InvalidArgument("make_transformer_decoder: layers must be 1 or 2");
    TransformerDecoder<T> dec;
    dec.patch_len = patch_len;
    dec.pos = store.normal(path + ".pos", {num_patches, d_model}, 0.02);
    for (int l = 0; l < layers; ++l) {
        const std::string bp = path + ".block" + std::to_string(l);
        DecoderBlock<T> blk;
        blk.ln1_g = store.constant(bp + ".ln1.g", {d_model}, T(1));
        blk.ln1_b = store.constant(bp + ".ln1.b", {d_model}, T(0));
        blk.ln2_g = store.constant(bp + ".ln2.g", {d_model}, T(1));
        blk.ln2_b = store.constant(bp + ".ln2.b", {d_model}, T(0));
        blk.attn = nn::make_attention(store, bp + ".attn", d_model, d_model, d_model, heads);
        blk.fc1 = nn::make_linear(store, bp + ".mlp.fc1", 2 * d_model, d_model);
        blk.fc2 = nn::make_linear(store, bp + ".mlp.fc2", d_model, 2 * d_model);
        dec.blocks.push_back(std::move(blk));
    }
    dec.out = nn::make_linear(store, path + ".out", 2 * patch_len, d_model);
    return dec;
}

template <class T>
nn::Ptr<T> decode_transformer(const TransformerDecoder<T>& dec, const nn::Ptr<T>& f_llm) {
    if (f_llm->rank() != 3) throw ShapeMismatch("decode_transformer: rank-3 input required");
    if (f_llm->shape[1] != dec.pos->shape[0])
        throw ShapeMismatch("decode_transformer: patch count mismatch");
    auto x = nn::add(f_llm, nn::broadcast_to_batch(dec.pos, f_llm->shape[0]));
    for (const auto& blk : dec.blocks) {
        auto h = nn::layer_norm(x, blk.ln1_g, blk.ln1_b);
        x = nn::add(x, nn::multi_head_attention(h, h, /*causal=*/false, blk.attn));
        x = nn::add(x, blk.fc2(nn::gelu(blk.fc1(nn::layer_norm(x, blk.ln2_g, blk.ln2_b)))));
    }
    return dec.out(x);
}

// Reassembles decoded block rows (B,P,2*patch_len) into frames of length
// P * patch_len (non-overlapping patch geometry).
template <class T>
std::vector<signal::IQFrame> blocks_to_frames(const nn::Ptr<T>& decoded, std::size_t patch_len) {
    if (decoded->rank() != 3 || decoded->shape[2] != 2 * patch_len)
        throw ShapeMismatch("blocks_to_frames: unexpected block shape");
    const std::size_t batch = decoded->shape[0], p = decoded->shape[1];
    std::vector<signal::IQFrame> out(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        auto& f = out[b];
        f.i.resize(p * patch_len);
        f.q.resize(p * patch_len);
        for (std::size_t pi = 0; pi < p; ++pi) {
            const T* row = decoded->v.data() + (b * p + pi) * 2 * patch_len;
            for (std::size_t n = 0; n < patch_len; ++n) {
                f.i[pi * patch_len + n] = static_cast<double>(row[n]);
                f.q[pi * patch_len + n] = static_cast<double>(row[patch_len + n]);
            }
        }
    }
    return out;
}

}  // namespace rfml::model
