#pragma once

#include <string>
#include <vector>

#include "rfml/config.hpp"
#include "rfml/nn/attention.hpp"
#include "rfml/nn/lora.hpp"
#include "rfml/nn/ops.hpp"

namespace rfml::model {

// Frozen pre-norm causal transformer with low-rank adapters on the attention
// projections. Base weights (including positions, layer norms, and the MLP)
// never receive gradients; only the adapters train.
template <class T>
struct BackboneBlock {
    nn::Ptr<T> ln1_g, ln1_b, ln2_g, ln2_b;
    nn::AttentionParams<T> attn;
    nn::LinearOp<T> fc1, fc2;
};

template <class T>
struct Backbone {
    ModelConfig cfg;
    nn::Ptr<T> pos;  // (max_tokens, D)
    std::vector<BackboneBlock<T>> blocks;
    nn::Ptr<T> lnf_g, lnf_b;
};

template <class T>
Backbone<T> make_backbone(nn::ParamStore<T>& store, const std::string& path,
                          const ModelConfig& cfg) {
    const auto d = static_cast<std::size_t>(cfg.d_model);
    const auto ff = d * static_cast<std::size_t>(cfg.ff_mult);
    Backbone<T> bb;
    bb.cfg = cfg;
    bb.pos = store.normal(path + ".pos", {static_cast<std::size_t>(cfg.max_tokens), d}, 0.02,
                          /*frozen=*/true);

    auto wants_lora = [&](const char* name) {
        for (const auto& t : cfg.lora_targets)
            if (t == name) return true;
        return false;
    };
    auto projection = [&](const std::string& p, const char* name) {
        if (wants_lora(name)) {
            nn::LinearOp<T> op;
            op.lora = std::make_shared<nn::LowRankAdapter<T>>(
                nn::make_lora(store, p, d, d, cfg.lora_rank, cfg.lora_alpha_effective()));
            return op;
        }
        return nn::make_linear(store, p, d, d, /*bias=*/true, /*frozen=*/true);
    };

    for (int l = 0; l < cfg.layers; ++l) {
        const std::string bp = path + ".block" + std::to_string(l);
        BackboneBlock<T> blk;
        blk.ln1_g = store.constant(bp + ".ln1.g", {d}, T(1), true);
        blk.ln1_b = store.constant(bp + ".ln1.b", {d}, T(0), true);
        blk.ln2_g = store.constant(bp + ".ln2.g", {d}, T(1), true);
        blk.ln2_b = store.constant(bp + ".ln2.b", {d}, T(0), true);
        blk.attn.heads = static_cast<std::size_t>(cfg.heads);
        blk.attn.q = projection(bp + ".attn.q", "q");
        blk.attn.k = projection(bp + ".attn.k", "k");
        blk.attn.v = projection(bp + ".attn.v", "v");
        blk.attn.o = projection(bp + ".attn.o", "o");
        blk.fc1 = nn::make_linear(store, bp + ".mlp.fc1", ff, d, true, true);
        blk.fc2 = nn::make_linear(store, bp + ".mlp.fc2", d, ff, true, true);
        bb.blocks.push_back(std::move(blk));
    }
    bb.lnf_g = store.constant(path + ".lnf.g", {d}, T(1), true);
    bb.lnf_b = store.constant(path + ".lnf.b", {d}, T(0), true);
    return bb;
}

template <class T>
struct BackboneOutput {
    nn::Ptr<T> prefix_out;  // P_llm (B,K,D), discarded downstream
    nn::Ptr<T> tokens_out;  // F_llm (B,P,D)
};

// Concatenates [prefix; tokens], adds contiguous positions 0..K+P-1, runs the
// causal blocks, and splits the result back apart.
template <class T>
BackboneOutput<T> forward_backbone(const Backbone<T>& bb, const nn::Ptr<T>& prefix,
                                   const nn::Ptr<T>& tokens, bool train = false,
                                   Rng* dropout_rng = nullptr) {
    if (prefix->rank() != 3 || tokens->rank() != 3)
        throw ShapeMismatch("forward_backbone: rank-3 inputs required");
    const std::size_t k = prefix->shape[1];
    const std::size_t p = tokens->shape[1];
    const std::size_t total = k + p;
    if (total > bb.pos->shape[0])
        throw SequenceTooLong("forward_backbone: sequence exceeds max_tokens (" +
                              std::to_string(total) + " > " + std::to_string(bb.pos->shape[0]) + ")");

    const std::size_t batch = prefix->shape[0];
    auto x = nn::concat_tokens(prefix, tokens);
    x = nn::add(x, nn::broadcast_to_batch(nn::slice_rows(bb.pos, 0, total), batch));
    const bool drop = train && bb.cfg.dropout > 0.0 && dropout_rng != nullptr;
    for (const auto& blk : bb.blocks) {
        auto h = nn::layer_norm(x, blk.ln1_g, blk.ln1_b);
        auto a = nn::multi_head_attention(h, h, /*causal=*/true, blk.attn);
        if (drop) a = nn::dropout(a, bb.cfg.dropout, *dropout_rng);
        x = nn::add(x, a);
        auto m = blk.fc2(nn::gelu(blk.fc1(nn::layer_norm(x, blk.ln2_g, blk.ln2_b))));
        if (drop) m = nn::dropout(m, bb.cfg.dropout, *dropout_rng);
        x = nn::add(x, m);
    }
    x = nn::layer_norm(x, bb.lnf_g, bb.lnf_b);
    return {nn::slice_tokens(x, 0, k), nn::slice_tokens(x, k, total)};
}

// Flips the frozen flag on the base weights (warm-phase support). Adapters
// and other modules are untouched.
template <class T>
void set_backbone_frozen(nn::ParamStore<T>& store, const std::string& path, bool frozen) {
    for (const auto& [name, t] : store.entries()) {
        if (name.rfind(path + ".", 0) != 0) continue;
        if (name.find(".lora_") != std::string::npos) continue;
        t->frozen = frozen;
        t->requires_grad = !frozen;
    }
}

}  // namespace rfml::model
