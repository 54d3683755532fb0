#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rfml/nn/ops.hpp"
#include "rfml/nn/params.hpp"
#include "rfml/prompt/tokenizer.hpp"

namespace rfml::prompt {

// Trainable vocabulary embeddings E (V x D) plus the mixing map M (V' x V)
// that derives the semantic anchors E' = M E. E' is always recomputed from
// the current parameters, never stored.
template <class T>
struct AnchorTable {
    nn::Ptr<T> embeddings;  // E
    nn::Ptr<T> mixer;       // M

    std::size_t vocab_size() const { return embeddings->shape[0]; }
    std::size_t anchor_count() const { return mixer->shape[0]; }
    std::size_t dim() const { return embeddings->shape[1]; }

    // E' as a graph node; gradients flow into both M and E.
    nn::Ptr<T> derive_anchors() const { return nn::matmul(mixer, embeddings); }
};

template <class T>
AnchorTable<T> make_anchor_table(nn::ParamStore<T>& store, const std::string& path,
                                 std::size_t vocab, std::size_t anchors, std::size_t dim) {
    if (anchors >= vocab)
        throw InvalidArgument("make_anchor_table: anchor count must be below vocab size");
    AnchorTable<T> t;
    t.embeddings = store.normal(path + ".e", {vocab, dim}, 0.02);
    t.mixer = store.normal(path + ".m", {anchors, vocab}, 1.0 / std::sqrt(static_cast<double>(vocab)));
    return t;
}

// gamma[i,j] = (p_i . e_j) / (|p_i| |e_j|); rows or columns with zero norm
// contribute zeros.
template <class T>
std::vector<double> cosine_similarity(const T* pt, std::size_t lt, const T* ep, std::size_t vp,
                                      std::size_t dim) {
    std::vector<double> pn(lt, 0.0), en(vp, 0.0);
    for (std::size_t i = 0; i < lt; ++i) {
        double s = 0;
        for (std::size_t c = 0; c < dim; ++c) s += static_cast<double>(pt[i * dim + c]) * pt[i * dim + c];
        pn[i] = std::sqrt(s);
    }
    for (std::size_t j = 0; j < vp; ++j) {
        double s = 0;
        for (std::size_t c = 0; c < dim; ++c) s += static_cast<double>(ep[j * dim + c]) * ep[j * dim + c];
        en[j] = std::sqrt(s);
    }
    std::vector<double> gamma(lt * vp, 0.0);
    for (std::size_t i = 0; i < lt; ++i) {
        if (pn[i] == 0.0) continue;
        for (std::size_t j = 0; j < vp; ++j) {
            if (en[j] == 0.0) continue;
            double dot = 0;
            for (std::size_t c = 0; c < dim; ++c)
                dot += static_cast<double>(pt[i * dim + c]) * ep[j * dim + c];
            gamma[i * vp + j] = dot / (pn[i] * en[j]);
        }
    }
    return gamma;
}

struct HybridSelection {
    std::vector<int> anchor_indices;  // K distinct indices into E'
    std::vector<double> scores;       // non-increasing
};

// ArgTopK over per-anchor scores, where score_j = max_i gamma[i,j]. Ties go
// to the lower anchor index, which also gives the exact top-K nesting
// property.
inline HybridSelection select_top_k(const std::vector<double>& gamma, std::size_t lt,
                                    std::size_t vp, std::size_t k) {
    if (k < 1 || k > vp) throw InvalidArgument("select_hybrid_prompt: K out of range");
    std::vector<double> score(vp, -std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < vp; ++j)
        for (std::size_t i = 0; i < lt; ++i) score[j] = std::max(score[j], gamma[i * vp + j]);
    std::vector<std::size_t> order(vp);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b]) return score[a] > score[b];
        return a < b;
    });
    HybridSelection sel;
    for (std::size_t r = 0; r < k; ++r) {
        sel.anchor_indices.push_back(static_cast<int>(order[r]));
        sel.scores.push_back(score[order[r]]);
    }
    return sel;
}

// Embeds prompt token ids through the current E values (selection is not a
// gradient path), scores them against the given anchor values, and returns
// the top-K selection.
template <class T>
HybridSelection select_hybrid_prompt(const std::vector<int>& prompt_tokens,
                                     const AnchorTable<T>& table,
                                     const std::vector<T>& anchor_values, std::size_t k) {
    const std::size_t dim = table.dim();
    const std::size_t vp = table.anchor_count();
    if (anchor_values.size() != vp * dim)
        throw ShapeMismatch("select_hybrid_prompt: anchor value size mismatch");
    std::vector<T> pt(prompt_tokens.size() * dim);
    for (std::size_t i = 0; i < prompt_tokens.size(); ++i) {
        const auto row = static_cast<std::size_t>(prompt_tokens[i]);
        if (row >= table.vocab_size())
            throw InvalidArgument("select_hybrid_prompt: token id out of vocabulary");
        std::copy_n(table.embeddings->v.data() + row * dim, dim, pt.data() + i * dim);
    }
    const auto gamma = cosine_similarity(pt.data(), prompt_tokens.size(), anchor_values.data(), vp, dim);
    return select_top_k(gamma, prompt_tokens.size(), vp, k);
}

}  // namespace rfml::prompt
