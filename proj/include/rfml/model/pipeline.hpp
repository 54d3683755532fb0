#pragma once

#include <string>
#include <vector>

#include "rfml/config.hpp"
#include "rfml/faf/fuse.hpp"
#include "rfml/faf/hfe.hpp"
#include "rfml/model/backbone.hpp"
#include "rfml/model/decoder.hpp"
#include "rfml/prompt/anchors.hpp"
#include "rfml/prompt/patchify.hpp"
#include "rfml/prompt/reprogram.hpp"
#include "rfml/prompt/template.hpp"

namespace rfml::model {

enum class ParamScope { Pretrain, HeadOnly, HeadAdapters, AllNonFrozen };

// The full network: patch embedding, hybrid prompting + reprogramming,
// frequency fusion, frozen adapter-equipped backbone, both decoders, and the
// classification head. All modules are constructed unconditionally (their
// init streams are path-derived, so unused modules never shift the others);
// the hptr/faf flags choose the forward route.
template <class T>
class Pipeline {
   public:
    Pipeline(RunConfig cfg, std::size_t num_classes, std::uint64_t seed)
        : cfg_(std::move(cfg)),
          num_classes_(num_classes),
          store_(seed),
          anchors_(prompt::make_anchor_table<T>(store_, "anchors", prompt::kVocabSize,
                                                static_cast<std::size_t>(cfg_.hptr.v_prime),
                                                static_cast<std::size_t>(cfg_.model.d_model))),
          patch_(prompt::make_patch_embed<T>(store_, "patch",
                                             static_cast<std::size_t>(cfg_.hptr.patch_len),
                                             static_cast<std::size_t>(cfg_.hptr.stride),
                                             cfg_.num_patches(),
                                             static_cast<std::size_t>(cfg_.model.d_model))),
          reprog_(prompt::make_reprogram<T>(store_, "reprogram",
                                            static_cast<std::size_t>(cfg_.model.d_model),
                                            static_cast<std::size_t>(cfg_.model.d_model),
                                            static_cast<std::size_t>(cfg_.model.d_model),
                                            static_cast<std::size_t>(cfg_.hptr.heads))),
          hfe_(faf::make_hfe<T>(store_, "hfe", cfg_.faf.hfe,
                                static_cast<std::size_t>(cfg_.model.d_model))),
          fuse_(faf::make_fuse<T>(store_, "fuse", static_cast<std::size_t>(cfg_.model.d_model),
                                  static_cast<std::size_t>(cfg_.model.heads))),
          backbone_(make_backbone<T>(store_, "backbone", cfg_.model)),
          dec_linear_(make_linear_decoder<T>(store_, "decoder.linear",
                                             static_cast<std::size_t>(cfg_.model.d_model),
                                             static_cast<std::size_t>(cfg_.hptr.patch_len))),
          dec_transformer_(make_transformer_decoder<T>(
              store_, "decoder.tf", static_cast<std::size_t>(cfg_.model.d_model),
              static_cast<std::size_t>(cfg_.model.heads), cfg_.num_patches(),
              static_cast<std::size_t>(cfg_.hptr.patch_len), cfg_.model.decoder_layers)),
          head_(nn::make_linear<T>(store_, "head", num_classes,
                                   static_cast<std::size_t>(cfg_.model.d_model))),
          train_rng_(derive_seed(seed, std::string("train_stream"))) {
        cfg_.validate();
    }

    struct Encoded {
        nn::Ptr<T> f_prime;  // F'_s entering the backbone (B,P,D)
        nn::Ptr<T> f_llm;    // backbone signal-token output (B,P,D)
        nn::Ptr<T> p_llm;    // backbone prefix output (B,K,D), discarded
    };

    // Everything after the prefix is built: patchify, reprogram, fuse, run the
    // backbone. Exposed separately so the latency benchmark can time the model
    // forward for a fixed prefix.
    Encoded encode_from_prefix(const nn::Ptr<T>& prefix, const std::vector<signal::IQFrame>& batch,
                               bool train = false, nn::Ptr<T> anchors_node = nullptr) {
        if (cfg_.hptr.enabled && !anchors_node) anchors_node = anchors_.derive_anchors();
        auto x_s = prompt::patchify_and_embed(patch_, batch);
        nn::Ptr<T> f_s =
            cfg_.hptr.enabled ? prompt::reprogram(reprog_, x_s, anchors_node) : x_s;
        nn::Ptr<T> f_prime = f_s;
        if (cfg_.faf.enabled) {
            auto raw = prompt::frames_to_tensor<T>(batch);
            auto f_h = faf::extract_high_freq(hfe_, raw);
            f_prime = faf::fuse(fuse_, f_s, f_h);
        }
        auto out = forward_backbone(backbone_, prefix, f_prime, train, &train_rng_);
        return {f_prime, out.tokens_out, out.prefix_out};
    }

    // Full HPTR/FAF/backbone path for a batch of (possibly corrupted) frames.
    Encoded encode(const std::vector<signal::IQFrame>& batch, const std::string& task_desc,
                   bool train = false) {
        auto anchors_node = cfg_.hptr.enabled ? anchors_.derive_anchors() : nullptr;
        auto prefix = build_prefix(batch, task_desc, anchors_node);
        return encode_from_prefix(prefix, batch, train, anchors_node);
    }

    // Hybrid prefix (B,K,D) for a batch, as a differentiable gather when HPTR
    // is enabled or the truncated raw prompt embedding otherwise.
    nn::Ptr<T> build_prefix(const std::vector<signal::IQFrame>& batch,
                            const std::string& task_desc, nn::Ptr<T> anchors_node = nullptr) {
        const auto k = static_cast<std::size_t>(cfg_.hptr.top_k);
        std::vector<int> flat;
        flat.reserve(batch.size() * k);
        if (cfg_.hptr.enabled) {
            if (!anchors_node) anchors_node = anchors_.derive_anchors();
            for (const auto& f : batch) {
                auto sel = select_prompt(f, task_desc, anchors_node->v);
                flat.insert(flat.end(), sel.anchor_indices.begin(), sel.anchor_indices.end());
            }
            // Differentiable gather: grads reach the selected anchor rows and
            // through E' = M E into both tables.
            return nn::embedding_lookup(anchors_node, flat, {batch.size(), k});
        }
        // HPTR off: the raw truncated prompt embedding P_t (first K rows).
        for (const auto& f : batch) {
            auto ids = prompt::tokenize_bytes(
                prompt::build_prompt_text(cfg_.hptr.dataset_desc, task_desc, f));
            ids.resize(k, prompt::kPadToken);
            flat.insert(flat.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
        }
        return nn::embedding_lookup(anchors_.embeddings, flat, {batch.size(), k});
    }

    // Hardware prefix (B,L_T,D): the raw embedded template, padded to the
    // batch max token count.
    nn::Ptr<T> build_hardware_prefix(const std::vector<signal::IQFrame>& batch,
                                     const std::string& task_desc) {
        std::vector<std::vector<int>> ids(batch.size());
        std::size_t lt = 0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            ids[b] = prompt::tokenize_bytes(
                prompt::build_prompt_text(cfg_.hptr.dataset_desc, task_desc, batch[b]));
            lt = std::max(lt, ids[b].size());
        }
        std::vector<int> flat;
        flat.reserve(batch.size() * lt);
        for (auto& row : ids) {
            row.resize(lt, prompt::kPadToken);
            flat.insert(flat.end(), row.begin(), row.end());
        }
        return nn::embedding_lookup(anchors_.embeddings, flat, {batch.size(), lt});
    }

    Encoded encode_hardware_prompt(const std::vector<signal::IQFrame>& batch,
                                   const std::string& task_desc, bool train = false) {
        return encode_from_prefix(build_hardware_prefix(batch, task_desc), batch, train);
    }

    nn::Ptr<T> decode(const Encoded& enc) const {
        if (cfg_.num_patches() * static_cast<std::size_t>(cfg_.hptr.patch_len) !=
            static_cast<std::size_t>(cfg_.data.length))
            throw ShapeMismatch("decode: P * patch_len must equal the frame length");
        return cfg_.model.decoder == "linear" ? decode_linear(dec_linear_, enc.f_llm)
                                              : decode_transformer(dec_transformer_, enc.f_llm);
    }

    nn::Ptr<T> logits(const Encoded& enc) const {
        const auto& src = cfg_.model.classifier_source == "pre_llm" ? enc.f_prime : enc.f_llm;
        return head_(nn::mean_pool(src, 1));
    }

    // Inference conveniences (no gradient tape).
    std::vector<signal::IQFrame> denoise_frames(const std::vector<signal::IQFrame>& batch,
                                                const std::string& task_desc) {
        nn::NoGradGuard ng;
        auto enc = encode(batch, task_desc, false);
        return blocks_to_frames(decode(enc), static_cast<std::size_t>(cfg_.hptr.patch_len));
    }

    std::vector<int> classify_frames(const std::vector<signal::IQFrame>& batch,
                                     const std::string& task_desc) {
        nn::NoGradGuard ng;
        auto lg = logits(encode(batch, task_desc, false));
        std::vector<int> out(batch.size());
        const std::size_t c = lg->shape[1];
        for (std::size_t b = 0; b < batch.size(); ++b) {
            std::size_t best = 0;
            for (std::size_t k = 1; k < c; ++k)
                if (lg->v[b * c + k] > lg->v[b * c + best]) best = k;
            out[b] = static_cast<int>(best);
        }
        return out;
    }

    std::vector<nn::Ptr<T>> trainable_params(ParamScope scope) const {
        std::vector<nn::Ptr<T>> out;
        for (const auto& [path, t] : store_.entries()) {
            if (t->frozen) continue;
            const bool is_head = path.rfind("head.", 0) == 0;
            const bool is_adapter = path.find(".lora_") != std::string::npos;
            switch (scope) {
                case ParamScope::Pretrain:
                    if (!is_head) out.push_back(t);
                    break;
                case ParamScope::HeadOnly:
                    if (is_head) out.push_back(t);
                    break;
                case ParamScope::HeadAdapters:
                    if (is_head || is_adapter) out.push_back(t);
                    break;
                case ParamScope::AllNonFrozen:
                    out.push_back(t);
                    break;
            }
        }
        return out;
    }

    // Digest of all frozen parameter values; training must never change it.
    std::uint64_t frozen_digest() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (const auto& [path, t] : store_.entries()) {
            if (!t->frozen) continue;
            h = fnv1a(path, h);
            h = fnv1a(t->v.data(), t->v.size() * sizeof(T), h);
        }
        return h;
    }

    const RunConfig& config() const { return cfg_; }
    std::size_t num_classes() const { return num_classes_; }
    nn::ParamStore<T>& store() { return store_; }
    const nn::ParamStore<T>& store() const { return store_; }
    prompt::AnchorTable<T>& anchors() { return anchors_; }
    prompt::PatchEmbed<T>& patch() { return patch_; }
    Backbone<T>& backbone() { return backbone_; }
    TransformerDecoder<T>& transformer_decoder() { return dec_transformer_; }
    LinearDecoder<T>& linear_decoder() { return dec_linear_; }
    nn::LinearOp<T>& head() { return head_; }
    Rng& train_rng() { return train_rng_; }
    const Rng& train_rng() const { return train_rng_; }
    std::uint64_t init_seed() const { return store_.master_seed(); }

    // Per-sample hybrid prompt selection against current anchor values.
    prompt::HybridSelection select_prompt(const signal::IQFrame& frame,
                                          const std::string& task_desc,
                                          const std::vector<T>& anchor_values) const {
        const auto text = prompt::build_prompt_text(cfg_.hptr.dataset_desc, task_desc, frame);
        return prompt::select_hybrid_prompt(prompt::tokenize_bytes(text), anchors_, anchor_values,
                                            static_cast<std::size_t>(cfg_.hptr.top_k));
    }

   private:
    RunConfig cfg_;
    std::size_t num_classes_;
    nn::ParamStore<T> store_;
    prompt::AnchorTable<T> anchors_;
    prompt::PatchEmbed<T> patch_;
    prompt::Reprogram<T> reprog_;
    faf::Hfe<T> hfe_;
    faf::Fuse<T> fuse_;
    Backbone<T> backbone_;
    LinearDecoder<T> dec_linear_;
    TransformerDecoder<T> dec_transformer_;
    nn::LinearOp<T> head_;
    Rng train_rng_;
};

}  // namespace rfml::model
