#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfml/common.hpp"
#include "rfml/faf/hfe.hpp"
#include "rfml/prompt/patchify.hpp"
#include "rfml/prompt/tokenizer.hpp"
#include "rfml/signal/dataset.hpp"

namespace rfml {

// Structured run configuration. Parsing is strict: any key that is not
// documented here aborts with ConfigError naming the offender, so a typo in a
// hyperparameter cannot silently run a wrong experiment.

namespace cfgdetail {

class StrictObject {
   public:
    StrictObject(const nlohmann::json& j, std::string section) : j_(j), section_(std::move(section)) {
        if (!j.is_object()) throw ConfigError("config section '" + section_ + "' must be an object");
        for (const auto& [key, value] : j.items()) pending_.push_back(key);
    }

    template <class T>
    void get(const char* key, T& out) {
        if (auto it = j_.find(key); it != j_.end()) {
            try {
                out = it->get<T>();
            } catch (const std::exception&) {
                throw ConfigError("config key '" + section_ + "." + key + "' has the wrong type");
            }
        }
        consume(key);
    }

    const nlohmann::json* child(const char* key) {
        consume(key);
        if (auto it = j_.find(key); it != j_.end()) return &*it;
        return nullptr;
    }

    ~StrictObject() = default;

    void finish() const {
        for (const auto& k : pending_)
            if (!consumed(k)) throw ConfigError("unknown config key '" + section_ + "." + k + "'");
    }

   private:
    bool consumed(const std::string& k) const {
        for (const auto& c : consumed_)
            if (c == k) return true;
        return false;
    }
    void consume(const char* key) { consumed_.emplace_back(key); }

    const nlohmann::json& j_;
    std::string section_;
    std::vector<std::string> pending_;
    std::vector<std::string> consumed_;
};

}  // namespace cfgdetail

struct ModelConfig {
    int layers = 2;
    int heads = 4;
    int d_model = 64;
    int ff_mult = 2;
    int lora_rank = 4;
    double lora_alpha = 0.0;  // 0 = auto (2 * rank)
    std::vector<std::string> lora_targets{"q", "k", "v", "o"};
    double dropout = 0.0;
    int max_tokens = 512;
    std::string decoder = "transformer";  // transformer | linear
    int decoder_layers = 1;
    std::string classifier_source = "llm_output";  // llm_output | pre_llm
    int warm_epochs = 0;  // >0: backbone base trains for this many pretrain epochs before freezing

    double lora_alpha_effective() const { return lora_alpha > 0.0 ? lora_alpha : 2.0 * lora_rank; }
};

struct HptrConfig {
    bool enabled = true;
    int v_prime = 64;
    int top_k = 7;
    int patch_len = 16;
    int stride = 16;
    int heads = 4;
    std::string dataset_desc =
        "Synthetic radio frames with I/Q channels covering standard digital modulation schemes "
        "over additive white Gaussian noise at configured SNR levels.";
    std::string task_desc =
        "Analyze the radio signal patches and support denoising, reconstruction, and modulation "
        "classification.";
};

struct FafConfig {
    bool enabled = true;
    faf::HFEConfig hfe;
};

struct TrainConfig {
    int batch_size = 32;
    int epochs = 50;
    double base_lr = 5e-5;
    double weight_decay = 5e-3;
    double warmup_fraction = 0.1;
    int patience_halve = 5;
    int patience_stop = 20;
    double denoise_weight = 0.5;
    double mask_weight = 0.5;
    double mask_ratio = 0.25;
    std::vector<double> snr_grid_db{0.0, 4.0, 8.0, 12.0, 16.0, 20.0};
    std::string loss_on = "all";  // all | masked
    std::string balancing = "auto";          // auto | uniform
    std::vector<double> balancing_factors;   // explicit b_i; overrides `balancing` when set
    int finetune_epochs = 30;
    double finetune_lr = 5e-5;
    double lr_floor = 1e-7;
    int shots = 100;
    std::string finetune_scope = "head_adapters";  // head_only | head_adapters | all_nonfrozen
    bool corrupt_classification = true;
};

struct EvalConfig {
    int batch_size = 128;
    std::vector<double> snr_grid_db{0.0, 2.0, 4.0, 6.0, 8.0, 10.0};
    int bench_batches = 100;
    int max_frames = 0;  // 0 = all
};

struct IoConfig {
    std::string out_dir = "out";
};

struct RunConfig {
    std::uint64_t seed = 42;
    signal::GeneratorConfig data;
    ModelConfig model;
    HptrConfig hptr;
    FafConfig faf;
    TrainConfig train;
    EvalConfig eval;
    IoConfig io;

    std::size_t num_patches() const {
        return prompt::patch_count(static_cast<std::size_t>(data.length),
                                   static_cast<std::size_t>(hptr.patch_len),
                                   static_cast<std::size_t>(hptr.stride));
    }

    void validate() const {
        data.validate();
        if (model.d_model < 1 || model.heads < 1 || model.d_model % model.heads != 0)
            throw ConfigError("model.d_model must be a positive multiple of model.heads");
        if (model.layers < 1) throw ConfigError("model.layers must be >= 1");
        if (model.ff_mult < 1) throw ConfigError("model.ff_mult must be >= 1");
        if (model.lora_rank < 1) throw ConfigError("model.lora_rank must be >= 1");
        for (const auto& t : model.lora_targets)
            if (t != "q" && t != "k" && t != "v" && t != "o")
                throw ConfigError("model.lora_targets entries must be one of q,k,v,o (got '" + t + "')");
        if (model.decoder != "transformer" && model.decoder != "linear")
            throw ConfigError("model.decoder must be 'transformer' or 'linear'");
        if (model.decoder_layers < 1 || model.decoder_layers > 2)
            throw ConfigError("model.decoder_layers must be 1 or 2");
        if (model.classifier_source != "llm_output" && model.classifier_source != "pre_llm")
            throw ConfigError("model.classifier_source must be 'llm_output' or 'pre_llm'");
        if (!(model.dropout >= 0.0 && model.dropout < 1.0))
            throw ConfigError("model.dropout must be in [0,1)");
        if (hptr.v_prime < 1 || hptr.v_prime >= prompt::kVocabSize)
            throw ConfigError("hptr.v_prime must be in [1, vocab)");
        if (hptr.top_k < 1 || hptr.top_k > hptr.v_prime)
            throw ConfigError("hptr.top_k must be in [1, hptr.v_prime]");
        if (hptr.heads < 1 || model.d_model % hptr.heads != 0)
            throw ConfigError("hptr.heads must divide model.d_model");
        const std::size_t p = num_patches();
        if (static_cast<std::size_t>(model.max_tokens) < p + static_cast<std::size_t>(hptr.top_k))
            throw ConfigError("model.max_tokens must cover top_k + patch count");
        if (faf.enabled) {
            try {
                faf.hfe.validate(static_cast<std::size_t>(data.length), p);
            } catch (const Error& e) {
                throw ConfigError(std::string("faf.hfe_layers: ") + e.what());
            }
        }
        if (train.batch_size < 1 || train.epochs < 1)
            throw ConfigError("train.batch_size and train.epochs must be >= 1");
        if (train.denoise_weight < 0 || train.mask_weight < 0 ||
            train.denoise_weight + train.mask_weight <= 0)
            throw ConfigError("train pretext weights must be non-negative and not both zero");
        if (!(train.mask_ratio > 0.0 && train.mask_ratio < 1.0))
            throw ConfigError("train.mask_ratio must be in (0,1)");
        if (train.loss_on != "all" && train.loss_on != "masked")
            throw ConfigError("train.loss_on must be 'all' or 'masked'");
        if (train.balancing != "auto" && train.balancing != "uniform")
            throw ConfigError("train.balancing must be 'auto' or 'uniform'");
        for (double b : train.balancing_factors)
            if (!(b > 0.0)) throw ConfigError("train.balancing_factors must be positive");
        if (train.finetune_scope != "head_only" && train.finetune_scope != "head_adapters" &&
            train.finetune_scope != "all_nonfrozen")
            throw ConfigError("train.finetune_scope must be head_only|head_adapters|all_nonfrozen");
        if (train.shots < 1) throw ConfigError("train.shots must be >= 1");
        if (eval.batch_size < 1) throw ConfigError("eval.batch_size must be >= 1");
    }

    nlohmann::ordered_json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);

    // Hash of the canonical (sorted-key) serialization.
    std::string config_hash() const {
        const auto dump = nlohmann::json(nlohmann::json::parse(to_json().dump())).dump();
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv1a(dump)));
        return buf;
    }

    // Hash over the keys that determine parameter shapes and frozen-base
    // values; checkpoints refuse to load across a mismatch.
    std::string geometry_hash() const {
        nlohmann::json g;
        g["seed"] = seed;
        g["length"] = data.length;
        g["layers"] = model.layers;
        g["heads"] = model.heads;
        g["d_model"] = model.d_model;
        g["ff_mult"] = model.ff_mult;
        g["lora_rank"] = model.lora_rank;
        g["lora_targets"] = model.lora_targets;
        g["max_tokens"] = model.max_tokens;
        g["decoder_layers"] = model.decoder_layers;
        g["v_prime"] = hptr.v_prime;
        g["patch_len"] = hptr.patch_len;
        g["stride"] = hptr.stride;
        g["hptr_heads"] = hptr.heads;
        nlohmann::json layers = nlohmann::json::array();
        for (const auto& l : faf.hfe.layers)
            layers.push_back({{"c", l.out_channels},
                              {"k", l.kernel_size},
                              {"pw", l.pool_width},
                              {"ps", l.pool_stride}});
        g["hfe"] = layers;
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(g.dump())));
        return buf;
    }
};

inline nlohmann::ordered_json RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["data"] = nlohmann::ordered_json(data.to_json());
    j["model"] = {{"layers", model.layers},
                  {"heads", model.heads},
                  {"d_model", model.d_model},
                  {"ff_mult", model.ff_mult},
                  {"lora_rank", model.lora_rank},
                  {"lora_alpha", model.lora_alpha},
                  {"lora_targets", model.lora_targets},
                  {"dropout", model.dropout},
                  {"max_tokens", model.max_tokens},
                  {"decoder", model.decoder},
                  {"decoder_layers", model.decoder_layers},
                  {"classifier_source", model.classifier_source},
                  {"warm_epochs", model.warm_epochs}};
    j["hptr"] = {{"enabled", hptr.enabled},     {"v_prime", hptr.v_prime},
                 {"top_k", hptr.top_k},         {"patch_len", hptr.patch_len},
                 {"stride", hptr.stride},       {"heads", hptr.heads},
                 {"dataset_desc", hptr.dataset_desc}, {"task_desc", hptr.task_desc}};
    nlohmann::ordered_json hfe_layers = nlohmann::ordered_json::array();
    for (const auto& l : faf.hfe.layers)
        hfe_layers.push_back({{"out_channels", l.out_channels},
                              {"kernel_size", l.kernel_size},
                              {"pool_width", l.pool_width},
                              {"pool_stride", l.pool_stride}});
    j["faf"] = {{"enabled", faf.enabled}, {"hfe_layers", hfe_layers}};
    j["train"] = {{"batch_size", train.batch_size},
                  {"epochs", train.epochs},
                  {"base_lr", train.base_lr},
                  {"weight_decay", train.weight_decay},
                  {"warmup_fraction", train.warmup_fraction},
                  {"patience_halve", train.patience_halve},
                  {"patience_stop", train.patience_stop},
                  {"denoise_weight", train.denoise_weight},
                  {"mask_weight", train.mask_weight},
                  {"mask_ratio", train.mask_ratio},
                  {"snr_grid_db", train.snr_grid_db},
                  {"loss_on", train.loss_on},
                  {"balancing", train.balancing},
                  {"balancing_factors", train.balancing_factors},
                  {"finetune_epochs", train.finetune_epochs},
                  {"finetune_lr", train.finetune_lr},
                  {"lr_floor", train.lr_floor},
                  {"shots", train.shots},
                  {"finetune_scope", train.finetune_scope},
                  {"corrupt_classification", train.corrupt_classification}};
    j["eval"] = {{"batch_size", eval.batch_size},
                 {"snr_grid_db", eval.snr_grid_db},
                 {"bench_batches", eval.bench_batches},
                 {"max_frames", eval.max_frames}};
    j["io"] = {{"out_dir", io.out_dir}};
    return j;
}

inline RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig cfg;
    cfgdetail::StrictObject root(j, "");
    root.get("seed", cfg.seed);
    if (const auto* d = root.child("data")) {
        cfgdetail::StrictObject s(*d, "data");
        s.get("schemes", cfg.data.schemes);
        s.get("snr_grid_db", cfg.data.snr_grid_db);
        s.get("frames_per_cell", cfg.data.frames_per_cell);
        s.get("length", cfg.data.length);
        s.get("sps", cfg.data.sps);
        s.get("seed", cfg.data.seed);
        s.get("pulse", cfg.data.pulse);
        s.get("multipath_taps", cfg.data.multipath_taps);
        s.finish();
    }
    if (const auto* d = root.child("model")) {
        cfgdetail::StrictObject s(*d, "model");
        s.get("layers", cfg.model.layers);
        s.get("heads", cfg.model.heads);
        s.get("d_model", cfg.model.d_model);
        s.get("ff_mult", cfg.model.ff_mult);
        s.get("lora_rank", cfg.model.lora_rank);
        s.get("lora_alpha", cfg.model.lora_alpha);
        s.get("lora_targets", cfg.model.lora_targets);
        s.get("dropout", cfg.model.dropout);
        s.get("max_tokens", cfg.model.max_tokens);
        s.get("decoder", cfg.model.decoder);
        s.get("decoder_layers", cfg.model.decoder_layers);
        s.get("classifier_source", cfg.model.classifier_source);
        s.get("warm_epochs", cfg.model.warm_epochs);
        s.finish();
    }
    if (const auto* d = root.child("hptr")) {
        cfgdetail::StrictObject s(*d, "hptr");
        s.get("enabled", cfg.hptr.enabled);
        s.get("v_prime", cfg.hptr.v_prime);
        s.get("top_k", cfg.hptr.top_k);
        s.get("patch_len", cfg.hptr.patch_len);
        s.get("stride", cfg.hptr.stride);
        s.get("heads", cfg.hptr.heads);
        s.get("dataset_desc", cfg.hptr.dataset_desc);
        s.get("task_desc", cfg.hptr.task_desc);
        s.finish();
    }
    if (const auto* d = root.child("faf")) {
        cfgdetail::StrictObject s(*d, "faf");
        s.get("enabled", cfg.faf.enabled);
        if (const auto* layers = s.child("hfe_layers")) {
            if (!layers->is_array() || layers->size() != 3)
                throw ConfigError("faf.hfe_layers must list exactly three layers");
            for (std::size_t l = 0; l < 3; ++l) {
                cfgdetail::StrictObject ls((*layers)[l], "faf.hfe_layers[" + std::to_string(l) + "]");
                ls.get("out_channels", cfg.faf.hfe.layers[l].out_channels);
                ls.get("kernel_size", cfg.faf.hfe.layers[l].kernel_size);
                ls.get("pool_width", cfg.faf.hfe.layers[l].pool_width);
                ls.get("pool_stride", cfg.faf.hfe.layers[l].pool_stride);
                ls.finish();
            }
        }
        s.finish();
    }
    if (const auto* d = root.child("train")) {
        cfgdetail::StrictObject s(*d, "train");
        s.get("batch_size", cfg.train.batch_size);
        s.get("epochs", cfg.train.epochs);
        s.get("base_lr", cfg.train.base_lr);
        s.get("weight_decay", cfg.train.weight_decay);
        s.get("warmup_fraction", cfg.train.warmup_fraction);
        s.get("patience_halve", cfg.train.patience_halve);
        s.get("patience_stop", cfg.train.patience_stop);
        s.get("denoise_weight", cfg.train.denoise_weight);
        s.get("mask_weight", cfg.train.mask_weight);
        s.get("mask_ratio", cfg.train.mask_ratio);
        s.get("snr_grid_db", cfg.train.snr_grid_db);
        s.get("loss_on", cfg.train.loss_on);
        s.get("balancing", cfg.train.balancing);
        s.get("balancing_factors", cfg.train.balancing_factors);
        s.get("finetune_epochs", cfg.train.finetune_epochs);
        s.get("finetune_lr", cfg.train.finetune_lr);
        s.get("lr_floor", cfg.train.lr_floor);
        s.get("shots", cfg.train.shots);
        s.get("finetune_scope", cfg.train.finetune_scope);
        s.get("corrupt_classification", cfg.train.corrupt_classification);
        s.finish();
    }
    if (const auto* d = root.child("eval")) {
        cfgdetail::StrictObject s(*d, "eval");
        s.get("batch_size", cfg.eval.batch_size);
        s.get("snr_grid_db", cfg.eval.snr_grid_db);
        s.get("bench_batches", cfg.eval.bench_batches);
        s.get("max_frames", cfg.eval.max_frames);
        s.finish();
    }
    if (const auto* d = root.child("io")) {
        cfgdetail::StrictObject s(*d, "io");
        s.get("out_dir", cfg.io.out_dir);
        s.finish();
    }
    root.finish();
    cfg.validate();
    return cfg;
}

}  // namespace rfml
