#pragma once

#include <array>
#include <string>

#include "rfml/nn/lora.hpp"
#include "rfml/nn/ops.hpp"

namespace rfml::faf {

struct HfeLayerSpec {
    std::size_t out_channels = 16;
    std::size_t kernel_size = 7;  // odd; convolutions keep length (same padding)
    std::size_t pool_width = 2;
    std::size_t pool_stride = 2;
};

// Exactly three conv -> ReLU -> max-pool stages; the composed pooling must
// land on exactly the patch count P so the feature rows align with tokens.
struct HFEConfig {
    std::array<HfeLayerSpec, 3> layers{
        HfeLayerSpec{16, 7, 2, 2}, HfeLayerSpec{32, 5, 2, 2}, HfeLayerSpec{64, 3, 4, 4}};

    std::size_t output_length(std::size_t input_len) const {
        std::size_t len = input_len;
        for (const auto& l : layers) {
            if (l.kernel_size % 2 == 0)
                throw InvalidArgument("HFEConfig: kernel_size must be odd for same-length conv");
            if (len < l.pool_width) throw ShapeMismatch("HFEConfig: pool wider than feature map");
            len = (len - l.pool_width) / l.pool_stride + 1;
        }
        return len;
    }

    void validate(std::size_t input_len, std::size_t num_patches) const {
        for (const auto& l : layers)
            if (l.out_channels < 1 || l.kernel_size < 1 || l.pool_width < 1 || l.pool_stride < 1)
                throw InvalidArgument("HFEConfig: layer fields must be >= 1");
        if (output_length(input_len) != num_patches)
            throw ShapeMismatch("HFEConfig: downsampling does not land on the patch count");
    }
};

template <class T>
struct Hfe {
    HFEConfig cfg;
    std::array<nn::Ptr<T>, 3> conv_w;
    std::array<nn::Ptr<T>, 3> conv_b;
    nn::LinearOp<T> proj;  // per-position channel vector -> D
};

template <class T>
Hfe<T> make_hfe(nn::ParamStore<T>& store, const std::string& path, const HFEConfig& cfg,
                std::size_t d_out) {
    Hfe<T> h;
    h.cfg = cfg;
    std::size_t in_ch = 2;
    for (std::size_t l = 0; l < 3; ++l) {
        const auto& spec = cfg.layers[l];
        const std::string lp = path + ".layer" + std::to_string(l);
        h.conv_w[l] = store.normal(lp + ".w", {spec.out_channels, in_ch, spec.kernel_size},
                                   1.0 / std::sqrt(static_cast<double>(in_ch * spec.kernel_size)));
        h.conv_b[l] = store.constant(lp + ".b", {spec.out_channels}, T(0));
        in_ch = spec.out_channels;
    }
    h.proj = nn::make_linear(store, path + ".proj", d_out, in_ch);
    return h;
}

// raw (B,2,L) -> F_h (B,P,D)
template <class T>
nn::Ptr<T> extract_high_freq(const Hfe<T>& h, const nn::Ptr<T>& raw) {
    if (raw->rank() != 3 || raw->shape[1] != 2)
        throw ShapeMismatch("extract_high_freq: expected (B,2,L) input");
    auto x = raw;
    for (std::size_t l = 0; l < 3; ++l) {
        const auto& spec = h.cfg.layers[l];
        x = nn::conv1d(x, h.conv_w[l], h.conv_b[l], 1, (spec.kernel_size - 1) / 2);
        x = nn::relu(x);
        x = nn::max_pool1d(x, spec.pool_width, spec.pool_stride);
    }
    return h.proj(nn::transpose_last2(x));
}

}  // namespace rfml::faf
