#pragma once

#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "rfml/model/pipeline.hpp"
#include "rfml/nn/adamw.hpp"

namespace rfml::model {

// Checkpoint container: "RFCK" | u32 version | u64 header bytes | JSON header
// | little-endian parameter blobs (non-frozen only) | optional f64 optimizer
// moments. Frozen-base weights are reconstructed from (config, init seed) at
// load time and never serialized.

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void save_checkpoint(const Pipeline<T>& pipe, const std::string& path, int epoch,
                     const nn::AdamW<T>* optimizer = nullptr) {
    nlohmann::ordered_json header;
    header["format_version"] = kCheckpointVersion;
    header["dtype"] = sizeof(T) == 4 ? "f32" : "f64";
    header["num_classes"] = pipe.num_classes();
    header["config"] = pipe.config().to_json();
    header["config_hash"] = pipe.config().config_hash();
    header["geometry_hash"] = pipe.config().geometry_hash();
    header["init_seed"] = pipe.init_seed();
    header["epoch"] = epoch;
    header["rng_state"] = pipe.train_rng().state();

    nlohmann::ordered_json params = nlohmann::ordered_json::array();
    for (const auto& [name, t] : pipe.store().entries()) {
        if (t->frozen) continue;
        params.push_back({{"path", name}, {"shape", t->shape}, {"count", t->size()}});
    }
    header["params"] = params;
    if (optimizer) {
        header["optimizer"] = {{"step_count", optimizer->step_count()},
                               {"param_count", optimizer->params().size()}};
    } else {
        header["optimizer"] = nullptr;
    }
    const std::string hs = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_checkpoint: cannot open " + path);
    os.write("RFCK", 4);
    os.write(reinterpret_cast<const char*>(&kCheckpointVersion), 4);
    const std::uint64_t hlen = hs.size();
    os.write(reinterpret_cast<const char*>(&hlen), 8);
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : pipe.store().entries()) {
        if (t->frozen) continue;
        os.write(reinterpret_cast<const char*>(t->v.data()),
                 static_cast<std::streamsize>(t->v.size() * sizeof(T)));
    }
    if (optimizer) {
        for (const auto& slot : optimizer->slots()) {
            os.write(reinterpret_cast<const char*>(slot.m.data()),
                     static_cast<std::streamsize>(slot.m.size() * sizeof(double)));
            os.write(reinterpret_cast<const char*>(slot.s.data()),
                     static_cast<std::streamsize>(slot.s.size() * sizeof(double)));
        }
    }
    if (!os) throw IoError("save_checkpoint: write failed for " + path);
}

template <class T>
struct LoadedCheckpoint {
    std::unique_ptr<Pipeline<T>> pipeline;
    int epoch = 0;
    bool has_optimizer = false;
    std::int64_t optimizer_step_count = 0;
    std::vector<std::vector<double>> optimizer_m, optimizer_s;  // per trainable param, store order
};

template <class T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path, const RunConfig* expect = nullptr) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_checkpoint: cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "RFCK", 4) != 0)
        throw CorruptCheckpoint("load_checkpoint: bad magic");
    std::uint32_t version = 0;
    if (!is.read(reinterpret_cast<char*>(&version), 4))
        throw CorruptCheckpoint("load_checkpoint: truncated version");
    if (version != kCheckpointVersion)
        throw IncompatibleCheckpoint("load_checkpoint: unsupported version " +
                                     std::to_string(version));
    std::uint64_t hlen = 0;
    if (!is.read(reinterpret_cast<char*>(&hlen), 8))
        throw CorruptCheckpoint("load_checkpoint: truncated header length");
    std::string hs(hlen, '\0');
    if (!is.read(hs.data(), static_cast<std::streamsize>(hlen)))
        throw CorruptCheckpoint("load_checkpoint: truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const std::exception& e) {
        throw CorruptCheckpoint(std::string("load_checkpoint: bad header json: ") + e.what());
    }

    const std::string want_dtype = sizeof(T) == 4 ? "f32" : "f64";
    if (header.value("dtype", "") != want_dtype)
        throw IncompatibleCheckpoint("load_checkpoint: dtype mismatch");

    RunConfig cfg = RunConfig::from_json(header.at("config"));
    if (expect && expect->geometry_hash() != cfg.geometry_hash())
        throw IncompatibleCheckpoint(
            "load_checkpoint: model geometry differs from the provided config");

    LoadedCheckpoint<T> out;
    out.epoch = header.value("epoch", 0);
    out.pipeline = std::make_unique<Pipeline<T>>(cfg, header.at("num_classes").get<std::size_t>(),
                                                 header.at("init_seed").get<std::uint64_t>());

    // Restore the non-frozen blobs; the manifest must match the rebuilt model.
    std::vector<nn::Ptr<T>> trainables;
    std::vector<std::string> names;
    for (const auto& [name, t] : out.pipeline->store().entries()) {
        if (t->frozen) continue;
        trainables.push_back(t);
        names.push_back(name);
    }
    const auto& plist = header.at("params");
    if (plist.size() != trainables.size())
        throw IncompatibleCheckpoint("load_checkpoint: parameter count mismatch");
    for (std::size_t k = 0; k < trainables.size(); ++k) {
        const auto& meta = plist[k];
        if (meta.at("path").get<std::string>() != names[k] ||
            meta.at("shape").get<std::vector<std::size_t>>() != trainables[k]->shape)
            throw IncompatibleCheckpoint("load_checkpoint: parameter layout mismatch at " +
                                         names[k]);
        if (!is.read(reinterpret_cast<char*>(trainables[k]->v.data()),
                     static_cast<std::streamsize>(trainables[k]->v.size() * sizeof(T))))
            throw CorruptCheckpoint("load_checkpoint: truncated parameter blob at " + names[k]);
    }

    const auto rng_state = header.at("rng_state").get<std::array<std::uint64_t, 4>>();
    out.pipeline->train_rng().set_state(rng_state);

    if (!header.at("optimizer").is_null()) {
        out.has_optimizer = true;
        out.optimizer_step_count = header.at("optimizer").at("step_count").get<std::int64_t>();
        const auto n = header.at("optimizer").at("param_count").get<std::size_t>();
        if (n != trainables.size())
            throw IncompatibleCheckpoint("load_checkpoint: optimizer slot count mismatch");
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<double> m(trainables[k]->size()), s(trainables[k]->size());
            if (!is.read(reinterpret_cast<char*>(m.data()),
                         static_cast<std::streamsize>(m.size() * sizeof(double))) ||
                !is.read(reinterpret_cast<char*>(s.data()),
                         static_cast<std::streamsize>(s.size() * sizeof(double))))
                throw CorruptCheckpoint("load_checkpoint: truncated optimizer state");
            out.optimizer_m.push_back(std::move(m));
            out.optimizer_s.push_back(std::move(s));
        }
    }
    if (is.peek() != std::char_traits<char>::eof())
        throw CorruptCheckpoint("load_checkpoint: trailing bytes");
    return out;
}

}  // namespace rfml::model
