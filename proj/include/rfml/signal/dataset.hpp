#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfml/rng.hpp"
#include "rfml/signal/channel.hpp"
#include "rfml/signal/frame.hpp"
#include "rfml/signal/modulate.hpp"

namespace rfml::signal {

using Json = nlohmann::ordered_json;

struct SignalDataset {
    std::vector<IQFrame> frames;
    std::vector<std::string> class_names;
    std::string split_tag;  // train | val | test
    Json manifest = Json::object();

    void validate() const {
        std::size_t len = 0;
        for (const auto& f : frames) {
            if (len == 0) len = f.length();
            if (f.length() != len)
                throw CorruptDataset("SignalDataset: frames disagree on length");
            if (f.label && (*f.label < 0 || static_cast<std::size_t>(*f.label) >= class_names.size()))
                throw CorruptDataset("SignalDataset: label outside class_names");
        }
    }

    std::size_t frame_length() const { return frames.empty() ? 0 : frames.front().length(); }
};

struct GeneratorConfig {
    std::vector<std::string> schemes{"BPSK", "QPSK", "PAM4", "QAM16"};
    std::vector<double> snr_grid_db{0.0, 10.0, 18.0};
    int frames_per_cell = 100;  // frames per (scheme, SNR) cell
    int length = 128;           // samples per frame
    int sps = 8;                // samples per symbol
    std::uint64_t seed = 42;
    std::string pulse = "rect";                        // rect | rrc
    std::vector<std::array<double, 2>> multipath_taps;  // empty = identity channel

    void validate() const {
        if (schemes.empty()) throw InvalidArgument("generator: empty scheme list");
        for (const auto& s : schemes) parse_scheme(s);
        if (snr_grid_db.empty()) throw InvalidArgument("generator: empty snr grid");
        if (frames_per_cell < 1) throw InvalidArgument("generator: frames_per_cell must be >= 1");
        if (length < 1 || sps < 1) throw InvalidArgument("generator: length and sps must be >= 1");
        if (pulse != "rect" && pulse != "rrc") throw InvalidArgument("generator: pulse must be rect or rrc");
    }

    Json to_json() const {
        Json j;
        j["schemes"] = schemes;
        j["snr_grid_db"] = snr_grid_db;
        j["frames_per_cell"] = frames_per_cell;
        j["length"] = length;
        j["sps"] = sps;
        j["seed"] = seed;
        j["pulse"] = pulse;
        j["multipath_taps"] = multipath_taps;
        return j;
    }
};

struct DatasetSplits {
    SignalDataset train, val, test;
};

namespace detail {

// Records are 32-bit on disk; quantize at generation time so in-memory and
// reloaded datasets are bit-identical.
inline void quantize_f32(IQFrame& f) {
    for (auto& v : f.i) v = static_cast<double>(static_cast<float>(v));
    for (auto& v : f.q) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace detail

// Balanced clean-signal benchmark. Frames carry their class label and the SNR
// at which downstream corruption should happen; the stored waveform itself is
// noiseless. Splits are 8:1:1 per (scheme, SNR) cell, disjoint by seed-derived
// stream, deterministic per seed.
inline DatasetSplits make_synthetic_benchmark(const GeneratorConfig& cfg) {
    cfg.validate();
    DatasetSplits out;
    for (auto* ds : {&out.train, &out.val, &out.test}) {
        ds->class_names = cfg.schemes;
        ds->manifest["generator"] = cfg.to_json();
        ds->manifest["format_version"] = "1";
    }
    out.train.split_tag = "train";
    out.val.split_tag = "val";
    out.test.split_tag = "test";

    const Pulse pulse = cfg.pulse == "rrc" ? Pulse::Rrc : Pulse::Rect;
    const int num_symbols = (cfg.length + cfg.sps - 1) / cfg.sps;

    ChannelSpec multipath;
    const bool use_multipath = !cfg.multipath_taps.empty();
    if (use_multipath) {
        multipath.taps.clear();
        for (const auto& t : cfg.multipath_taps) multipath.taps.emplace_back(t[0], t[1]);
        multipath.snr_db = kNoiselessDb;
        multipath.validate();
    }

    std::size_t cell = 0;
    for (std::size_t si = 0; si < cfg.schemes.size(); ++si) {
        const Scheme scheme = parse_scheme(cfg.schemes[si]);
        for (double snr : cfg.snr_grid_db) {
            const std::uint64_t cell_seed = derive_seed(cfg.seed, cell);
            std::vector<IQFrame> cell_frames;
            cell_frames.reserve(static_cast<std::size_t>(cfg.frames_per_cell));
            for (int k = 0; k < cfg.frames_per_cell; ++k) {
                IQFrame f = generate_modulated(scheme, num_symbols, cfg.sps,
                                               derive_seed(cell_seed, static_cast<std::uint64_t>(k)),
                                               pulse);
                f.i.resize(static_cast<std::size_t>(cfg.length));
                f.q.resize(static_cast<std::size_t>(cfg.length));
                if (use_multipath) f = apply_channel(f, multipath);
                f = normalize(f);
                detail::quantize_f32(f);
                f.label = static_cast<int>(si);
                f.snr_db = snr;
                f.scheme = cfg.schemes[si];
                cell_frames.push_back(std::move(f));
            }
            // 8:1:1 by deterministic per-cell shuffle.
            std::vector<std::size_t> idx(cell_frames.size());
            std::iota(idx.begin(), idx.end(), 0);
            Rng shuffle_rng(derive_seed(cell_seed, std::string("split")));
            shuffle_rng.shuffle(idx.begin(), idx.end());
            const std::size_t n = idx.size();
            const std::size_t n_val = n / 10;
            const std::size_t n_test = n / 10;
            const std::size_t n_train = n - n_val - n_test;
            for (std::size_t k = 0; k < n; ++k) {
                auto& f = cell_frames[idx[k]];
                if (k < n_train)
                    out.train.frames.push_back(std::move(f));
                else if (k < n_train + n_val)
                    out.val.frames.push_back(std::move(f));
                else
                    out.test.frames.push_back(std::move(f));
            }
            ++cell;
        }
    }
    out.train.validate();
    out.val.validate();
    out.test.validate();
    return out;
}

// ---------------------------------------------------------------------------
// On-disk format: "RFDS" | u32 header bytes | JSON header | f32 LE records,
// one frame = length * 2 floats interleaved i0,q0,i1,q1,...

inline void save_dataset(const SignalDataset& ds, const std::string& path) {
    ds.validate();
    Json header;
    header["format_version"] = "1";
    header["split_tag"] = ds.split_tag;
    header["class_names"] = ds.class_names;
    header["length"] = ds.frame_length();
    header["manifest"] = ds.manifest;
    Json fr = Json::array();
    for (const auto& f : ds.frames) {
        Json m;
        m["label"] = f.label ? Json(*f.label) : Json(nullptr);
        m["snr_db"] = f.snr_db ? Json(*f.snr_db) : Json(nullptr);
        m["scheme"] = f.scheme ? Json(*f.scheme) : Json(nullptr);
        fr.push_back(std::move(m));
    }
    header["frames"] = std::move(fr);
    const std::string hs = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_dataset: cannot open " + path);
    os.write("RFDS", 4);
    const auto hlen = static_cast<std::uint32_t>(hs.size());
    os.write(reinterpret_cast<const char*>(&hlen), 4);
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    std::vector<float> rec;
    for (const auto& f : ds.frames) {
        rec.resize(f.length() * 2);
        for (std::size_t n = 0; n < f.length(); ++n) {
            rec[2 * n] = static_cast<float>(f.i[n]);
            rec[2 * n + 1] = static_cast<float>(f.q[n]);
        }
        os.write(reinterpret_cast<const char*>(rec.data()),
                 static_cast<std::streamsize>(rec.size() * sizeof(float)));
    }
    if (!os) throw IoError("save_dataset: write failed for " + path);
}

inline SignalDataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_dataset: cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "RFDS", 4) != 0)
        throw UnsupportedFormat("load_dataset: bad magic");
    std::uint32_t hlen = 0;
    if (!is.read(reinterpret_cast<char*>(&hlen), 4))
        throw CorruptDataset("load_dataset: truncated header length");
    std::string hs(hlen, '\0');
    if (!is.read(hs.data(), hlen)) throw CorruptDataset("load_dataset: truncated header");
    Json header;
    try {
        header = Json::parse(hs);
    } catch (const std::exception& e) {
        throw CorruptDataset(std::string("load_dataset: bad header json: ") + e.what());
    }
    if (header.value("format_version", "") != "1")
        throw UnsupportedFormat("load_dataset: unsupported format version");

    SignalDataset ds;
    ds.split_tag = header.value("split_tag", "");
    ds.class_names = header.at("class_names").get<std::vector<std::string>>();
    ds.manifest = header.value("manifest", Json::object());
    const auto length = header.at("length").get<std::size_t>();
    const auto& fr = header.at("frames");

    std::vector<float> rec(length * 2);
    for (const auto& m : fr) {
        IQFrame f;
        f.i.resize(length);
        f.q.resize(length);
        if (!is.read(reinterpret_cast<char*>(rec.data()),
                     static_cast<std::streamsize>(rec.size() * sizeof(float))))
            throw CorruptDataset("load_dataset: truncated records");
        for (std::size_t n = 0; n < length; ++n) {
            f.i[n] = rec[2 * n];
            f.q[n] = rec[2 * n + 1];
        }
        if (!m.at("label").is_null()) f.label = m.at("label").get<int>();
        if (!m.at("snr_db").is_null()) f.snr_db = m.at("snr_db").get<double>();
        if (!m.at("scheme").is_null()) f.scheme = m.at("scheme").get<std::string>();
        ds.frames.push_back(std::move(f));
    }
    if (is.peek() != std::char_traits<char>::eof())
        throw CorruptDataset("load_dataset: trailing bytes after records");
    try {
        ds.validate();
    } catch (const CorruptDataset&) {
        throw;
    }
    return ds;
}

}  // namespace rfml::signal
