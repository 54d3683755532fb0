#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rfml/cli/plot.hpp"
#include "rfml/config.hpp"
#include "rfml/model/checkpoint.hpp"
#include "rfml/train/trainer.hpp"

namespace rfml::cli {

namespace fs = std::filesystem;

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << text;
    if (!os) throw IoError("write failed: " + path.string());
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

inline signal::SignalDataset load_split(const fs::path& data_dir, const std::string& split) {
    const auto path = data_dir / (split + ".rfds");
    if (!fs::exists(path)) throw IoError("missing dataset file: " + path.string());
    return signal::load_dataset(path.string());
}

// --- gen-data ---------------------------------------------------------------

inline int cmd_gen_data(const RunConfig& cfg, const std::string& out_dir) {
    ensure_dir(out_dir);
    auto splits = signal::make_synthetic_benchmark(cfg.data);
    signal::save_dataset(splits.train, (fs::path(out_dir) / "train.rfds").string());
    signal::save_dataset(splits.val, (fs::path(out_dir) / "val.rfds").string());
    signal::save_dataset(splits.test, (fs::path(out_dir) / "test.rfds").string());

    nlohmann::ordered_json manifest;
    manifest["format_version"] = "1";
    manifest["generator"] = cfg.data.to_json();
    manifest["config_hash"] = cfg.config_hash();
    manifest["counts"] = {{"train", splits.train.frames.size()},
                          {"val", splits.val.frames.size()},
                          {"test", splits.test.frames.size()}};
    write_text(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");

    std::printf("gen-data: %zu train / %zu val / %zu test frames, %zu classes, L=%d -> %s\n",
                splits.train.frames.size(), splits.val.frames.size(), splits.test.frames.size(),
                cfg.data.schemes.size(), cfg.data.length, out_dir.c_str());
    return 0;
}

// --- pretrain ----------------------------------------------------------------

inline int cmd_pretrain(const RunConfig& cfg, const std::vector<std::string>& data_dirs,
                        const std::string& out_dir) {
    if (data_dirs.empty()) throw ConfigError("pretrain: at least one --data directory required");
    ensure_dir(out_dir);
    std::vector<signal::SignalDataset> trains, vals;
    for (const auto& d : data_dirs) {
        trains.push_back(load_split(d, "train"));
        vals.push_back(load_split(d, "val"));
    }
    std::vector<train::NamedDataset> datasets;
    for (std::size_t k = 0; k < trains.size(); ++k)
        datasets.push_back({&trains[k], &vals[k], fs::path(data_dirs[k]).filename().string()});

    model::Pipeline<float> pipe(cfg, trains.front().class_names.size(), cfg.seed);
    train::PretrainOptions opt;
    opt.on_epoch = [](const train::EpochRecord& r) {
        std::printf("  epoch %3d  val %.6f  lr %.3e%s  (%.1fs)\n", r.epoch, r.val_loss, r.lr,
                    r.halved ? "  [lr halved]" : "", r.wall_seconds);
        std::fflush(stdout);
    };
    auto log = train::pretrain(pipe, datasets, cfg.seed, opt);

    model::save_checkpoint(pipe, (fs::path(out_dir) / "checkpoint.rfck").string(),
                           static_cast<int>(log.epochs.size()));
    write_text(fs::path(out_dir) / "trainlog.csv", log.to_csv());
    auto lj = log.to_json();
    lj["config_hash"] = cfg.config_hash();
    write_text(fs::path(out_dir) / "trainlog.json", lj.dump(2) + "\n");
    std::printf("pretrain: %zu epochs (early stop %s), final val %.6f -> %s\n", log.epochs.size(),
                log.early_stop_epoch >= 0 ? std::to_string(log.early_stop_epoch).c_str() : "none",
                log.epochs.empty() ? 0.0 : log.epochs.back().val_loss, out_dir.c_str());
    return 0;
}

// --- helpers shared by finetune/eval -------------------------------------------

inline nlohmann::ordered_json metrics_json(const RunConfig& cfg, const metrics::EvalResult& res,
                                           const std::vector<std::string>& class_names) {
    auto j = res.report.to_json();
    j["config_hash"] = cfg.config_hash();
    j["class_names"] = class_names;
    auto cm = nlohmann::ordered_json::array();
    for (const auto& row : res.confusion.counts) cm.push_back(row);
    j["confusion"] = cm;
    return j;
}

inline std::string confusion_csv(const metrics::ConfusionMatrix& cm,
                                 const std::vector<std::string>& names) {
    std::ostringstream os;
    os << "true\\predicted";
    for (const auto& n : names) os << "," << n;
    os << "\n";
    for (std::size_t i = 0; i < cm.num_classes(); ++i) {
        os << names[i];
        for (std::size_t j = 0; j < cm.num_classes(); ++j) os << "," << cm.counts[i][j];
        os << "\n";
    }
    return os.str();
}

// --- finetune -------------------------------------------------------------------

inline int cmd_finetune(const RunConfig& cfg, const std::string& data_dir,
                        const std::string& out_dir, const std::string& init_ckpt) {
    ensure_dir(out_dir);
    auto train_ds = load_split(data_dir, "train");
    auto test_ds = load_split(data_dir, "test");

    std::unique_ptr<model::Pipeline<float>> pipe;
    if (!init_ckpt.empty()) {
        auto loaded = model::load_checkpoint<float>(init_ckpt, &cfg);
        pipe = std::move(loaded.pipeline);
    } else {
        pipe = std::make_unique<model::Pipeline<float>>(cfg, train_ds.class_names.size(), cfg.seed);
    }
    if (pipe->num_classes() != train_ds.class_names.size())
        throw IncompatibleCheckpoint("finetune: checkpoint class count differs from dataset");

    auto result = train::finetune_classifier(*pipe, train_ds, test_ds, cfg.train.shots, cfg.seed);
    model::save_checkpoint(*pipe, (fs::path(out_dir) / "checkpoint.rfck").string(),
                           cfg.train.finetune_epochs);
    write_text(fs::path(out_dir) / "trainlog.csv", result.log.to_csv());
    write_text(fs::path(out_dir) / "metrics.json",
               metrics_json(cfg, result.eval, test_ds.class_names).dump(2) + "\n");
    write_text(fs::path(out_dir) / "per_snr.csv", result.eval.report.per_snr_csv());
    write_text(fs::path(out_dir) / "confusion.csv",
               confusion_csv(result.eval.confusion, test_ds.class_names));
    std::printf("finetune: OA %.4f  kappa %.4f  (%d shots/class, %d epochs) -> %s\n",
                result.eval.report.oa, result.eval.report.kappa, cfg.train.shots,
                cfg.train.finetune_epochs, out_dir.c_str());
    return 0;
}

// --- eval ------------------------------------------------------------------------

// predictor_hook: "" = model from --ckpt; "oracle" or "constant:<k>" are
// plumbing test hooks.
inline int cmd_eval(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir,
                    const std::string& ckpt, const std::string& predictor_hook) {
    ensure_dir(out_dir);
    auto test_ds = load_split(data_dir, "test");

    std::unique_ptr<model::Pipeline<float>> pipe;
    metrics::BatchPredictor predictor;
    if (predictor_hook == "oracle") {
        predictor = [](const std::vector<signal::IQFrame>& batch) {
            std::vector<int> out;
            for (const auto& f : batch) {
                if (!f.label) throw MissingLabels("oracle predictor needs labels");
                out.push_back(*f.label);
            }
            return out;
        };
    } else if (predictor_hook.rfind("constant:", 0) == 0) {
        const int k = std::stoi(predictor_hook.substr(9));
        predictor = [k](const std::vector<signal::IQFrame>& batch) {
            return std::vector<int>(batch.size(), k);
        };
    } else if (!predictor_hook.empty()) {
        throw ConfigError("eval: unknown predictor hook '" + predictor_hook + "'");
    } else {
        if (ckpt.empty()) throw ConfigError("eval: --ckpt or --predictor required");
        auto loaded = model::load_checkpoint<float>(ckpt, &cfg);
        pipe = std::move(loaded.pipeline);
        predictor = [&pipe](const std::vector<signal::IQFrame>& batch) {
            return pipe->classify_frames(batch, train::kClassifyTask);
        };
        // Evaluation sees the corrupted (received) frames, like training.
        if (cfg.train.corrupt_classification) {
            for (std::size_t i = 0; i < test_ds.frames.size(); ++i) {
                auto& f = test_ds.frames[i];
                if (f.snr_db)
                    f = signal::add_awgn(f, *f.snr_db,
                                         derive_seed(cfg.seed, "test_noise" + std::to_string(i)));
            }
        }
    }

    auto res = metrics::evaluate_classifier(predictor, test_ds, cfg.eval.batch_size);
    write_text(fs::path(out_dir) / "metrics.json",
               metrics_json(cfg, res, test_ds.class_names).dump(2) + "\n");
    write_text(fs::path(out_dir) / "per_snr.csv", res.report.per_snr_csv());
    write_text(fs::path(out_dir) / "confusion.csv", confusion_csv(res.confusion, test_ds.class_names));
    std::printf("eval: OA %.4f  kappa %.4f  %.4fs/batch -> %s\n", res.report.oa, res.report.kappa,
                res.report.seconds_per_batch, out_dir.c_str());
    return 0;
}

// --- denoise ----------------------------------------------------------------------

inline int cmd_denoise(const RunConfig& cfg, const std::string& data_dir,
                       const std::string& out_dir, const std::string& ckpt) {
    ensure_dir(out_dir);
    auto test_ds = load_split(data_dir, "test");
    if (ckpt.empty()) throw ConfigError("denoise: --ckpt required");
    auto loaded = model::load_checkpoint<float>(ckpt, &cfg);
    auto& pipe = *loaded.pipeline;

    train::DenoiseFn fn = [&pipe](const std::vector<signal::IQFrame>& batch) {
        return pipe.denoise_frames(batch, train::kDenoiseTask);
    };
    train::DenoiseEvalOptions opt;
    opt.batch_size = cfg.train.batch_size;
    opt.max_frames = cfg.eval.max_frames;
    auto report = train::denoise_eval(fn, test_ds, cfg.eval.snr_grid_db, cfg.seed, opt);

    auto j = report.to_json();
    j["config_hash"] = cfg.config_hash();
    write_text(fs::path(out_dir) / "denoise.json", j.dump(2) + "\n");
    write_text(fs::path(out_dir) / "denoise.csv", report.to_csv());
    for (const auto& r : report.rows)
        std::printf("denoise: snr %5.1f dB  ssim model %.4f | noisy %.4f | sg %.4f   mse %.5f\n",
                    r.snr_db, r.ssim_model, r.ssim_noisy, r.ssim_sg.value_or(0.0), r.mse_model);
    return 0;
}

// --- ablate -----------------------------------------------------------------------

struct AblationCell {
    bool hptr = true;
    bool faf = true;
    bool ok = false;
    std::string error;
    double oa = 0, kappa = 0, ssim = 0, seconds_per_batch = 0;
};

inline int cmd_ablate(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir,
                      int threads) {
    ensure_dir(out_dir);
    auto train_ds = load_split(data_dir, "train");
    auto val_ds = load_split(data_dir, "val");
    auto test_ds = load_split(data_dir, "test");

    // Row order mirrors the reference table: off/off, on/off, off/on, on/on.
    std::vector<AblationCell> cells(4);
    cells[1].hptr = cells[3].hptr = true;
    cells[2].faf = cells[3].faf = true;
    auto run_cell = [&](AblationCell& cell) {
        try {
            RunConfig cc = cfg;
            cc.hptr.enabled = cell.hptr;
            cc.faf.enabled = cell.faf;
            const std::uint64_t cell_seed =
                derive_seed(cfg.seed, (cell.hptr ? 2 : 0) + (cell.faf ? 1 : 0));
            model::Pipeline<float> pipe(cc, train_ds.class_names.size(), cell_seed);
            train::pretrain(pipe, {{&train_ds, &val_ds, "ablate"}}, cell_seed);
            auto ft = train::finetune_classifier(pipe, train_ds, test_ds, cc.train.shots, cell_seed);
            cell.oa = ft.eval.report.oa;
            cell.kappa = ft.eval.report.kappa;
            cell.seconds_per_batch = ft.eval.report.seconds_per_batch;
            train::DenoiseFn fn = [&pipe](const std::vector<signal::IQFrame>& batch) {
                return pipe.denoise_frames(batch, train::kDenoiseTask);
            };
            train::DenoiseEvalOptions dopt;
            dopt.batch_size = cc.train.batch_size;
            dopt.max_frames = cc.eval.max_frames;
            auto rep = train::denoise_eval(fn, test_ds, cc.eval.snr_grid_db, cell_seed, dopt);
            double acc = 0;
            for (const auto& r : rep.rows) acc += r.ssim_model;
            cell.ssim = acc / static_cast<double>(rep.rows.size());
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.ok = false;
            cell.error = e.what();
        }
    };

    if (threads > 1) {
        std::vector<std::thread> pool;
        for (auto& cell : cells)
            pool.emplace_back([&run_cell, &cell] { run_cell(cell); });
        for (auto& t : pool) t.join();
    } else {
        for (auto& cell : cells) run_cell(cell);
    }

    std::ostringstream csv, txt;
    csv << "hptr,faf,oa,kappa,ssim,seconds_per_batch,status\n";
    txt << "config_hash " << cfg.config_hash() << "\n";
    txt << "HPTR  FAF   OA(%)    Kappa    SSIM     s/batch  status\n";
    for (const auto& c : cells) {
        csv << (c.hptr ? 1 : 0) << "," << (c.faf ? 1 : 0) << ",";
        if (c.ok)
            csv << c.oa << "," << c.kappa << "," << c.ssim << "," << c.seconds_per_batch << ",ok\n";
        else
            csv << ",,,,failed: " << c.error << "\n";
        char line[160];
        if (c.ok)
            std::snprintf(line, sizeof(line), "%-5s %-5s %-8.2f %-8.4f %-8.4f %-8.4f ok\n",
                          c.hptr ? "yes" : "no", c.faf ? "yes" : "no", 100.0 * c.oa, c.kappa,
                          c.ssim, c.seconds_per_batch);
        else
            std::snprintf(line, sizeof(line), "%-5s %-5s %-35s\n", c.hptr ? "yes" : "no",
                          c.faf ? "yes" : "no", ("failed: " + c.error).c_str());
        txt << line;
    }
    write_text(fs::path(out_dir) / "ablation.csv", csv.str());
    write_text(fs::path(out_dir) / "ablation.txt", txt.str());
    std::fputs(txt.str().c_str(), stdout);
    return 0;
}

// --- bench-prompt ------------------------------------------------------------------

inline int cmd_bench_prompt(const RunConfig& cfg, const std::string& out_dir) {
    ensure_dir(out_dir);
    // A small pool of frames drawn from the configured generator.
    signal::GeneratorConfig gen = cfg.data;
    gen.frames_per_cell = std::max(1, cfg.train.batch_size / std::max<int>(1, static_cast<int>(
                                                                 gen.schemes.size() * gen.snr_grid_db.size())) +
                                          1);
    auto pool = signal::make_synthetic_benchmark(gen).train.frames;
    while (pool.size() < static_cast<std::size_t>(cfg.train.batch_size))
        pool.insert(pool.end(), pool.begin(),
                    pool.begin() + static_cast<std::ptrdiff_t>(
                                       std::min(pool.size(), static_cast<std::size_t>(cfg.train.batch_size) - pool.size())));
    std::vector<signal::IQFrame> batch(pool.begin(),
                                       pool.begin() + static_cast<std::ptrdiff_t>(cfg.train.batch_size));

    model::Pipeline<float> pipe(cfg, cfg.data.schemes.size(), cfg.seed);
    const int rounds = std::max(1, cfg.eval.bench_batches);

    std::size_t hardware_lt = 0;
    {
        const auto text = prompt::build_prompt_text(cfg.hptr.dataset_desc, cfg.hptr.task_desc, batch[0]);
        hardware_lt = prompt::tokenize_bytes(text).size();
    }
    if (hardware_lt + cfg.num_patches() > static_cast<std::size_t>(cfg.model.max_tokens))
        throw ConfigError("bench-prompt: model.max_tokens (" + std::to_string(cfg.model.max_tokens) +
                          ") cannot hold the hardware prompt (" + std::to_string(hardware_lt) +
                          " tokens) plus " + std::to_string(cfg.num_patches()) +
                          " signal patches; raise model.max_tokens");

    // Prefixes are fixed under frozen inference parameters, so each arm
    // builds its prefix once and the timed region is the model forward.
    auto time_arm = [&](bool hybrid) {
        nn::NoGradGuard ng;
        auto prefix = hybrid ? pipe.build_prefix(batch, cfg.hptr.task_desc)
                             : pipe.build_hardware_prefix(batch, cfg.hptr.task_desc);
        for (int warm = 0; warm < 3; ++warm) pipe.encode_from_prefix(prefix, batch, false);
        const auto t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < rounds; ++r) pipe.encode_from_prefix(prefix, batch, false);
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() /
               static_cast<double>(rounds);
    };
    const double hybrid_spb = time_arm(true);
    const double hardware_spb = time_arm(false);
    const double rel_pct = 100.0 * (hardware_spb - hybrid_spb) / hardware_spb;

    nlohmann::ordered_json j;
    j["config_hash"] = cfg.config_hash();
    j["batches"] = rounds;
    j["batch_size"] = cfg.train.batch_size;
    j["hybrid_prefix_tokens"] = cfg.hptr.top_k;
    j["hardware_prefix_tokens"] = hardware_lt;
    j["hybrid_seconds_per_batch"] = hybrid_spb;
    j["hardware_seconds_per_batch"] = hardware_spb;
    j["relative_speedup_pct"] = rel_pct;
    write_text(fs::path(out_dir) / "bench_prompt.json", j.dump(2) + "\n");

    std::printf("bench-prompt: hybrid (K=%d) %.5f s/batch | hardware (L_T=%zu) %.5f s/batch | "
                "speedup %+.2f%%\n",
                cfg.hptr.top_k, hybrid_spb, hardware_lt, hardware_spb, rel_pct);
    return 0;
}

// --- plot --------------------------------------------------------------------------

inline int cmd_plot(const std::vector<std::string>& reports, const std::string& out_dir) {
    if (reports.empty()) throw ConfigError("plot: at least one --report required");
    ensure_dir(out_dir);
    int figures = 0;
    for (const auto& rp : reports) {
        std::ifstream is(rp);
        if (!is) throw IoError("plot: cannot open report " + rp);
        nlohmann::json j;
        try {
            is >> j;
        } catch (const std::exception& e) {
            throw IoError("plot: bad report json in " + rp + ": " + e.what());
        }
        const std::string stem = fs::path(rp).stem().string();

        if (j.contains("per_snr_oa")) {
            LineSeries s;
            s.name = "overall accuracy";
            std::ostringstream csv;
            csv << "snr_db,oa\n";
            for (const auto& [key, value] : j.at("per_snr_oa").items()) {
                s.points.emplace_back(std::stod(key), value.get<double>());
                csv << key << "," << value.get<double>() << "\n";
            }
            std::sort(s.points.begin(), s.points.end());
            write_text(fs::path(out_dir) / (stem + "_oa_vs_snr.svg"),
                       svg_line_chart("Accuracy across SNR", "SNR (dB)", "overall accuracy", {s}));
            write_text(fs::path(out_dir) / (stem + "_oa_vs_snr.csv"), csv.str());
            ++figures;
        }
        if (j.contains("confusion")) {
            auto counts = j.at("confusion").get<std::vector<std::vector<std::int64_t>>>();
            auto names = j.value("class_names", std::vector<std::string>{});
            std::ostringstream csv;
            for (std::size_t i = 0; i < counts.size(); ++i) {
                for (std::size_t c = 0; c < counts[i].size(); ++c)
                    csv << counts[i][c] << (c + 1 < counts[i].size() ? "," : "");
                csv << "\n";
            }
            write_text(fs::path(out_dir) / (stem + "_confusion.svg"),
                       svg_heatmap("Confusion matrix", counts, names));
            write_text(fs::path(out_dir) / (stem + "_confusion.csv"), csv.str());
            ++figures;
        }
        if (j.contains("rows")) {
            std::vector<BarGroup> groups;
            std::ostringstream csv;
            csv << "snr_db,ssim_model,ssim_noisy,ssim_sg\n";
            for (const auto& row : j.at("rows")) {
                BarGroup g;
                std::ostringstream lbl;
                lbl << row.at("snr_db").get<double>() << " dB";
                g.label = lbl.str();
                g.values = {row.at("ssim_model").get<double>(), row.at("ssim_noisy").get<double>()};
                csv << row.at("snr_db").get<double>() << "," << row.at("ssim_model").get<double>()
                    << "," << row.at("ssim_noisy").get<double>() << ",";
                if (!row.at("ssim_sg").is_null()) {
                    g.values.push_back(row.at("ssim_sg").get<double>());
                    csv << row.at("ssim_sg").get<double>();
                }
                csv << "\n";
                groups.push_back(std::move(g));
            }
            write_text(fs::path(out_dir) / (stem + "_ssim.svg"),
                       svg_bar_chart("Reconstruction SSIM across SNR", "SSIM",
                                     {"model", "noisy", "sg filter"}, groups));
            write_text(fs::path(out_dir) / (stem + "_ssim.csv"), csv.str());
            ++figures;
        }
    }
    if (figures == 0) throw ConfigError("plot: no recognizable report contents");
    std::printf("plot: wrote %d figure(s) to %s\n", figures, out_dir.c_str());
    return 0;
}

}  // namespace rfml::cli
