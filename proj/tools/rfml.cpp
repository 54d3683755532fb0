// Command-line front end: data generation, training, evaluation, ablations,
// prompt benchmarking, and figure emission.
//
// Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 checkpoint
// error, 5 numeric failure.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "rfml/cli/commands.hpp"

namespace {

using rfml::ConfigError;
using rfml::RunConfig;

std::uint64_t parse_u64(const std::string& s, const char* what) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(std::string("invalid ") + what + ": '" + s + "'");
    }
}

// --set section.key=value, value parsed as JSON when possible.
void apply_override(nlohmann::json& j, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set expects section.key=value (got '" + spec + "')");
    const std::string path = spec.substr(0, eq);
    const std::string value = spec.substr(eq + 1);
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const std::exception&) {
        parsed = value;  // plain string
    }
    nlohmann::json* at = &j;
    std::size_t from = 0;
    while (true) {
        const auto dot = path.find('.', from);
        const std::string key = path.substr(from, dot - from);
        if (key.empty()) throw ConfigError("--set has an empty key segment in '" + spec + "'");
        if (dot == std::string::npos) {
            (*at)[key] = parsed;
            break;
        }
        at = &(*at)[key];
        from = dot + 1;
    }
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides,
                      const std::string& seed_flag) {
    nlohmann::json j = nlohmann::json::object();
    if (!path.empty()) {
        std::ifstream is(path);
        if (!is) throw rfml::IoError("cannot open config file: " + path);
        try {
            is >> j;
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config is not valid json: ") + e.what());
        }
    }
    for (const auto& o : overrides) apply_override(j, o);
    auto cfg = RunConfig::from_json(j);
    if (!seed_flag.empty()) {
        cfg.seed = parse_u64(seed_flag, "--seed");
    } else if (const char* env = std::getenv("RFML_SEED")) {
        cfg.seed = parse_u64(env, "RFML_SEED");
    }
    return cfg;
}

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("RFML_THREADS"))
        return static_cast<int>(parse_u64(env, "RFML_THREADS"));
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"radio-signal learning pipeline: synthetic data, training, evaluation, figures"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", seed_flag, init_ckpt, ckpt, predictor;
    std::vector<std::string> overrides, data_dirs, reports;
    int threads_flag = 0;

    auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
        auto* c = cmd->add_option("--config", config_path, "path to the json run configuration");
        if (needs_config) c->required();
        cmd->add_option("--seed", seed_flag, "master seed (overrides config and RFML_SEED)");
        cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
        cmd->add_option("--threads", threads_flag, "worker threads (or RFML_THREADS)");
        cmd->add_option("--set", overrides, "override a config key: section.key=value")
            ->take_all();
    };

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic benchmark splits");
    add_common(gen);

    auto* pre = app.add_subcommand("pretrain", "stage-1 self-supervised pretraining");
    add_common(pre);
    pre->add_option("--data", data_dirs, "dataset directory (repeatable for multi-dataset runs)")
        ->required();

    auto* fin = app.add_subcommand("finetune", "stage-2 few-shot classification");
    add_common(fin);
    fin->add_option("--data", data_dirs, "dataset directory")->required();
    fin->add_option("--init", init_ckpt, "checkpoint to start from");

    auto* den = app.add_subcommand("denoise", "denoising evaluation across the SNR grid");
    add_common(den);
    den->add_option("--data", data_dirs, "dataset directory")->required();
    den->add_option("--ckpt", ckpt, "model checkpoint")->required();

    auto* evl = app.add_subcommand("eval", "classification evaluation");
    add_common(evl);
    evl->add_option("--data", data_dirs, "dataset directory")->required();
    evl->add_option("--ckpt", ckpt, "model checkpoint");
    evl->add_option("--predictor", predictor, "test hook: oracle | constant:<k>");

    auto* abl = app.add_subcommand("ablate", "2x2 module ablation grid");
    add_common(abl);
    abl->add_option("--data", data_dirs, "dataset directory")->required();

    auto* bench = app.add_subcommand("bench-prompt", "hybrid vs hardware prompt latency");
    add_common(bench);

    auto* plt = app.add_subcommand("plot", "emit SVG figures and CSVs from report json files");
    plt->add_option("--report", reports, "metrics/denoise report json (repeatable)")->required();
    plt->add_option("--out", out_dir, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(plt)) return rfml::cli::cmd_plot(reports, out_dir);
        const RunConfig cfg = load_config(config_path, overrides, seed_flag);
        if (app.got_subcommand(gen)) return rfml::cli::cmd_gen_data(cfg, out_dir);
        if (app.got_subcommand(pre)) return rfml::cli::cmd_pretrain(cfg, data_dirs, out_dir);
        if (app.got_subcommand(fin))
            return rfml::cli::cmd_finetune(cfg, data_dirs.front(), out_dir, init_ckpt);
        if (app.got_subcommand(den))
            return rfml::cli::cmd_denoise(cfg, data_dirs.front(), out_dir, ckpt);
        if (app.got_subcommand(evl))
            return rfml::cli::cmd_eval(cfg, data_dirs.front(), out_dir, ckpt, predictor);
        if (app.got_subcommand(abl))
            return rfml::cli::cmd_ablate(cfg, data_dirs.front(), out_dir,
                                         resolve_threads(threads_flag));
        if (app.got_subcommand(bench)) return rfml::cli::cmd_bench_prompt(cfg, out_dir);
        return 2;
    } catch (const rfml::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const rfml::UnsupportedScheme& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const rfml::IncompatibleCheckpoint& e) {
        std::fprintf(stderr, "checkpoint error: %s\n", e.what());
        return 4;
    } catch (const rfml::CorruptCheckpoint& e) {
        std::fprintf(stderr, "checkpoint error: %s\n", e.what());
        return 4;
    } catch (const rfml::NonFiniteLoss& e) {
        std::fprintf(stderr, "numeric failure: %s (batch %lld)\n", e.what(),
                     static_cast<long long>(e.batch_id));
        return 5;
    } catch (const rfml::NonFiniteGradient& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 5;
    } catch (const rfml::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const rfml::UnsupportedFormat& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const rfml::CorruptDataset& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const rfml::SequenceTooLong& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const rfml::InvalidArgument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
