#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rfml/common.hpp"
#include "rfml/signal/dataset.hpp"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code;
    std::string output;
};

// Runs the CLI with stdout+stderr captured.
CmdResult run_cli(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / "rfml_cli_out.txt";
    const std::string cmd = std::string(RFML_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream is(out);
    std::stringstream ss;
    ss << is.rdbuf();
    int code = -1;
    if (WIFEXITED(status)) code = WEXITSTATUS(status);
    return {code, ss.str()};
}

fs::path work_dir() {
    static fs::path dir = [] {
        auto d = fs::temp_directory_path() / "rfml_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string micro_config_path() {
    static std::string path = [] {
        nlohmann::ordered_json j;
        j["seed"] = 11;
        j["data"] = {{"schemes", {"BPSK", "QPSK"}}, {"snr_grid_db", {10.0, 18.0}},
                     {"frames_per_cell", 20},       {"length", 32},
                     {"sps", 8},                    {"seed", 5}};
        j["model"] = {{"layers", 1}, {"heads", 2}, {"d_model", 16}, {"ff_mult", 2},
                      {"lora_rank", 2}, {"max_tokens", 512}};
        j["hptr"] = {{"v_prime", 8}, {"top_k", 3}, {"patch_len", 8}, {"stride", 8}, {"heads", 2}};
        j["faf"] = {{"hfe_layers",
                     {{{"out_channels", 8}, {"kernel_size", 7}, {"pool_width", 2}, {"pool_stride", 2}},
                      {{"out_channels", 16}, {"kernel_size", 5}, {"pool_width", 2}, {"pool_stride", 2}},
                      {{"out_channels", 16}, {"kernel_size", 3}, {"pool_width", 2}, {"pool_stride", 2}}}}};
        j["train"] = {{"batch_size", 8}, {"epochs", 2},          {"base_lr", 0.001},
                      {"finetune_epochs", 2}, {"shots", 5},      {"finetune_lr", 0.001}};
        j["eval"] = {{"batch_size", 16}, {"snr_grid_db", {0.0, 6.0}}, {"bench_batches", 5},
                     {"max_frames", 16}};
        auto p = work_dir() / "micro.json";
        std::ofstream os(p);
        os << j.dump(2);
        return p.string();
    }();
    return path;
}

std::uint64_t file_digest(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return rfml::fnv1a(bytes);
}

}  // namespace

TEST(Cli, GenDataWritesSplitsAndManifest) {
    const auto data = work_dir() / "data";
    auto res = run_cli("gen-data --config " + micro_config_path() + " --out " + data.string());
    ASSERT_EQ(res.exit_code, 0) << res.output;
    for (const char* f : {"train.rfds", "val.rfds", "test.rfds", "manifest.json"})
        EXPECT_TRUE(fs::exists(data / f)) << f;

    std::ifstream is(data / "manifest.json");
    nlohmann::json manifest;
    is >> manifest;
    // 2 schemes x 2 SNRs x 20 frames = 80 total, 8:1:1 per cell.
    EXPECT_EQ(manifest["counts"]["train"].get<int>(), 64);
    EXPECT_EQ(manifest["counts"]["val"].get<int>(), 8);
    EXPECT_EQ(manifest["counts"]["test"].get<int>(), 8);
}

TEST(Cli, GenDataDeterministicDigests) {
    const auto a = work_dir() / "data_a";
    const auto b = work_dir() / "data_b";
    ASSERT_EQ(run_cli("gen-data --config " + micro_config_path() + " --out " + a.string()).exit_code, 0);
    ASSERT_EQ(run_cli("gen-data --config " + micro_config_path() + " --out " + b.string()).exit_code, 0);
    EXPECT_EQ(file_digest(a / "train.rfds"), file_digest(b / "train.rfds"));
    EXPECT_EQ(file_digest(a / "manifest.json"), file_digest(b / "manifest.json"));
}

TEST(Cli, InvalidSchemeNamedInError) {
    auto res = run_cli("gen-data --config " + micro_config_path() +
                       " --set data.schemes=[\\\"BPSK\\\",\\\"QAM512\\\"] --out " +
                       (work_dir() / "bad").string());
    EXPECT_EQ(res.exit_code, 2);
    EXPECT_NE(res.output.find("QAM512"), std::string::npos) << res.output;
}

TEST(Cli, UnknownConfigKeyIsFatal) {
    auto res = run_cli("gen-data --config " + micro_config_path() +
                       " --set model.learning_rate=0.1 --out " + (work_dir() / "bad2").string());
    EXPECT_EQ(res.exit_code, 2);
    EXPECT_NE(res.output.find("learning_rate"), std::string::npos) << res.output;
}

TEST(Cli, MissingDataPathExitsThree) {
    auto res = run_cli("pretrain --config " + micro_config_path() + " --data " +
                       (work_dir() / "nope").string() + " --out " + (work_dir() / "p").string());
    EXPECT_EQ(res.exit_code, 3) << res.output;
}

TEST(Cli, MicroEndToEndFlow) {
    const auto data = work_dir() / "flow_data";
    const auto pre = work_dir() / "flow_pre";
    const auto ft = work_dir() / "flow_ft";
    const auto ev = work_dir() / "flow_eval";
    const auto dn = work_dir() / "flow_dn";
    ASSERT_EQ(run_cli("gen-data --config " + micro_config_path() + " --out " + data.string()).exit_code, 0);

    auto pres = run_cli("pretrain --config " + micro_config_path() + " --data " + data.string() +
                        " --out " + pre.string());
    ASSERT_EQ(pres.exit_code, 0) << pres.output;
    EXPECT_TRUE(fs::exists(pre / "checkpoint.rfck"));
    EXPECT_TRUE(fs::exists(pre / "trainlog.csv"));
    EXPECT_TRUE(fs::exists(pre / "trainlog.json"));

    auto fres = run_cli("finetune --config " + micro_config_path() + " --data " + data.string() +
                        " --init " + (pre / "checkpoint.rfck").string() + " --out " + ft.string());
    ASSERT_EQ(fres.exit_code, 0) << fres.output;
    EXPECT_TRUE(fs::exists(ft / "metrics.json"));
    EXPECT_TRUE(fs::exists(ft / "confusion.csv"));

    auto eres = run_cli("eval --config " + micro_config_path() + " --data " + data.string() +
                        " --ckpt " + (ft / "checkpoint.rfck").string() + " --out " + ev.string());
    ASSERT_EQ(eres.exit_code, 0) << eres.output;
    EXPECT_TRUE(fs::exists(ev / "metrics.json"));
    EXPECT_TRUE(fs::exists(ev / "per_snr.csv"));

    auto dres = run_cli("denoise --config " + micro_config_path() + " --data " + data.string() +
                        " --ckpt " + (pre / "checkpoint.rfck").string() + " --out " + dn.string());
    ASSERT_EQ(dres.exit_code, 0) << dres.output;
    EXPECT_TRUE(fs::exists(dn / "denoise.json"));

    // Plot from both report kinds.
    const auto plots = work_dir() / "flow_plots";
    auto plres = run_cli("plot --report " + (ev / "metrics.json").string() + " --report " +
                         (dn / "denoise.json").string() + " --out " + plots.string());
    ASSERT_EQ(plres.exit_code, 0) << plres.output;
    int svg = 0, csv = 0;
    for (const auto& e : fs::directory_iterator(plots)) {
        if (e.path().extension() == ".svg") ++svg;
        if (e.path().extension() == ".csv") ++csv;
    }
    EXPECT_EQ(svg, 3);  // oa-vs-snr + confusion + ssim bars
    EXPECT_EQ(csv, 3);

    // Regenerating plots yields byte-identical CSVs.
    const auto plots2 = work_dir() / "flow_plots2";
    ASSERT_EQ(run_cli("plot --report " + (ev / "metrics.json").string() + " --report " +
                      (dn / "denoise.json").string() + " --out " + plots2.string())
                  .exit_code,
              0);
    for (const auto& e : fs::directory_iterator(plots)) {
        if (e.path().extension() == ".csv")
            EXPECT_EQ(file_digest(e.path()), file_digest(plots2 / e.path().filename()));
    }
}

TEST(Cli, OraclePredictorGivesPerfectAccuracy) {
    const auto data = work_dir() / "oracle_data";
    const auto ev = work_dir() / "oracle_eval";
    ASSERT_EQ(run_cli("gen-data --config " + micro_config_path() + " --out " + data.string()).exit_code, 0);
    auto res = run_cli("eval --config " + micro_config_path() + " --data " + data.string() +
                       " --predictor oracle --out " + ev.string());
    ASSERT_EQ(res.exit_code, 0) << res.output;
    std::ifstream is(ev / "metrics.json");
    nlohmann::json j;
    is >> j;
    EXPECT_DOUBLE_EQ(j["oa"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(j["kappa"].get<double>(), 1.0);
}

TEST(Cli, GeometryMismatchExitsFour) {
    const auto data = work_dir() / "geom_data";
    const auto pre = work_dir() / "geom_pre";
    ASSERT_EQ(run_cli("gen-data --config " + micro_config_path() + " --out " + data.string()).exit_code, 0);
    ASSERT_EQ(run_cli("pretrain --config " + micro_config_path() + " --data " + data.string() +
                      " --out " + pre.string())
                  .exit_code,
              0);
    auto res = run_cli("eval --config " + micro_config_path() +
                       " --set model.d_model=32 --set model.heads=4 --set hptr.heads=4 --data " +
                       data.string() + " --ckpt " + (pre / "checkpoint.rfck").string() + " --out " +
                       (work_dir() / "geom_eval").string());
    EXPECT_EQ(res.exit_code, 4) << res.output;
}

TEST(Cli, NonFiniteLossExitsFive) {
    // A dataset with a pathological sample that overflows the float loss.
    const auto dir = work_dir() / "poison";
    fs::create_directories(dir);
    rfml::signal::GeneratorConfig gen;
    gen.schemes = {"BPSK", "QPSK"};
    gen.snr_grid_db = {10.0};
    gen.frames_per_cell = 10;
    gen.length = 32;
    gen.sps = 8;
    gen.seed = 3;
    auto splits = rfml::signal::make_synthetic_benchmark(gen);
    splits.train.frames[0].i[0] = 1e30;
    rfml::signal::save_dataset(splits.train, (dir / "train.rfds").string());
    rfml::signal::save_dataset(splits.val, (dir / "val.rfds").string());
    auto res = run_cli("pretrain --config " + micro_config_path() + " --data " + dir.string() +
                       " --out " + (work_dir() / "poison_out").string());
    EXPECT_EQ(res.exit_code, 5) << res.output;
    EXPECT_NE(res.output.find("batch"), std::string::npos);
}

TEST(Cli, AblateWritesFourCells) {
    const auto data = work_dir() / "abl_data";
    const auto out = work_dir() / "abl_out";
    ASSERT_EQ(run_cli("gen-data --config " + micro_config_path() + " --out " + data.string()).exit_code, 0);
    auto res = run_cli("ablate --config " + micro_config_path() + " --data " + data.string() +
                       " --threads 2 --out " + out.string());
    ASSERT_EQ(res.exit_code, 0) << res.output;
    std::ifstream is(out / "ablation.csv");
    std::string line;
    int rows = 0;
    std::getline(is, line);
    EXPECT_EQ(line, "hptr,faf,oa,kappa,ssim,seconds_per_batch,status");
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    EXPECT_EQ(rows, 4);
    EXPECT_TRUE(fs::exists(out / "ablation.txt"));
}

TEST(Cli, BenchPromptReportsBothArms) {
    const auto out = work_dir() / "bench_out";
    auto res = run_cli("bench-prompt --config " + micro_config_path() + " --out " + out.string());
    ASSERT_EQ(res.exit_code, 0) << res.output;
    std::ifstream is(out / "bench_prompt.json");
    nlohmann::json j;
    is >> j;
    EXPECT_GT(j["hybrid_seconds_per_batch"].get<double>(), 0.0);
    EXPECT_GT(j["hardware_seconds_per_batch"].get<double>(), 0.0);
    EXPECT_TRUE(j.contains("relative_speedup_pct"));
    EXPECT_GE(j["hardware_prefix_tokens"].get<int>(), 64);
}

TEST(Cli, EqualLengthPromptControlWithinNoise) {
    // K == L_T control: trim the template so the hybrid prefix can match its
    // length, then the two arms do identical forward work.
    const auto out = work_dir() / "bench_ctl";
    const std::string desc = "sig";
    auto res = run_cli("bench-prompt --config " + micro_config_path() +
                       " --set hptr.dataset_desc=" + desc + " --set hptr.task_desc=" + desc +
                       " --set hptr.v_prime=128 --set hptr.top_k=99 --set eval.bench_batches=60" +
                       " --out " + out.string());
    ASSERT_EQ(res.exit_code, 0) << res.output;
    std::ifstream is(out / "bench_prompt.json");
    nlohmann::json j;
    is >> j;
    const double lt = j["hardware_prefix_tokens"].get<double>();
    EXPECT_NEAR(lt, 99.0, 6.0) << "template length drifted; retune top_k";
    EXPECT_LE(std::abs(j["relative_speedup_pct"].get<double>()), 10.0) << j.dump(2);
}
