#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dwa/commands.hpp"

using namespace dwa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("dwa_cli_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

RunConfig tiny_synth_config(const std::string& out_dir, std::uint64_t seed = 3) {
    KvConfig kv = preset_config("synth");
    kv.set("dataset.synth.classes", "3");
    kv.set("dataset.synth.train_per_class", "12");
    kv.set("dataset.synth.test_per_class", "4");
    kv.set("dataset.validation_count", "6");
    kv.set("dataset.resample_len", "24");
    kv.set("model.conv1.filters", "4");
    kv.set("model.conv2.filters", "4");
    kv.set("model.conv1.width", "4");
    kv.set("model.conv2.width", "4");
    kv.set("model.fc1", "16");
    kv.set("model.fc2", "8");
    kv.set("train.batch", "6");
    kv.set("train.iterations", "40");
    kv.set("train.eval_every", "20");
    kv.set("train.serial", "true");
    kv.set("out.dir", out_dir);
    kv.set("seed", std::to_string(seed));
    return materialize(kv);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct ProcResult {
    int exit_code = -1;
    std::string output;
};

ProcResult run_binary(const std::string& args) {
    std::string cmd = std::string(DWACNN_BIN) + " " + args + " 2>&1";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    ProcResult r;
    std::array<char, 512> buf;
    while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
    int status = ::pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

}  // namespace

TEST_CASE("prepare_data assembles the synth pipeline") {
    TempDir dir("prep");
    RunConfig cfg = tiny_synth_config((dir.path / "out").string());
    PreparedData data = prepare_data(cfg);
    CHECK(data.train.size() == 3 * 12 - 6);
    CHECK(data.val.size() == 6);
    CHECK(data.test.size() == 3 * 4);
    CHECK(data.geom.input_len == 24);
    CHECK(data.geom.num_classes == 3);
    CHECK(data.geom.feature_dim == 1);

    PreparedData again = prepare_data(cfg);
    for (std::size_t i = 0; i < data.train.size(); ++i) {
        CHECK(data.train.items[i].values == again.train.items[i].values);
    }
}

TEST_CASE("missing dataset path is a config error naming the field") {
    TempDir dir("missing");
    KvConfig kv;
    kv.set("dataset.kind", "delimited");
    kv.set("dataset.path", (dir.path / "nowhere").string());
    RunConfig cfg = materialize(kv);
    try {
        prepare_data(cfg);
        FAIL("expected throw");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "dataset.path");
    }
}

TEST_CASE("train, metrics file, checkpoint, then eval reproduces the number") {
    TempDir dir("train");
    RunConfig cfg = tiny_synth_config((dir.path / "run").string());
    std::ostringstream train_out;
    TrainOutputs outputs = run_train(cfg, train_out);

    CHECK(fs::exists(outputs.metrics_path));
    CHECK(fs::exists(outputs.checkpoint_path));
    CHECK(outputs.log.size() == 2);  // iterations 20 and 40

    std::string metrics = slurp(outputs.metrics_path);
    CHECK(metrics.find("iteration,loss,val_acc,test_acc,seconds") == 0);
    int rows = 0;
    for (char c : metrics) rows += c == '\n';
    CHECK(rows == 3);  // header + 2 eval rows

    std::ostringstream eval_out;
    int code = cmd_eval(cfg, outputs.checkpoint_path, eval_out);
    CHECK(code == kExitOk);
    char expected[64];
    std::snprintf(expected, sizeof expected, "test_accuracy=%.6f", outputs.final_test_acc);
    CHECK(eval_out.str().find(expected) != std::string::npos);
    CHECK(eval_out.str().find("confusion") != std::string::npos);
}

TEST_CASE("eval rejects a geometry mismatch") {
    TempDir dir("geom");
    RunConfig cfg = tiny_synth_config((dir.path / "run").string());
    std::ostringstream out;
    TrainOutputs outputs = run_train(cfg, out);

    RunConfig other = cfg;
    other.synth_classes = 4;  // K changes, checkpoint no longer matches
    try {
        cmd_eval(other, outputs.checkpoint_path, out);
        FAIL("expected throw");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("geometry mismatch") != std::string::npos);
    }
}

TEST_CASE("linear mode runs the identical pipeline") {
    TempDir dir("linear");
    RunConfig cfg = tiny_synth_config((dir.path / "run").string());
    cfg.mode = ConvMode::Linear;
    std::ostringstream out;
    TrainOutputs outputs = run_train(cfg, out);
    CHECK(outputs.log.size() == 2);
    CHECK(out.str().find("linear") != std::string::npos);
}

TEST_CASE("serial reruns are byte identical") {
    TempDir dir("det");
    RunConfig a = tiny_synth_config((dir.path / "a").string(), 17);
    RunConfig b = tiny_synth_config((dir.path / "b").string(), 17);
    std::ostringstream out;
    TrainOutputs ra = run_train(a, out);
    TrainOutputs rb = run_train(b, out);
    CHECK(slurp(ra.metrics_path) == slurp(rb.metrics_path));
    CHECK(slurp(ra.checkpoint_path) == slurp(rb.checkpoint_path));
}

TEST_CASE("gradcheck command") {
    TempDir dir("grad");
    RunConfig cfg = tiny_synth_config((dir.path / "g").string());
    cfg.check_seeds = 3;
    std::ostringstream out;
    CHECK(cmd_gradcheck(cfg, out) == kExitOk);
    CHECK(out.str().find("gradcheck pass") != std::string::npos);

    cfg.mode = ConvMode::Linear;
    std::ostringstream out2;
    CHECK(cmd_gradcheck(cfg, out2) == kExitOk);

    FdHooks hooks;
    hooks.mutate_grads = [](ModelGrads& g) {
        for (double& v : g.fc1.bias) v += 0.05;
    };
    std::ostringstream out3;
    CHECK(cmd_gradcheck(cfg, out3, &hooks) == kExitOracleFail);
    CHECK(out3.str().find("FAIL") != std::string::npos);
}

TEST_CASE("dtwcheck command") {
    TempDir dir("dtw");
    RunConfig cfg = tiny_synth_config((dir.path / "d").string());
    cfg.check_trials = 25;
    cfg.check_max_size = 6;
    std::ostringstream out;
    CHECK(cmd_dtwcheck(cfg, out) == kExitOk);
    CHECK(out.str().find("dtwcheck pass") != std::string::npos);
}

TEST_CASE("synth command round trips") {
    TempDir dir("synth");
    RunConfig cfg = tiny_synth_config((dir.path / "ds").string());
    std::ostringstream out;
    CHECK(cmd_synth(cfg, out) == kExitOk);
    Dataset loaded = load_delimited_dir((dir.path / "ds").string());
    CHECK(loaded.num_classes == 3);
    CHECK(loaded.size() == 3 * 16);  // train + test per class

    // Determinism: a second run writes identical files.
    TempDir dir2("synth2");
    RunConfig cfg2 = tiny_synth_config((dir2.path / "ds").string());
    std::ostringstream out2;
    CHECK(cmd_synth(cfg2, out2) == kExitOk);
    Dataset loaded2 = load_delimited_dir((dir2.path / "ds").string());
    REQUIRE(loaded2.size() == loaded.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded.items[i].values == loaded2.items[i].values);
    }
}

TEST_CASE("bench reports both modes with a sane ratio") {
    TempDir dir("bench");
    RunConfig cfg = tiny_synth_config((dir.path / "b").string());
    cfg.bench_runs = 5;
    cfg.bench_warmup = 1;
    cfg.bench_length = 24;
    cfg.bench_dim = 1;
    BenchResult r = run_bench(cfg);
    CHECK(r.dwa.median_ms > 0.0);
    CHECK(r.linear.median_ms > 0.0);
    CHECK(r.ratio > 1.0);
    std::ostringstream out;
    CHECK(cmd_bench(cfg, out) == kExitOk);
    CHECK(out.str().find("dwa/linear ratio") != std::string::npos);
}

TEST_CASE("binary: help and exit codes") {
    ProcResult help = run_binary("--help");
    CHECK(help.exit_code == 0);
    CHECK(help.output.find("train") != std::string::npos);

    ProcResult missing = run_binary("train --dataset.kind delimited --dataset.path /nonexistent");
    CHECK(missing.exit_code == kExitConfig);
    CHECK(missing.output.find("dataset.path") != std::string::npos);

    ProcResult unknown = run_binary("train --no.such.key 1");
    CHECK(unknown.exit_code == kExitConfig);

    TempDir dir("badckpt");
    std::ofstream garbage(dir.path / "bad.ckpt", std::ios::binary);
    garbage << "not a checkpoint";
    garbage.close();
    ProcResult corrupt = run_binary("eval --checkpoint " + (dir.path / "bad.ckpt").string() +
                                    " --dataset.kind synth");
    CHECK(corrupt.exit_code == kExitRuntime);

    ProcResult dtw = run_binary("dtwcheck --check.trials 10 --check.max_size 4");
    CHECK(dtw.exit_code == 0);
    CHECK(dtw.output.find("dtwcheck pass") != std::string::npos);
}

TEST_CASE("binary: end-to-end train and eval") {
    TempDir dir("bin");
    std::string out_dir = (dir.path / "run").string();
    std::string common =
        "-p synth --dataset.synth.classes 2 --dataset.synth.train_per_class 8 "
        "--dataset.synth.test_per_class 3 --dataset.validation_count 4 "
        "--dataset.resample_len 20 --model.conv1.filters 3 --model.conv2.filters 3 "
        "--model.conv1.width 4 --model.conv2.width 4 --model.fc1 12 --model.fc2 6 "
        "--train.batch 4 --train.iterations 10 --train.eval_every 5 --serial "
        "--seed 5 -o " + out_dir;
    ProcResult train = run_binary("train " + common);
    INFO(train.output);
    CHECK(train.exit_code == 0);
    CHECK(train.output.find("final_test_accuracy=") != std::string::npos);

    ProcResult eval = run_binary("eval --checkpoint " + out_dir + "/model.ckpt " + common);
    INFO(eval.output);
    CHECK(eval.exit_code == 0);

    std::size_t at = train.output.find("final_test_accuracy=");
    std::string acc = train.output.substr(at, std::string("final_test_accuracy=0.000000").size());
    CHECK(eval.output.find("test_accuracy=" + acc.substr(std::string("final_test_accuracy=").size())) !=
          std::string::npos);
}
