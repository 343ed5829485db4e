#pragma once

#include <iosfwd>
#include <string>

#include "dwa/config.hpp"
#include "dwa/train.hpp"
#include "dwa/verify.hpp"

namespace dwa {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitOracleFail = 3;

struct PreparedData {
    Dataset train, val, test;
    ModelGeometry geom;
};

// Full pipeline: load or generate, resample to the configured length,
// z-score with training statistics, split. Deterministic per config + seed.
PreparedData prepare_data(const RunConfig& cfg);

struct TrainOutputs {
    double final_test_acc = 0.0;
    std::string metrics_path, checkpoint_path;
    std::vector<MetricsRow> log;
};

// Trains per config, writes <out>/metrics.csv and <out>/model.ckpt, then
// reports the final test accuracy of the reloaded checkpoint so a later
// `eval` of the same file reproduces it exactly.
TrainOutputs run_train(const RunConfig& cfg, std::ostream& out);

struct BenchRow {
    std::string mode;
    double median_ms = 0.0;
    double p95_ms = 0.0;
};

struct BenchResult {
    BenchRow dwa, linear;
    double ratio = 0.0;  // dwa / linear median
};

// Single-sample forward latency at the configured geometry, both conv modes.
BenchResult run_bench(const RunConfig& cfg);

int cmd_train(const RunConfig& cfg, std::ostream& out);
int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path, std::ostream& out);
int cmd_gradcheck(const RunConfig& cfg, std::ostream& out, const FdHooks* hooks = nullptr);
int cmd_dtwcheck(const RunConfig& cfg, std::ostream& out);
int cmd_synth(const RunConfig& cfg, std::ostream& out);
int cmd_bench(const RunConfig& cfg, std::ostream& out);

}  // namespace dwa
