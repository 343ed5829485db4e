#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dwa/core.hpp"
#include "dwa/model.hpp"
#include "dwa/rng.hpp"

namespace dwa {

struct TrainConfig {
    double eta0 = 0.001;    // conv layers, decaying
    double alpha = 0.001;   // decay rate
    double eta_fc = 0.0001; // dense layers and batch-norm scale/shift, static
    std::size_t batch_size = 100;
    long iterations = 60000;
    std::uint64_t seed = 1;
    long eval_every = 500;
    int threads = 1;
    bool serial = false;  // deterministic mode: one thread, zeroed wall-clock column

    void validate() const;
};

// eta_t = eta0 / (1 + alpha * t), t counted from 0.
double lr_schedule(long t, double eta0, double alpha);

// Conv parameters follow the decaying schedule at iteration t; dense and
// batch-norm parameters use the static rate. Non-finite gradients abort
// with the offending group named.
void sgd_step(ModelState& model, ModelGrads& grads, long t, const TrainConfig& cfg);

struct MetricsRow {
    long iteration = 0;
    double loss = 0.0;
    double val_acc = 0.0;
    double test_acc = 0.0;
    double seconds = 0.0;
};

std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);

struct TrainResult {
    ModelState model;
    std::vector<MetricsRow> log;
    std::uint64_t rng_seed = 0;
    std::array<std::uint64_t, kNumStreams> rng_counts{};
    long iterations_done = 0;
};

// Seeded init, epoch-wise shuffled batches, forward/backward/step, metrics
// every eval_every iterations (plus the final one). Deterministic for a
// fixed seed regardless of thread count; wall-clock seconds are zeroed in
// serial mode so reruns are byte-identical.
TrainResult train_loop(const TrainConfig& cfg, const ModelGeometry& geom, const Dataset& train,
                       const Dataset& val, const Dataset& test, std::ostream* metrics = nullptr);

struct EvalResult {
    double accuracy = 0.0;
    std::vector<std::vector<long>> confusion;  // row = true class
};

// Argmax-of-softmax classification; ties resolve to the lowest class index.
EvalResult evaluate(ModelState& model, const Dataset& ds, std::size_t batch_size = 64,
                    int threads = 1);

// Binary checkpoint: magic, version, geometry, parameters and running
// statistics as little-endian float32 in declaration order, iteration
// counter, generator state, trailing checksum.
void save_checkpoint(const ModelState& model, long iteration, std::uint64_t rng_seed,
                     const std::array<std::uint64_t, kNumStreams>& rng_counts,
                     const std::string& path);

struct Checkpoint {
    ModelState model;
    long iteration = 0;
    std::uint64_t rng_seed = 0;
    std::array<std::uint64_t, kNumStreams> rng_counts{};
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace dwa
