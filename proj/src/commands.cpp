#include "dwa/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>

namespace fs = std::filesystem;

namespace dwa {

namespace {

int resolve_threads(const TrainConfig& cfg) {
    if (cfg.serial) return 1;
    if (cfg.threads > 0) return cfg.threads;
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

void require_path(const std::string& path, const std::string& field) {
    if (path.empty()) throw ConfigError(field, "no path configured");
    if (!fs::exists(path)) throw ConfigError(field, "path does not exist: " + path);
}

// Removes `count` seeded-random patterns into a validation set, keeping the
// remaining training items in their original order.
Dataset carve_validation(Dataset& train, std::size_t count, std::uint64_t seed) {
    Dataset val;
    val.num_classes = train.num_classes;
    val.feature_dim = train.feature_dim;
    val.fixed_length = train.fixed_length;
    if (count == 0) return val;
    if (count >= train.size()) {
        throw ConfigError("dataset.validation_count",
                          "validation_count " + std::to_string(count) +
                              " leaves no training data (pool " + std::to_string(train.size()) +
                              ")");
    }
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order, Stream::Split);
    std::vector<bool> in_val(train.size(), false);
    for (std::size_t i = 0; i < count; ++i) in_val[order[i]] = true;

    Dataset rest;
    rest.num_classes = train.num_classes;
    rest.feature_dim = train.feature_dim;
    rest.fixed_length = train.fixed_length;
    for (std::size_t i = 0; i < train.size(); ++i) {
        (in_val[i] ? val : rest).items.push_back(std::move(train.items[i]));
    }
    train = std::move(rest);
    return val;
}

SynthSpec synth_spec_from(const RunConfig& cfg) {
    SynthSpec spec;
    spec.num_classes = cfg.synth_classes;
    spec.samples_per_class = cfg.synth_train_per_class + cfg.synth_test_per_class;
    spec.length = cfg.resample_len;
    spec.feature_dim = cfg.synth_dims;
    spec.warp_intensity = cfg.synth_warp;
    spec.noise_sigma = cfg.synth_noise;
    spec.seed = cfg.seed;
    return spec;
}

void print_confusion(std::ostream& out, const std::vector<std::vector<long>>& confusion) {
    out << "confusion matrix (rows = true class):\n";
    for (std::size_t r = 0; r < confusion.size(); ++r) {
        out << "  ";
        for (std::size_t c = 0; c < confusion[r].size(); ++c) {
            out << confusion[r][c] << (c + 1 < confusion[r].size() ? ' ' : '\n');
        }
    }
}

}  // namespace

PreparedData prepare_data(const RunConfig& cfg) {
    validate_geometry_early(cfg);
    PreparedData data;

    if (cfg.dataset_kind == "synth") {
        Dataset all = synth_warped(synth_spec_from(cfg));
        // Per-class generation order decides the predefined train/test split.
        Dataset train, test;
        for (Dataset* part : {&train, &test}) {
            part->num_classes = all.num_classes;
            part->feature_dim = all.feature_dim;
            part->fixed_length = all.fixed_length;
        }
        std::size_t per_class = cfg.synth_train_per_class + cfg.synth_test_per_class;
        for (std::size_t i = 0; i < all.size(); ++i) {
            std::size_t idx_in_class = i % per_class;
            (idx_in_class < cfg.synth_train_per_class ? train : test)
                .items.push_back(std::move(all.items[i]));
        }
        data.train = std::move(train);
        data.test = std::move(test);
    } else if (cfg.dataset_kind == "delimited") {
        require_path(cfg.dataset_path, "dataset.path");
        Dataset all = resample(load_delimited_dir(cfg.dataset_path), cfg.resample_len);
        SplitSpec spec{cfg.test_fraction, cfg.validation_count, cfg.seed};
        auto [train, val, test] = split(all, spec);
        data.train = std::move(train);
        data.val = std::move(val);
        data.test = std::move(test);
    } else {  // arabic
        require_path(cfg.dataset_train_path, "dataset.train_path");
        require_path(cfg.dataset_test_path, "dataset.test_path");
        if (cfg.arabic_train_manifest.empty()) {
            throw ConfigError("dataset.train_manifest", "per-class block counts are required");
        }
        auto [train, test] = load_arabic(cfg.dataset_train_path, cfg.dataset_test_path,
                                         cfg.arabic_train_manifest, cfg.arabic_test_manifest);
        data.train = resample(train, cfg.resample_len);
        data.test = resample(test, cfg.resample_len);
    }

    if (data.val.items.empty() && cfg.validation_count > 0 && cfg.dataset_kind != "delimited") {
        data.val = carve_validation(data.train, cfg.validation_count, cfg.seed);
    }

    ZScoreStats stats = zscore_fit(data.train);
    data.train = zscore_apply(data.train, stats);
    data.val = data.val.items.empty() ? data.val : zscore_apply(data.val, stats);
    data.test = zscore_apply(data.test, stats);

    data.geom = cfg.geometry(cfg.resample_len, data.train.feature_dim, data.train.num_classes);
    data.geom.validate();
    return data;
}

TrainOutputs run_train(const RunConfig& cfg, std::ostream& out) {
    PreparedData data = prepare_data(cfg);

    fs::create_directories(cfg.out_dir);
    TrainOutputs result;
    result.metrics_path = (fs::path(cfg.out_dir) / "metrics.csv").string();
    result.checkpoint_path = (fs::path(cfg.out_dir) / "model.ckpt").string();

    TrainConfig train_cfg = cfg.train;
    train_cfg.threads = resolve_threads(cfg.train);

    out << "training " << (data.geom.mode == ConvMode::Dwa ? "dwa" : "linear") << " model: "
        << data.train.size() << " train / " << data.val.size() << " val / " << data.test.size()
        << " test, " << train_cfg.iterations << " iterations, batch " << train_cfg.batch_size
        << ", seed " << train_cfg.seed << "\n";

    std::ofstream metrics(result.metrics_path, std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot write " + result.metrics_path);
    TrainResult trained =
        train_loop(train_cfg, data.geom, data.train, data.val, data.test, &metrics);
    result.log = trained.log;

    save_checkpoint(trained.model, trained.iterations_done, trained.rng_seed, trained.rng_counts,
                    result.checkpoint_path);

    // Report the accuracy of the stored model, so evaluating the checkpoint
    // later reproduces this number bit for bit.
    Checkpoint stored = load_checkpoint(result.checkpoint_path);
    result.final_test_acc =
        evaluate(stored.model, data.test, train_cfg.batch_size, train_cfg.threads).accuracy;

    char acc[40];
    std::snprintf(acc, sizeof acc, "%.6f", result.final_test_acc);
    out << "final_test_accuracy=" << acc << "\n";
    out << "metrics=" << result.metrics_path << "\n";
    out << "checkpoint=" << result.checkpoint_path << "\n";
    return result;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
    run_train(cfg, out);
    return kExitOk;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path, std::ostream& out) {
    require_path(checkpoint_path, "checkpoint");
    Checkpoint ck = load_checkpoint(checkpoint_path);
    PreparedData data = prepare_data(cfg);
    if (!(ck.model.geom == data.geom)) {
        throw ConfigError("checkpoint", "geometry mismatch between checkpoint and dataset: "
                                        "checkpoint wants input " +
                                            std::to_string(ck.model.geom.input_len) + "x" +
                                            std::to_string(ck.model.geom.feature_dim) + ", K=" +
                                            std::to_string(ck.model.geom.num_classes) +
                                            "; dataset provides " +
                                            std::to_string(data.geom.input_len) + "x" +
                                            std::to_string(data.geom.feature_dim) + ", K=" +
                                            std::to_string(data.geom.num_classes));
    }
    EvalResult eval =
        evaluate(ck.model, data.test, cfg.train.batch_size, resolve_threads(cfg.train));
    char acc[40];
    std::snprintf(acc, sizeof acc, "%.6f", eval.accuracy);
    out << "test_accuracy=" << acc << "\n";
    print_confusion(out, eval.confusion);
    return kExitOk;
}

namespace {

// Small enough for finite differences, deep enough to exercise every layer.
ModelGeometry gradcheck_geometry(ConvMode mode) {
    ModelGeometry g;
    g.input_len = 16;
    g.feature_dim = 2;
    g.num_classes = 3;
    g.conv1_filters = 4;
    g.conv1_width = 4;
    g.conv1_stride = 2;
    g.conv2_filters = 4;
    g.conv2_width = 4;
    g.conv2_stride = 2;
    g.fc1_nodes = 16;
    g.fc2_nodes = 8;
    g.mode = mode;
    return g;
}

}  // namespace

int cmd_gradcheck(const RunConfig& cfg, std::ostream& out, const FdHooks* hooks) {
    ModelGeometry geom = gradcheck_geometry(cfg.mode);
    const std::size_t batch = 3;

    double worst = 0.0;
    for (long s = 1; s <= cfg.check_seeds; ++s) {
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(s)));
        ModelState model = init_model(geom, rng);
        std::vector<Matrix> inputs;
        std::vector<int> labels;
        for (std::size_t b = 0; b < batch; ++b) {
            Matrix x(geom.input_len, geom.feature_dim);
            for (std::size_t i = 0; i < x.size(); ++i) {
                x.data()[i] = rng.gaussian(Stream::Synth, 0.0, 1.0);
            }
            inputs.push_back(std::move(x));
            labels.push_back(static_cast<int>(rng.uniform_int(Stream::Synth, geom.num_classes)));
        }
        GradReport report =
            finite_diff_check(model, inputs, labels, cfg.check_h, cfg.check_threshold, true, hooks);
        for (const auto& grp : report.groups) worst = std::max(worst, grp.max_rel);
        if (!report.pass()) {
            out << "gradcheck seed " << s << " FAILED (h=" << cfg.check_h
                << ", threshold=" << cfg.check_threshold << ")\n";
            out << report.to_delimited();
            return kExitOracleFail;
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", worst);
    out << "gradcheck pass: " << cfg.check_seeds << " seeds, mode "
        << (cfg.mode == ConvMode::Dwa ? "dwa" : "linear") << ", max relative error " << buf
        << "\n";
    return kExitOk;
}

int cmd_dtwcheck(const RunConfig& cfg, std::ostream& out) {
    Rng rng(cfg.seed);
    for (std::size_t size = 1; size <= cfg.check_max_size; ++size) {
        for (long trial = 0; trial < cfg.check_trials; ++trial) {
            std::size_t dim = 1 + rng.uniform_int(Stream::Synth, 3);
            Matrix weights(size, dim), window(size, dim);
            for (std::size_t i = 0; i < weights.size(); ++i) {
                weights.data()[i] = rng.uniform(Stream::Synth, -2.0, 2.0);
                window.data()[i] = rng.uniform(Stream::Synth, -2.0, 2.0);
            }
            AlignmentPath path = align(weights, window);
            BruteForceDtw oracle = brute_force_dtw(weights, window);
            bool in_argmin =
                std::find(oracle.argmin.begin(), oracle.argmin.end(), path.matched) !=
                oracle.argmin.end();
            if (path.cost != oracle.cost || !in_argmin ||
                !valid_match_vector(path.matched, size, size) ||
                dtw_distance(weights, window) != oracle.cost) {
                out << "dtwcheck FAILED at size " << size << ", trial " << trial
                    << ": align cost " << path.cost << " vs brute force " << oracle.cost << "\n";
                return kExitOracleFail;
            }
        }
        out << "dtwcheck size " << size << "x" << size << ": " << cfg.check_trials
            << " trials exact\n";
    }
    out << "dtwcheck pass\n";
    return kExitOk;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
    Dataset ds = synth_warped(synth_spec_from(cfg));
    write_delimited_dir(ds, cfg.out_dir);
    out << "wrote " << ds.size() << " samples (" << ds.num_classes << " classes) to "
        << cfg.out_dir << "\n";
    return kExitOk;
}

BenchResult run_bench(const RunConfig& cfg) {
    if (cfg.bench_runs < 1) throw ConfigError("bench.runs", "must be >= 1");

    BenchResult result;
    for (ConvMode mode : {ConvMode::Dwa, ConvMode::Linear}) {
        ModelGeometry geom =
            cfg.geometry(cfg.bench_length, cfg.bench_dim, std::max<std::size_t>(2, 10));
        geom.mode = mode;
        geom.validate();
        Rng rng(cfg.seed);
        ModelState model = init_model(geom, rng);
        Matrix input(geom.input_len, geom.feature_dim);
        for (std::size_t i = 0; i < input.size(); ++i) {
            input.data()[i] = rng.gaussian(Stream::Synth, 0.0, 1.0);
        }
        std::vector<Matrix> batch{input};

        ForwardOptions opts;
        opts.use_batch_stats = false;
        opts.update_running = false;

        for (long w = 0; w < cfg.bench_warmup; ++w) model_forward(batch, model, opts, nullptr);

        std::vector<double> ms(static_cast<std::size_t>(cfg.bench_runs));
        for (double& sample : ms) {
            auto t0 = std::chrono::steady_clock::now();
            model_forward(batch, model, opts, nullptr);
            sample = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               t0)
                         .count();
        }
        std::sort(ms.begin(), ms.end());
        BenchRow row;
        row.mode = mode == ConvMode::Dwa ? "dwa" : "linear";
        row.median_ms = ms[ms.size() / 2];
        row.p95_ms = ms[std::min(ms.size() - 1, static_cast<std::size_t>(
                                                    static_cast<double>(ms.size()) * 0.95))];
        (mode == ConvMode::Dwa ? result.dwa : result.linear) = row;
    }
    result.ratio = result.dwa.median_ms / result.linear.median_ms;
    return result;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out) {
    BenchResult r = run_bench(cfg);
    out << "single-sample forward latency, geometry " << cfg.bench_length << "x" << cfg.bench_dim
        << ", conv " << cfg.conv1_width << "/" << cfg.conv1_stride << ", filters "
        << cfg.conv1_filters << "+" << cfg.conv2_filters << "\n";
    out << "mode\tmedian_ms\tp95_ms\n";
    char buf[128];
    for (const BenchRow* row : {&r.dwa, &r.linear}) {
        std::snprintf(buf, sizeof buf, "%s\t%.3f\t%.3f", row->mode.c_str(), row->median_ms,
                      row->p95_ms);
        out << buf << "\n";
    }
    std::snprintf(buf, sizeof buf, "dwa/linear ratio: %.2fx", r.ratio);
    out << buf << "\n";
    return kExitOk;
}

}  // namespace dwa
