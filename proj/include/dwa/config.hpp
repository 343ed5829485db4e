#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dwa/data.hpp"
#include "dwa/model.hpp"
#include "dwa/train.hpp"

namespace dwa {

// Validation failure tied to a specific configuration field.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// Flat `key = value` configuration with '#' comments. Later layers override
// earlier ones: defaults < preset < file < command-line flags.
class KvConfig {
public:
    static KvConfig parse_file(const std::string& path);
    static KvConfig parse_string(const std::string& text, const std::string& origin = "<config>");

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void merge(const KvConfig& overlay);
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_str(const std::string& key) const;
    double get_double(const std::string& key) const;
    long get_long(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<long> get_long_list(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

KvConfig default_config();
// Known presets: synth, unipen, arabic, adl.
KvConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

struct RunConfig {
    // dataset
    std::string dataset_kind;  // synth | delimited | arabic
    std::string dataset_path;
    std::string dataset_train_path, dataset_test_path;
    std::vector<long> arabic_train_manifest, arabic_test_manifest;
    std::size_t resample_len = 50;
    double test_fraction = 0.10;
    std::size_t validation_count = 50;
    std::size_t synth_classes = 4, synth_train_per_class = 200, synth_test_per_class = 50;
    std::size_t synth_dims = 1;
    double synth_warp = 2.0, synth_noise = 0.05;

    // model
    std::size_t conv1_filters = 50, conv1_width = 8, conv1_stride = 2;
    std::size_t conv2_filters = 50, conv2_width = 8, conv2_stride = 2;
    std::size_t fc1_nodes = 400, fc2_nodes = 100;
    ConvMode mode = ConvMode::Dwa;

    // train
    TrainConfig train;

    // outputs and checks
    std::string out_dir = "runs/out";
    long bench_runs = 30, bench_warmup = 5;
    std::size_t bench_length = 60, bench_dim = 2;
    long check_seeds = 50;
    double check_h = 1e-5, check_threshold = 1e-4;
    long check_trials = 1000;
    std::size_t check_max_size = 8;
    std::uint64_t seed = 1;

    ModelGeometry geometry(std::size_t input_len, std::size_t feature_dim,
                           std::size_t num_classes) const;
};

// Typed materialization; rejects unknown keys and bad values, naming the key.
RunConfig materialize(const KvConfig& kv);

// Shape checks that need no data: both conv layers must produce output at
// the configured resample length.
void validate_geometry_early(const RunConfig& cfg);

}  // namespace dwa
