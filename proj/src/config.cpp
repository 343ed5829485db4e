#include "dwa/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace dwa {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

KvConfig KvConfig::parse_string(const std::string& text, const std::string& origin) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string t = trim(line);
        if (t.empty()) continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno),
                              "expected 'key = value', got '" + t + "'");
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno), "empty key");
        }
        cfg.values_[key] = value;
    }
    return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

void KvConfig::merge(const KvConfig& overlay) {
    for (const auto& [k, v] : overlay.values_) values_[k] = v;
}

std::string KvConfig::get_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key, "missing required key");
    return it->second;
}

double KvConfig::get_double(const std::string& key) const {
    std::string v = get_str(key);
    try {
        std::size_t used = 0;
        double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + v + "'");
    }
}

long KvConfig::get_long(const std::string& key) const {
    std::string v = get_str(key);
    try {
        std::size_t used = 0;
        long x = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected an integer, got '" + v + "'");
    }
}

std::uint64_t KvConfig::get_u64(const std::string& key) const {
    std::string v = get_str(key);
    try {
        std::size_t used = 0;
        unsigned long long x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return static_cast<std::uint64_t>(x);
    } catch (const std::exception&) {
        throw ConfigError(key, "expected an unsigned integer, got '" + v + "'");
    }
}

bool KvConfig::get_bool(const std::string& key) const {
    std::string v = get_str(key);
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key, "expected a boolean, got '" + v + "'");
}

std::vector<long> KvConfig::get_long_list(const std::string& key) const {
    std::string v = get_str(key);
    std::replace(v.begin(), v.end(), ',', ' ');
    std::istringstream in(v);
    std::vector<long> out;
    std::string tok;
    while (in >> tok) {
        try {
            std::size_t used = 0;
            out.push_back(std::stol(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError(key, "expected a comma-separated integer list, got '" + tok + "'");
        }
    }
    return out;
}

KvConfig default_config() {
    return KvConfig::parse_string(R"(
dataset.kind = synth
dataset.path =
dataset.train_path =
dataset.test_path =
dataset.train_manifest =
dataset.test_manifest =
dataset.resample_len = 50
dataset.test_fraction = 0.10
dataset.validation_count = 50
dataset.synth.classes = 4
dataset.synth.train_per_class = 200
dataset.synth.test_per_class = 50
dataset.synth.dims = 1
dataset.synth.warp = 2.0
dataset.synth.noise = 0.05
model.conv1.filters = 50
model.conv1.width = 8
model.conv1.stride = 2
model.conv2.filters = 50
model.conv2.width = 8
model.conv2.stride = 2
model.fc1 = 400
model.fc2 = 100
model.mode = dwa
train.eta0 = 0.001
train.alpha = 0.001
train.eta_fc = 0.0001
train.batch = 100
train.iterations = 60000
train.eval_every = 500
train.threads = 0
train.serial = false
out.dir = runs/out
bench.runs = 30
bench.warmup = 5
bench.length = 60
bench.dim = 2
check.seeds = 50
check.h = 1e-5
check.threshold = 1e-4
check.trials = 1000
check.max_size = 8
seed = 1
)",
                                  "<defaults>");
}

KvConfig preset_config(const std::string& name) {
    if (name == "synth") {
        return KvConfig::parse_string(R"(
dataset.kind = synth
dataset.resample_len = 50
model.conv1.filters = 16
model.conv1.width = 8
model.conv1.stride = 2
model.conv2.filters = 16
model.conv2.width = 8
model.conv2.stride = 2
model.fc1 = 64
model.fc2 = 32
train.eta0 = 0.05
train.alpha = 0.001
train.eta_fc = 0.02
train.batch = 20
train.iterations = 1500
train.eval_every = 150
)",
                                      "<preset:synth>");
    }
    if (name == "unipen") {
        return KvConfig::parse_string(R"(
dataset.kind = delimited
dataset.resample_len = 60
model.conv1.filters = 50
model.conv1.width = 8
model.conv1.stride = 2
model.conv2.filters = 50
model.conv2.width = 8
model.conv2.stride = 2
model.fc1 = 400
model.fc2 = 100
train.batch = 100
bench.length = 60
bench.dim = 2
)",
                                      "<preset:unipen>");
    }
    if (name == "arabic") {
        return KvConfig::parse_string(R"(
dataset.kind = arabic
dataset.resample_len = 40
dataset.train_manifest = 660,660,660,660,660,660,660,660,660,660
dataset.test_manifest = 220,220,220,220,220,220,220,220,220,220
model.conv1.filters = 50
model.conv1.width = 6
model.conv1.stride = 2
model.conv2.filters = 50
model.conv2.width = 6
model.conv2.stride = 2
model.fc1 = 400
model.fc2 = 100
train.batch = 50
bench.length = 40
bench.dim = 13
)",
                                      "<preset:arabic>");
    }
    if (name == "adl") {
        return KvConfig::parse_string(R"(
dataset.kind = delimited
dataset.resample_len = 128
model.conv1.filters = 50
model.conv1.width = 12
model.conv1.stride = 4
model.conv2.filters = 50
model.conv2.width = 12
model.conv2.stride = 4
model.fc1 = 400
model.fc2 = 100
train.batch = 5
bench.length = 128
bench.dim = 3
)",
                                      "<preset:adl>");
    }
    throw ConfigError("preset", "unknown preset '" + name + "' (expected synth, unipen, arabic, adl)");
}

std::vector<std::string> preset_names() { return {"synth", "unipen", "arabic", "adl"}; }

namespace {

std::size_t get_size(const KvConfig& kv, const std::string& key) {
    long v = kv.get_long(key);
    if (v < 0) throw ConfigError(key, "must be non-negative");
    return static_cast<std::size_t>(v);
}

std::size_t get_positive(const KvConfig& kv, const std::string& key) {
    long v = kv.get_long(key);
    if (v < 1) throw ConfigError(key, "must be positive");
    return static_cast<std::size_t>(v);
}

}  // namespace

RunConfig materialize(const KvConfig& kv) {
    const KvConfig known = default_config();
    for (const auto& [key, value] : kv.values()) {
        if (!known.has(key)) throw ConfigError(key, "unknown configuration key");
        (void)value;
    }

    KvConfig merged = known;
    merged.merge(kv);

    RunConfig cfg;
    cfg.dataset_kind = merged.get_str("dataset.kind");
    if (cfg.dataset_kind != "synth" && cfg.dataset_kind != "delimited" &&
        cfg.dataset_kind != "arabic") {
        throw ConfigError("dataset.kind", "expected synth, delimited or arabic, got '" +
                                              cfg.dataset_kind + "'");
    }
    cfg.dataset_path = merged.get_str("dataset.path");
    cfg.dataset_train_path = merged.get_str("dataset.train_path");
    cfg.dataset_test_path = merged.get_str("dataset.test_path");
    cfg.arabic_train_manifest = merged.get_long_list("dataset.train_manifest");
    cfg.arabic_test_manifest = merged.get_long_list("dataset.test_manifest");
    cfg.resample_len = get_positive(merged, "dataset.resample_len");
    cfg.test_fraction = merged.get_double("dataset.test_fraction");
    cfg.validation_count = get_size(merged, "dataset.validation_count");
    cfg.synth_classes = get_positive(merged, "dataset.synth.classes");
    cfg.synth_train_per_class = get_positive(merged, "dataset.synth.train_per_class");
    cfg.synth_test_per_class = get_positive(merged, "dataset.synth.test_per_class");
    cfg.synth_dims = get_positive(merged, "dataset.synth.dims");
    cfg.synth_warp = merged.get_double("dataset.synth.warp");
    cfg.synth_noise = merged.get_double("dataset.synth.noise");

    cfg.conv1_filters = get_positive(merged, "model.conv1.filters");
    cfg.conv1_width = get_positive(merged, "model.conv1.width");
    cfg.conv1_stride = get_positive(merged, "model.conv1.stride");
    cfg.conv2_filters = get_positive(merged, "model.conv2.filters");
    cfg.conv2_width = get_positive(merged, "model.conv2.width");
    cfg.conv2_stride = get_positive(merged, "model.conv2.stride");
    cfg.fc1_nodes = get_positive(merged, "model.fc1");
    cfg.fc2_nodes = get_positive(merged, "model.fc2");
    std::string mode = merged.get_str("model.mode");
    if (mode == "dwa") {
        cfg.mode = ConvMode::Dwa;
    } else if (mode == "linear") {
        cfg.mode = ConvMode::Linear;
    } else {
        throw ConfigError("model.mode", "expected dwa or linear, got '" + mode + "'");
    }

    cfg.train.eta0 = merged.get_double("train.eta0");
    cfg.train.alpha = merged.get_double("train.alpha");
    cfg.train.eta_fc = merged.get_double("train.eta_fc");
    cfg.train.batch_size = get_positive(merged, "train.batch");
    cfg.train.iterations = merged.get_long("train.iterations");
    cfg.train.eval_every = merged.get_long("train.eval_every");
    long threads = merged.get_long("train.threads");
    if (threads < 0) throw ConfigError("train.threads", "must be >= 0 (0 = hardware)");
    cfg.train.threads = static_cast<int>(threads);
    cfg.train.serial = merged.get_bool("train.serial");
    cfg.seed = merged.get_u64("seed");
    cfg.train.seed = cfg.seed;

    cfg.out_dir = merged.get_str("out.dir");
    cfg.bench_runs = merged.get_long("bench.runs");
    cfg.bench_warmup = merged.get_long("bench.warmup");
    cfg.bench_length = get_positive(merged, "bench.length");
    cfg.bench_dim = get_positive(merged, "bench.dim");
    cfg.check_seeds = merged.get_long("check.seeds");
    cfg.check_h = merged.get_double("check.h");
    cfg.check_threshold = merged.get_double("check.threshold");
    cfg.check_trials = merged.get_long("check.trials");
    cfg.check_max_size = get_positive(merged, "check.max_size");

    try {
        cfg.train.validate();
    } catch (const std::exception& e) {
        throw ConfigError("train", e.what());
    }
    if (cfg.test_fraction <= 0.0 || cfg.test_fraction >= 1.0) {
        throw ConfigError("dataset.test_fraction", "must be in (0, 1)");
    }
    if (cfg.synth_warp < 1.0) throw ConfigError("dataset.synth.warp", "must be >= 1");
    if (cfg.synth_noise < 0.0) throw ConfigError("dataset.synth.noise", "must be >= 0");
    return cfg;
}

ModelGeometry RunConfig::geometry(std::size_t input_len, std::size_t feature_dim,
                                  std::size_t num_classes) const {
    ModelGeometry g;
    g.input_len = input_len;
    g.feature_dim = feature_dim;
    g.num_classes = num_classes;
    g.conv1_filters = conv1_filters;
    g.conv1_width = conv1_width;
    g.conv1_stride = conv1_stride;
    g.conv2_filters = conv2_filters;
    g.conv2_width = conv2_width;
    g.conv2_stride = conv2_stride;
    g.fc1_nodes = fc1_nodes;
    g.fc2_nodes = fc2_nodes;
    g.mode = mode;
    return g;
}

void validate_geometry_early(const RunConfig& cfg) {
    if (cfg.resample_len < cfg.conv1_width) {
        throw ConfigError("model.conv1.width",
                          "conv1 produces no output: width " + std::to_string(cfg.conv1_width) +
                              " exceeds input length " + std::to_string(cfg.resample_len));
    }
    std::size_t t1 = (cfg.resample_len - cfg.conv1_width) / cfg.conv1_stride + 1;
    if (t1 < cfg.conv2_width) {
        throw ConfigError("model.conv2.width",
                          "conv2 produces no output: width " + std::to_string(cfg.conv2_width) +
                              " exceeds conv1 output length " + std::to_string(t1));
    }
}

}  // namespace dwa
