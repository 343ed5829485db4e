#include "dwa/train.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace dwa {

void TrainConfig::validate() const {
    if (eta0 <= 0.0) throw std::invalid_argument("train config: eta0 must be positive");
    if (alpha < 0.0) throw std::invalid_argument("train config: alpha must be non-negative");
    if (eta_fc <= 0.0) throw std::invalid_argument("train config: eta_fc must be positive");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (iterations < 1) throw std::invalid_argument("train config: iterations must be >= 1");
    if (eval_every < 1) throw std::invalid_argument("train config: eval_every must be >= 1");
}

double lr_schedule(long t, double eta0, double alpha) {
    return eta0 / (1.0 + alpha * static_cast<double>(t));
}

void sgd_step(ModelState& model, ModelGrads& grads, long t, const TrainConfig& cfg) {
    const double eta_conv = lr_schedule(t, cfg.eta0, cfg.alpha);
    std::vector<ParamGroup> params = param_groups(model);
    std::vector<ParamGroup> gradient = grad_groups(grads);
    for (std::size_t gi = 0; gi < params.size(); ++gi) {
        const double rate = params[gi].conv_rate ? eta_conv : cfg.eta_fc;
        for (std::size_t k = 0; k < params[gi].values.size(); ++k) {
            double g = *gradient[gi].values[k];
            if (!std::isfinite(g)) {
                throw std::runtime_error("training diverged: non-finite gradient in " +
                                         params[gi].name);
            }
            *params[gi].values[k] -= rate * g;
        }
    }
}

std::string metrics_header() { return "iteration,loss,val_acc,test_acc,seconds"; }

std::string format_metrics_row(const MetricsRow& row) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g,%.9g,%.3f", row.iteration, row.loss,
                  row.val_acc, row.test_acc, row.seconds);
    return buf;
}

namespace {

std::vector<Matrix> gather_batch(const Dataset& ds, std::size_t& pos, std::size_t count,
                                 Rng& rng, std::vector<std::size_t>& shuffled,
                                 std::vector<int>& labels_out) {
    std::vector<Matrix> batch;
    batch.reserve(count);
    labels_out.clear();
    for (std::size_t k = 0; k < count; ++k) {
        if (pos == shuffled.size()) {
            rng.shuffle(shuffled, Stream::Shuffle);
            pos = 0;
        }
        const Series& s = ds.items[shuffled[pos++]];
        batch.push_back(s.values);
        labels_out.push_back(*s.label);
    }
    return batch;
}

}  // namespace

TrainResult train_loop(const TrainConfig& cfg, const ModelGeometry& geom, const Dataset& train,
                       const Dataset& val, const Dataset& test, std::ostream* metrics) {
    cfg.validate();
    geom.validate();
    if (train.items.empty()) throw std::invalid_argument("train_loop: empty training set");
    train.validate(true);
    for (const Dataset* ds : {&train, &val, &test}) {
        for (const Series& s : ds->items) {
            if (s.length() != geom.input_len || s.dim() != geom.feature_dim) {
                throw std::invalid_argument("train_loop: series " + s.id + " is " +
                                            s.values.shape_str() + ", geometry wants " +
                                            std::to_string(geom.input_len) + "x" +
                                            std::to_string(geom.feature_dim));
            }
        }
    }

    const int threads = cfg.serial ? 1 : std::max(1, cfg.threads);
    Rng rng(cfg.seed);
    TrainResult result;
    result.model = init_model(geom, rng);
    result.rng_seed = cfg.seed;

    std::vector<std::size_t> shuffled(train.size());
    for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled[i] = i;
    std::size_t pos = shuffled.size();  // forces a shuffle before the first batch

    if (metrics) *metrics << metrics_header() << '\n';
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<int> labels;
    for (long iter = 1; iter <= cfg.iterations; ++iter) {
        std::vector<Matrix> batch = gather_batch(train, pos, cfg.batch_size, rng, shuffled, labels);

        ForwardOptions opts;
        opts.use_batch_stats = true;
        opts.update_running = true;
        opts.threads = threads;
        ModelTrace trace;
        double loss = 0.0;
        try {
            model_forward(batch, result.model, opts, &trace);
            ModelGrads grads =
                model_backward(batch, result.model, trace, labels, &loss, threads);
            if (!std::isfinite(loss)) {
                throw std::runtime_error("training diverged: non-finite loss");
            }
            sgd_step(result.model, grads, iter - 1, cfg);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("iteration " + std::to_string(iter) + ": " + e.what());
        }

        if (iter % cfg.eval_every == 0 || iter == cfg.iterations) {
            MetricsRow row;
            row.iteration = iter;
            row.loss = loss;
            row.val_acc = val.items.empty()
                              ? std::nan("")
                              : evaluate(result.model, val, cfg.batch_size, threads).accuracy;
            row.test_acc = evaluate(result.model, test, cfg.batch_size, threads).accuracy;
            row.seconds =
                cfg.serial ? 0.0
                           : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                 .count();
            if (metrics) {
                *metrics << format_metrics_row(row) << '\n';
                metrics->flush();
            }
            result.log.push_back(row);
        }
    }

    result.iterations_done = cfg.iterations;
    for (int k = 0; k < kNumStreams; ++k) {
        result.rng_counts[static_cast<std::size_t>(k)] = rng.draws(static_cast<Stream>(k));
    }
    return result;
}

EvalResult evaluate(ModelState& model, const Dataset& ds, std::size_t batch_size, int threads) {
    if (ds.items.empty()) throw std::invalid_argument("evaluate: empty dataset");
    const std::size_t k = model.geom.num_classes;
    EvalResult result;
    result.confusion.assign(k, std::vector<long>(k, 0));

    long correct = 0;
    ForwardOptions opts;
    opts.use_batch_stats = false;
    opts.update_running = false;
    opts.threads = threads;

    std::size_t i = 0;
    while (i < ds.size()) {
        std::size_t count = std::min(batch_size, ds.size() - i);
        std::vector<Matrix> batch;
        std::vector<int> labels;
        batch.reserve(count);
        for (std::size_t b = 0; b < count; ++b) {
            const Series& s = ds.items[i + b];
            if (!s.label) throw std::invalid_argument("evaluate: unlabeled series " + s.id);
            batch.push_back(s.values);
            labels.push_back(*s.label);
        }
        Matrix logits = model_forward(batch, model, opts, nullptr);
        for (std::size_t b = 0; b < count; ++b) {
            std::size_t pred = 0;
            for (std::size_t c = 1; c < k; ++c) {
                if (logits(b, c) > logits(b, pred)) pred = c;
            }
            result.confusion[static_cast<std::size_t>(labels[b])][pred] += 1;
            if (pred == static_cast<std::size_t>(labels[b])) ++correct;
        }
        i += count;
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoint format
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'D', 'W', 'A', 'C', 'N', 'N', '0', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = kFnvOffset;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, double v) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

struct Reader {
    const std::string& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > bytes.size()) throw std::runtime_error("checkpoint: truncated file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(
            static_cast<unsigned char>(bytes[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(
            static_cast<unsigned char>(bytes[pos++])) << (8 * i);
        return v;
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
};

std::vector<double*> running_stat_ptrs(ModelState& m) {
    std::vector<double*> ptrs;
    for (auto* v : {&m.bn1.running_mean, &m.bn1.running_var, &m.bn2.running_mean,
                    &m.bn2.running_var}) {
        for (double& x : *v) ptrs.push_back(&x);
    }
    return ptrs;
}

}  // namespace

void save_checkpoint(const ModelState& model, long iteration, std::uint64_t rng_seed,
                     const std::array<std::uint64_t, kNumStreams>& rng_counts,
                     const std::string& path) {
    std::string out;
    out.append(kMagic, sizeof kMagic);
    put_u32(out, kVersion);

    const ModelGeometry& g = model.geom;
    for (std::size_t v : {g.input_len, g.feature_dim, g.num_classes, g.conv1_filters,
                          g.conv1_width, g.conv1_stride, g.conv2_filters, g.conv2_width,
                          g.conv2_stride, g.fc1_nodes, g.fc2_nodes}) {
        put_u64(out, v);
    }
    out.push_back(g.mode == ConvMode::Dwa ? 1 : 0);
    put_f32(out, model.bn1.eps);
    put_f32(out, model.bn1.momentum);
    put_f32(out, model.bn2.eps);
    put_f32(out, model.bn2.momentum);
    out.push_back(model.bn1.initialized ? 1 : 0);
    out.push_back(model.bn2.initialized ? 1 : 0);

    ModelState& mutable_model = const_cast<ModelState&>(model);
    std::vector<ParamGroup> groups = param_groups(mutable_model);
    std::size_t total = 0;
    for (const auto& grp : groups) total += grp.values.size();
    put_u64(out, total);
    for (const auto& grp : groups) {
        for (const double* p : grp.values) put_f32(out, *p);
    }

    std::vector<double*> stats = running_stat_ptrs(mutable_model);
    put_u64(out, stats.size());
    for (const double* p : stats) put_f32(out, *p);

    put_u64(out, static_cast<std::uint64_t>(iteration));
    put_u64(out, rng_seed);
    for (std::uint64_t c : rng_counts) put_u64(out, c);

    put_u64(out, fnv1a(out));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (bytes.size() < sizeof kMagic + 12) throw std::runtime_error("checkpoint: truncated file");
    if (bytes.compare(0, sizeof kMagic, kMagic, sizeof kMagic) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    std::uint64_t stored_sum = 0;
    {
        Reader tail{bytes, bytes.size() - 8};
        stored_sum = tail.u64();
    }
    std::string body = bytes.substr(0, bytes.size() - 8);
    if (fnv1a(body) != stored_sum) {
        throw std::runtime_error("checkpoint: checksum failure in " + path);
    }

    Reader r{bytes, sizeof kMagic};
    std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }

    ModelGeometry g;
    g.input_len = r.u64();
    g.feature_dim = r.u64();
    g.num_classes = r.u64();
    g.conv1_filters = r.u64();
    g.conv1_width = r.u64();
    g.conv1_stride = r.u64();
    g.conv2_filters = r.u64();
    g.conv2_width = r.u64();
    g.conv2_stride = r.u64();
    g.fc1_nodes = r.u64();
    g.fc2_nodes = r.u64();
    r.need(1);
    g.mode = bytes[r.pos++] ? ConvMode::Dwa : ConvMode::Linear;

    Checkpoint ck;
    ck.model = make_model_shell(g);
    ck.model.bn1.eps = r.f32();
    ck.model.bn1.momentum = r.f32();
    ck.model.bn2.eps = r.f32();
    ck.model.bn2.momentum = r.f32();
    r.need(2);
    ck.model.bn1.initialized = bytes[r.pos++] != 0;
    ck.model.bn2.initialized = bytes[r.pos++] != 0;

    std::vector<ParamGroup> groups = param_groups(ck.model);
    std::size_t total = 0;
    for (const auto& grp : groups) total += grp.values.size();
    if (r.u64() != total) throw std::runtime_error("checkpoint: parameter count mismatch");
    for (auto& grp : groups) {
        for (double* p : grp.values) *p = r.f32();
    }

    std::vector<double*> stats = running_stat_ptrs(ck.model);
    if (r.u64() != stats.size()) throw std::runtime_error("checkpoint: stats count mismatch");
    for (double* p : stats) *p = r.f32();

    ck.iteration = static_cast<long>(r.u64());
    ck.rng_seed = r.u64();
    for (auto& c : ck.rng_counts) c = r.u64();
    return ck;
}

}  // namespace dwa
