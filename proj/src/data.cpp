#include "dwa/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dwa/rng.hpp"

namespace fs = std::filesystem;

namespace dwa {

namespace {

constexpr std::size_t kArabicDim = 13;

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<double> parse_numbers(const std::string& line, const std::string& where) {
    std::string cleaned = line;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::istringstream is(cleaned);
    std::vector<double> row;
    std::string tok;
    while (is >> tok) {
        try {
            std::size_t used = 0;
            double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            row.push_back(v);
        } catch (const std::exception&) {
            throw std::invalid_argument(where + ": not a number: '" + tok + "'");
        }
        if (!std::isfinite(row.back())) {
            throw std::invalid_argument(where + ": non-finite value '" + tok + "'");
        }
    }
    return row;
}

std::vector<Matrix> parse_blocks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::vector<Matrix> blocks;
    std::vector<std::vector<double>> rows;
    auto close_block = [&]() {
        if (rows.empty()) return;
        Matrix m(rows.size(), kArabicDim);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t c = 0; c < kArabicDim; ++c) m(r, c) = rows[r][c];
        }
        blocks.push_back(std::move(m));
        rows.clear();
    };

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) {
            close_block();
            continue;
        }
        std::vector<double> row = parse_numbers(t, path + ":" + std::to_string(lineno));
        if (row.size() != kArabicDim) {
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected " +
                                        std::to_string(kArabicDim) + " values, got " +
                                        std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    close_block();
    if (blocks.empty()) throw std::invalid_argument(path + ": no blocks (empty file)");
    return blocks;
}

Dataset label_blocks(std::vector<Matrix> blocks, const std::vector<long>& manifest,
                     const std::string& path) {
    long total = std::accumulate(manifest.begin(), manifest.end(), 0L);
    if (total != static_cast<long>(blocks.size())) {
        throw std::invalid_argument(path + ": manifest mismatch, file has " +
                                    std::to_string(blocks.size()) + " blocks, manifest sums to " +
                                    std::to_string(total));
    }
    Dataset ds;
    ds.num_classes = manifest.size();
    ds.feature_dim = kArabicDim;
    std::size_t idx = 0;
    for (std::size_t cls = 0; cls < manifest.size(); ++cls) {
        if (manifest[cls] <= 0) {
            throw std::invalid_argument(path + ": manifest count for class " +
                                        std::to_string(cls) + " must be positive");
        }
        for (long k = 0; k < manifest[cls]; ++k, ++idx) {
            ds.items.push_back(make_series(std::move(blocks[idx]), static_cast<int>(cls),
                                           path + "#" + std::to_string(idx)));
        }
    }
    return ds;
}

}  // namespace

std::pair<Dataset, Dataset> load_arabic(const std::string& train_path,
                                        const std::string& test_path,
                                        const std::vector<long>& train_manifest,
                                        const std::vector<long>& test_manifest) {
    if (train_manifest.empty() || train_manifest.size() != test_manifest.size()) {
        throw std::invalid_argument("load_arabic: manifests must be non-empty and equal-sized");
    }
    Dataset train = label_blocks(parse_blocks(train_path), train_manifest, train_path);
    Dataset test = label_blocks(parse_blocks(test_path), test_manifest, test_path);
    train.validate(true);
    test.validate(false);
    return {std::move(train), std::move(test)};
}

Dataset load_delimited_dir(const std::string& root) {
    if (!fs::is_directory(root)) {
        throw std::runtime_error("load_delimited_dir: not a directory: " + root);
    }
    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) class_dirs.push_back(entry.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
    if (class_dirs.empty()) {
        throw std::invalid_argument("load_delimited_dir: no class directories under " + root);
    }

    Dataset ds;
    ds.num_classes = class_dirs.size();
    for (std::size_t cls = 0; cls < class_dirs.size(); ++cls) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(class_dirs[cls])) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) {
            throw std::invalid_argument("load_delimited_dir: empty class directory " +
                                        class_dirs[cls].string());
        }
        for (const fs::path& file : files) {
            std::ifstream in(file);
            if (!in) throw std::runtime_error("cannot open " + file.string());
            std::vector<std::vector<double>> rows;
            std::string line;
            std::size_t lineno = 0;
            while (std::getline(in, line)) {
                ++lineno;
                std::string t = trim(line);
                if (t.empty()) continue;
                std::vector<double> row =
                    parse_numbers(t, file.string() + ":" + std::to_string(lineno));
                if (!rows.empty() && row.size() != rows[0].size()) {
                    throw std::invalid_argument(file.string() + ":" + std::to_string(lineno) +
                                                ": inconsistent column count " +
                                                std::to_string(row.size()) + " vs " +
                                                std::to_string(rows[0].size()));
                }
                rows.push_back(std::move(row));
            }
            if (rows.empty()) {
                throw std::invalid_argument(file.string() + ": empty sample file");
            }
            if (ds.feature_dim == 0) {
                ds.feature_dim = rows[0].size();
            } else if (rows[0].size() != ds.feature_dim) {
                throw std::invalid_argument(file.string() + ": feature dim " +
                                            std::to_string(rows[0].size()) +
                                            " differs from dataset dim " +
                                            std::to_string(ds.feature_dim));
            }
            Matrix m(rows.size(), ds.feature_dim);
            for (std::size_t r = 0; r < rows.size(); ++r) {
                for (std::size_t c = 0; c < ds.feature_dim; ++c) m(r, c) = rows[r][c];
            }
            ds.items.push_back(make_series(std::move(m), static_cast<int>(cls), file.string()));
        }
    }
    ds.validate(true);
    return ds;
}

void write_delimited_dir(const Dataset& ds, const std::string& root) {
    int width = ds.num_classes > 10 ? 2 : 1;
    std::vector<std::size_t> counter(ds.num_classes, 0);
    fs::create_directories(root);
    for (const Series& s : ds.items) {
        if (!s.label) throw std::invalid_argument("write_delimited_dir: unlabeled series");
        char cls_name[32];
        std::snprintf(cls_name, sizeof cls_name, "class_%0*d", width, *s.label);
        fs::path dir = fs::path(root) / cls_name;
        fs::create_directories(dir);
        char file_name[32];
        std::snprintf(file_name, sizeof file_name, "sample_%05zu.csv",
                      counter[static_cast<std::size_t>(*s.label)]++);
        std::ofstream out(dir / file_name);
        if (!out) throw std::runtime_error("cannot write " + (dir / file_name).string());
        char buf[40];
        for (std::size_t r = 0; r < s.length(); ++r) {
            for (std::size_t c = 0; c < s.dim(); ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", s.values(r, c));
                out << (c ? "," : "") << buf;
            }
            out << '\n';
        }
    }
}

Series resample(const Series& s, std::size_t length) {
    if (length < 2) throw std::invalid_argument("resample: target length must be >= 2");
    const std::size_t t = s.length();
    if (t == length) return s;

    Matrix out(length, s.dim());
    if (t == 1) {
        for (std::size_t k = 0; k < length; ++k) {
            for (std::size_t d = 0; d < s.dim(); ++d) out(k, d) = s.values(0, d);
        }
    } else {
        // Multiply before dividing so the endpoints land exactly.
        for (std::size_t k = 0; k < length; ++k) {
            double pos = static_cast<double>(k * (t - 1)) / static_cast<double>(length - 1);
            std::size_t i0 = std::min(static_cast<std::size_t>(pos), t - 2);
            double frac = pos - static_cast<double>(i0);
            for (std::size_t d = 0; d < s.dim(); ++d) {
                out(k, d) = (1.0 - frac) * s.values(i0, d) + frac * s.values(i0 + 1, d);
            }
        }
    }
    return Series{std::move(out), s.label, s.id};
}

Dataset resample(const Dataset& ds, std::size_t length) {
    Dataset out;
    out.num_classes = ds.num_classes;
    out.feature_dim = ds.feature_dim;
    out.fixed_length = length;
    out.items.reserve(ds.size());
    for (const Series& s : ds.items) out.items.push_back(resample(s, length));
    return out;
}

ZScoreStats zscore_fit(const Dataset& train) {
    if (train.items.empty()) throw std::invalid_argument("zscore: empty dataset");
    const std::size_t dim = train.feature_dim;
    ZScoreStats stats;
    stats.mean.assign(dim, 0.0);
    stats.stddev.assign(dim, 0.0);

    std::size_t count = 0;
    for (const Series& s : train.items) {
        count += s.length();
        for (std::size_t r = 0; r < s.length(); ++r) {
            for (std::size_t d = 0; d < dim; ++d) stats.mean[d] += s.values(r, d);
        }
    }
    for (std::size_t d = 0; d < dim; ++d) stats.mean[d] /= static_cast<double>(count);
    for (const Series& s : train.items) {
        for (std::size_t r = 0; r < s.length(); ++r) {
            for (std::size_t d = 0; d < dim; ++d) {
                double diff = s.values(r, d) - stats.mean[d];
                stats.stddev[d] += diff * diff;
            }
        }
    }
    for (std::size_t d = 0; d < dim; ++d) {
        stats.stddev[d] = std::sqrt(stats.stddev[d] / static_cast<double>(count));
    }
    return stats;
}

namespace {

// Constant dimensions stay untouched; the tolerance is relative to the mean
// so rounding residue in the deviation does not blow them up.
bool is_degenerate(double stddev, double mean) {
    return stddev <= 1e-9 * std::max(1.0, std::fabs(mean));
}

}  // namespace

Dataset zscore_apply(const Dataset& ds, const ZScoreStats& stats) {
    if (stats.mean.size() != ds.feature_dim) {
        throw std::invalid_argument("zscore_apply: stats dim mismatch");
    }
    Dataset out = ds;
    for (Series& s : out.items) {
        for (std::size_t d = 0; d < ds.feature_dim; ++d) {
            if (is_degenerate(stats.stddev[d], stats.mean[d])) continue;
            for (std::size_t r = 0; r < s.length(); ++r) {
                s.values(r, d) = (s.values(r, d) - stats.mean[d]) / stats.stddev[d];
            }
        }
    }
    return out;
}

std::pair<Dataset, ZScoreStats> zscore(const Dataset& train) {
    ZScoreStats stats = zscore_fit(train);
    return {zscore_apply(train, stats), stats};
}

std::tuple<Dataset, Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
    if (spec.test_fraction <= 0.0 || spec.test_fraction >= 1.0) {
        throw std::invalid_argument("split: test_fraction must be in (0,1)");
    }
    const std::size_t n = ds.size();
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
    for (std::size_t i = 0; i < n; ++i) {
        if (!ds.items[i].label) throw std::invalid_argument("split: unlabeled series");
        by_class[static_cast<std::size_t>(*ds.items[i].label)].push_back(i);
    }

    // Largest-remainder allocation of round(fraction * n) test slots.
    const std::size_t test_total =
        static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
    std::vector<std::size_t> quota(ds.num_classes, 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < ds.num_classes; ++k) {
        double exact = spec.test_fraction * static_cast<double>(by_class[k].size());
        quota[k] = static_cast<std::size_t>(exact);
        assigned += quota[k];
        remainders.push_back({exact - static_cast<double>(quota[k]), k});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t i = 0; assigned < test_total && i < remainders.size(); ++i) {
        std::size_t k = remainders[i].second;
        if (quota[k] < by_class[k].size()) {
            ++quota[k];
            ++assigned;
        }
    }
    if (assigned < test_total) {
        throw std::invalid_argument("split: dataset too small for requested test fraction");
    }

    Rng rng(spec.seed);
    std::vector<bool> in_test(n, false);
    for (std::size_t k = 0; k < ds.num_classes; ++k) {
        rng.shuffle(by_class[k], Stream::Split);
        for (std::size_t i = 0; i < quota[k]; ++i) in_test[by_class[k][i]] = true;
    }

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < n; ++i) {
        if (!in_test[i]) pool.push_back(i);
    }
    if (spec.validation_count >= pool.size()) {
        throw std::invalid_argument("split: dataset too small, validation_count " +
                                    std::to_string(spec.validation_count) + " >= training pool " +
                                    std::to_string(pool.size()));
    }
    rng.shuffle(pool, Stream::Split);
    std::vector<bool> in_val(n, false);
    for (std::size_t i = 0; i < spec.validation_count; ++i) in_val[pool[i]] = true;

    Dataset train, val, test;
    for (Dataset* part : {&train, &val, &test}) {
        part->num_classes = ds.num_classes;
        part->feature_dim = ds.feature_dim;
        part->fixed_length = ds.fixed_length;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (in_test[i]) {
            test.items.push_back(ds.items[i]);
        } else if (in_val[i]) {
            val.items.push_back(ds.items[i]);
        } else {
            train.items.push_back(ds.items[i]);
        }
    }
    train.validate(true);
    return {std::move(train), std::move(val), std::move(test)};
}

namespace {

constexpr std::size_t kHarmonics = 4;
constexpr std::size_t kWarpSegments = 8;

struct ClassCoeffs {
    // amp[d][h], phase[d][h]
    std::vector<std::array<double, kHarmonics>> amp, phase;
};

ClassCoeffs class_coeffs(const SynthSpec& spec, std::size_t cls) {
    Rng rng(mix_seed(spec.seed, 0x70726f746fULL, cls));
    ClassCoeffs c;
    c.amp.resize(spec.feature_dim);
    c.phase.resize(spec.feature_dim);
    for (std::size_t d = 0; d < spec.feature_dim; ++d) {
        for (std::size_t h = 0; h < kHarmonics; ++h) {
            c.amp[d][h] = rng.uniform(Stream::Synth, -1.0, 1.0) / static_cast<double>(h + 1);
            c.phase[d][h] = rng.uniform(Stream::Synth, 0.0, 2.0 * M_PI);
        }
    }
    return c;
}

double proto_eval(const ClassCoeffs& c, std::size_t d, double t) {
    double v = 0.0;
    for (std::size_t h = 0; h < kHarmonics; ++h) {
        v += c.amp[d][h] * std::sin(2.0 * M_PI * static_cast<double>(h + 1) * t + c.phase[d][h]);
    }
    return v;
}

// Piecewise-linear monotone warp of [0,1] onto itself with every segment
// slope inside [1/w, w]. Slopes are drawn log-uniform, normalized to mean 1,
// then shrunk toward 1 just enough to restore the bound.
struct Warp {
    std::array<double, kWarpSegments> slope;
    std::array<double, kWarpSegments + 1> knots;
    bool is_identity = true;

    double operator()(double t) const {
        if (is_identity) return t;
        double tc = std::clamp(t, 0.0, 1.0);
        std::size_t seg = std::min(static_cast<std::size_t>(tc * kWarpSegments), kWarpSegments - 1);
        double local = tc - static_cast<double>(seg) / static_cast<double>(kWarpSegments);
        return std::clamp(knots[seg] + slope[seg] * local, 0.0, 1.0);
    }
};

Warp make_warp(Rng& rng, double intensity) {
    Warp w;
    double log_w = std::log(intensity);
    double sum = 0.0;
    for (double& s : w.slope) {
        s = std::exp(rng.uniform(Stream::Synth, -log_w, log_w));
        sum += s;
    }
    double mean = sum / static_cast<double>(kWarpSegments);
    double shrink = 1.0;
    for (double& s : w.slope) {
        s /= mean;
        if (s > intensity) shrink = std::min(shrink, (intensity - 1.0) / (s - 1.0));
        if (s < 1.0 / intensity) shrink = std::min(shrink, (1.0 - 1.0 / intensity) / (1.0 - s));
    }
    w.is_identity = true;
    for (double& s : w.slope) {
        s = 1.0 + shrink * (s - 1.0);
        if (s != 1.0) w.is_identity = false;
    }
    w.knots[0] = 0.0;
    for (std::size_t i = 0; i < kWarpSegments; ++i) {
        w.knots[i + 1] = w.knots[i] + w.slope[i] / static_cast<double>(kWarpSegments);
    }
    return w;
}

}  // namespace

Series synth_prototype(const SynthSpec& spec, std::size_t cls) {
    ClassCoeffs c = class_coeffs(spec, cls);
    Matrix m(spec.length, spec.feature_dim);
    for (std::size_t k = 0; k < spec.length; ++k) {
        double t = static_cast<double>(k) / static_cast<double>(spec.length - 1);
        for (std::size_t d = 0; d < spec.feature_dim; ++d) m(k, d) = proto_eval(c, d, t);
    }
    return make_series(std::move(m), static_cast<int>(cls),
                       "synth/proto_" + std::to_string(cls));
}

Dataset synth_warped(const SynthSpec& spec) {
    if (spec.num_classes == 0 || spec.samples_per_class == 0 || spec.length < 2 ||
        spec.feature_dim == 0) {
        throw std::invalid_argument("synth_warped: sizes must be positive (length >= 2)");
    }
    if (spec.warp_intensity < 1.0) {
        throw std::invalid_argument("synth_warped: warp intensity must be >= 1");
    }
    if (spec.noise_sigma < 0.0) {
        throw std::invalid_argument("synth_warped: noise sigma must be >= 0");
    }

    Dataset ds;
    ds.num_classes = spec.num_classes;
    ds.feature_dim = spec.feature_dim;
    ds.fixed_length = spec.length;
    ds.items.reserve(spec.num_classes * spec.samples_per_class);

    for (std::size_t cls = 0; cls < spec.num_classes; ++cls) {
        ClassCoeffs c = class_coeffs(spec, cls);
        for (std::size_t idx = 0; idx < spec.samples_per_class; ++idx) {
            Rng rng(mix_seed(spec.seed, cls + 1, idx + 1));
            Warp warp = make_warp(rng, spec.warp_intensity);
            Matrix m(spec.length, spec.feature_dim);
            for (std::size_t k = 0; k < spec.length; ++k) {
                double t = static_cast<double>(k) / static_cast<double>(spec.length - 1);
                double u = warp(t);
                for (std::size_t d = 0; d < spec.feature_dim; ++d) {
                    m(k, d) = proto_eval(c, d, u) +
                              rng.gaussian(Stream::Synth, 0.0, 1.0) * spec.noise_sigma;
                }
            }
            ds.items.push_back(make_series(std::move(m), static_cast<int>(cls),
                                           "synth/c" + std::to_string(cls) + "/s" +
                                               std::to_string(idx)));
        }
    }
    return ds;
}

}  // namespace dwa
