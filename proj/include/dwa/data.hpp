#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dwa/core.hpp"

namespace dwa {

// Block-format loader for 13-coefficient cepstral files: frames are lines of
// 13 reals, utterances are separated by blank lines, and class membership
// comes from per-class block counts in file order.
std::pair<Dataset, Dataset> load_arabic(const std::string& train_path,
                                        const std::string& test_path,
                                        const std::vector<long>& train_manifest,
                                        const std::vector<long>& test_manifest);

// root/<class-name>/<sample>.csv with one time step per row; labels follow
// the lexicographic order of the class directories.
Dataset load_delimited_dir(const std::string& root);

void write_delimited_dir(const Dataset& ds, const std::string& root);

// Linear interpolation along time to exactly `length` steps. Identity when
// the series already has that length.
Series resample(const Series& s, std::size_t length);
Dataset resample(const Dataset& ds, std::size_t length);

struct ZScoreStats {
    std::vector<double> mean, stddev;
};

// Statistics come from the training split only. Dimensions whose deviation
// is numerically zero pass through unscaled.
ZScoreStats zscore_fit(const Dataset& train);
Dataset zscore_apply(const Dataset& ds, const ZScoreStats& stats);
std::pair<Dataset, ZScoreStats> zscore(const Dataset& train);

struct SplitSpec {
    double test_fraction = 0.10;
    std::size_t validation_count = 50;
    std::uint64_t seed = 1;
};

// Label-stratified test split (largest-remainder allocation), then the
// validation patterns drawn from the remaining training pool. Disjoint,
// exhaustive, deterministic per seed.
std::tuple<Dataset, Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

struct SynthSpec {
    std::size_t num_classes = 4;
    std::size_t samples_per_class = 250;
    std::size_t length = 50;
    std::size_t feature_dim = 1;
    double warp_intensity = 2.0;  // max local time-scale factor, >= 1
    double noise_sigma = 0.05;
    std::uint64_t seed = 1;
};

// Smooth random prototype per class; each sample is the prototype under a
// random monotonic time warp with local slope within [1/w, w], plus white
// noise. Samples are addressable: (seed, class, index) fixes a sample.
Dataset synth_warped(const SynthSpec& spec);

// The undistorted class prototype, on the same time grid as the samples.
Series synth_prototype(const SynthSpec& spec, std::size_t cls);

}  // namespace dwa
