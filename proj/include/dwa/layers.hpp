#pragma once

#include <cstddef>
#include <vector>

#include "dwa/align.hpp"
#include "dwa/core.hpp"

namespace dwa {

enum class ConvMode { Dwa, Linear };

// N shared-weight filters, each width x in_dim, applied along time with a
// fixed stride. Feature maps are stored time-major: T_out rows, N columns.
struct ConvFilterBank {
    std::vector<Matrix> filters;
    std::vector<double> biases;
    std::size_t stride = 1;

    std::size_t count() const { return filters.size(); }
    std::size_t width() const { return filters.empty() ? 0 : filters[0].rows(); }
    std::size_t in_dim() const { return filters.empty() ? 0 : filters[0].cols(); }
};

ConvFilterBank make_filter_bank(std::size_t count, std::size_t width, std::size_t in_dim,
                                std::size_t stride);

std::size_t conv_out_len(std::size_t input_len, std::size_t width, std::size_t stride);

// One alignment per (output position, filter), recorded by the forward pass
// and consumed by the backward pass of the same round.
struct ConvTrace {
    std::size_t t_out = 0;
    std::size_t filters = 0;
    std::vector<AlignmentPath> paths;

    const AlignmentPath& path(std::size_t j, std::size_t n) const {
        return paths[j * filters + n];
    }
    AlignmentPath& path(std::size_t j, std::size_t n) { return paths[j * filters + n]; }
};

Matrix linear_conv_forward(const Matrix& input, const ConvFilterBank& bank);

// Aligns every filter to every window before taking the inner product over
// the matched pairs. Alignments are recomputed on every call; `trace` holds
// them only for the immediately following backward pass.
Matrix dwa_conv_forward(const Matrix& input, const ConvFilterBank& bank, ConvTrace& trace);

// Same product, but over alignments pinned by a previous forward pass.
Matrix dwa_conv_forward_frozen(const Matrix& input, const ConvFilterBank& bank,
                               const ConvTrace& trace);

struct ConvGrads {
    std::vector<Matrix> filters;
    std::vector<double> biases;
    Matrix input;
};

// Gradients with the match set held fixed at its forward-pass value: weight i
// accumulates the activation it was matched to, and each input row receives
// the weights matched onto it. delta is T_out x N.
ConvGrads dwa_conv_backward(const ConvTrace& trace, const Matrix& input,
                            const ConvFilterBank& bank, const Matrix& delta);

ConvGrads linear_conv_backward(const Matrix& input, const ConvFilterBank& bank,
                               const Matrix& delta);

// Per-channel batch normalization over (sample, time). A state straight from
// model initialization carries unit running statistics and is usable for
// inference; a default-constructed state is not.
struct BatchNormState {
    std::vector<double> gamma, beta;
    std::vector<double> running_mean, running_var;
    double eps = 1e-5;
    double momentum = 0.1;
    bool initialized = false;

    BatchNormState() = default;
    explicit BatchNormState(std::size_t channels);
    std::size_t channels() const { return gamma.size(); }
};

struct BatchNormCache {
    std::vector<Matrix> xhat;
    std::vector<double> inv_std;
    std::size_t count = 0;  // samples * time steps per channel
};

// x: batch of T x C feature maps. With use_batch_stats the batch mean and
// (biased) variance normalize; otherwise the running statistics do.
// update_running exists so plain loss evaluations stay side-effect free.
std::vector<Matrix> batchnorm_forward(const std::vector<Matrix>& x, BatchNormState& state,
                                      bool use_batch_stats, bool update_running,
                                      BatchNormCache* cache);

struct BatchNormGrads {
    std::vector<double> gamma, beta;
};

std::vector<Matrix> batchnorm_backward(const BatchNormCache& cache, const BatchNormState& state,
                                       const std::vector<Matrix>& delta, BatchNormGrads& grads);

enum class Activation { Tanh, Identity };

struct DenseLayer {
    Matrix weight;             // out x in
    std::vector<double> bias;  // out
    Activation act = Activation::Tanh;

    std::size_t in_dim() const { return weight.cols(); }
    std::size_t out_dim() const { return weight.rows(); }
};

std::vector<double> dense_forward(const DenseLayer& layer, const std::vector<double>& x);

struct DenseGrads {
    Matrix weight;
    std::vector<double> bias;
};

// x and y are the layer input and (activated) output from the forward pass;
// returns the gradient with respect to x and accumulates into grads.
std::vector<double> dense_backward(const DenseLayer& layer, const std::vector<double>& x,
                                   const std::vector<double>& y,
                                   const std::vector<double>& delta, DenseGrads& grads);

std::vector<double> softmax(const std::vector<double>& logits);

// Returns -log p[label]; grad_logits (optional) receives p - onehot(label).
double softmax_cross_entropy(const std::vector<double>& logits, int label,
                             std::vector<double>* grad_logits);

Matrix tanh_map(const Matrix& x);

}  // namespace dwa
