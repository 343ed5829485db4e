#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dwa/layers.hpp"
#include "dwa/rng.hpp"

namespace dwa {

// Five-layer network: two aligned (or plain) convolutions with batch norm
// and tanh, two tanh dense layers, then a softmax output.
struct ModelGeometry {
    std::size_t input_len = 0;
    std::size_t feature_dim = 0;
    std::size_t num_classes = 0;
    std::size_t conv1_filters = 50, conv1_width = 8, conv1_stride = 2;
    std::size_t conv2_filters = 50, conv2_width = 8, conv2_stride = 2;
    std::size_t fc1_nodes = 400, fc2_nodes = 100;
    ConvMode mode = ConvMode::Dwa;

    std::size_t conv1_out_len() const;
    std::size_t conv2_out_len() const;
    std::size_t flat_size() const { return conv2_out_len() * conv2_filters; }
    std::size_t param_count() const;
    // Throws naming the offending quantity when the layer shapes do not chain.
    void validate() const;
};

bool operator==(const ModelGeometry& a, const ModelGeometry& b);

struct ModelState {
    ModelGeometry geom;
    ConvFilterBank conv1, conv2;
    BatchNormState bn1, bn2;
    DenseLayer fc1, fc2, out;
};

// Zero-parameter model of the right shapes (checkpoint loading, tests).
ModelState make_model_shell(const ModelGeometry& geom);

// Scaled-uniform weights in +/- sqrt(6/(fan_in+fan_out)), zero biases,
// unit batch-norm scale. Draws come from the Init stream in layer order.
ModelState init_model(const ModelGeometry& geom, Rng& rng);

struct ModelTrace {
    std::vector<Matrix> inputs;
    std::vector<ConvTrace> conv1_traces, conv2_traces;
    std::vector<Matrix> z1, a1, z2, a2;
    BatchNormCache bn1_cache, bn2_cache;
    std::vector<std::vector<double>> flat, fc1_out, fc2_out;
    Matrix logits;  // batch x K
};

struct ModelGrads {
    std::vector<Matrix> conv1_filters, conv2_filters;
    std::vector<double> conv1_biases, conv2_biases;
    BatchNormGrads bn1, bn2;
    DenseGrads fc1, fc2, out;
};

ModelGrads zero_model_grads(const ModelGeometry& geom);

// Per-sample alignment pins for side-effect-free loss evaluations.
struct FrozenAlignments {
    std::vector<ConvTrace> conv1, conv2;
};

struct ForwardOptions {
    bool use_batch_stats = true;
    bool update_running = true;
    const FrozenAlignments* frozen = nullptr;
    int threads = 1;
};

// Returns batch x K logits; fills `trace` when given (required before
// model_backward). Alignments are recomputed on every call unless frozen.
Matrix model_forward(const std::vector<Matrix>& batch, ModelState& model,
                     const ForwardOptions& opts, ModelTrace* trace);

// Mean cross-entropy over the batch; grad_logits (optional) receives the
// per-sample softmax gradients already divided by the batch size.
double batch_loss(const Matrix& logits, const std::vector<int>& labels, Matrix* grad_logits);

// Consumes the trace of the immediately preceding forward pass. Gradients
// are summed over samples in index order regardless of the thread count.
ModelGrads model_backward(const std::vector<Matrix>& batch, const ModelState& model,
                          const ModelTrace& trace, const std::vector<int>& labels,
                          double* loss_out = nullptr, int threads = 1);

// Flat views over the trainable parameters, in a fixed declaration order
// shared by the optimizer, the gradient checker and the checkpoint format.
struct ParamGroup {
    std::string name;
    bool conv_rate = false;  // conv groups follow the decaying schedule
    std::vector<double*> values;
};

std::vector<ParamGroup> param_groups(ModelState& model);
std::vector<ParamGroup> grad_groups(ModelGrads& grads);

}  // namespace dwa
