#include "dwa/model.hpp"

#include <cmath>
#include <stdexcept>

#include "dwa/parallel.hpp"

namespace dwa {

std::size_t ModelGeometry::conv1_out_len() const {
    return conv_out_len(input_len, conv1_width, conv1_stride);
}

std::size_t ModelGeometry::conv2_out_len() const {
    return conv_out_len(conv1_out_len(), conv2_width, conv2_stride);
}

std::size_t ModelGeometry::param_count() const {
    std::size_t n = 0;
    n += conv1_filters * (conv1_width * feature_dim) + conv1_filters;
    n += 2 * conv1_filters;  // bn1 gamma/beta
    n += conv2_filters * (conv2_width * conv1_filters) + conv2_filters;
    n += 2 * conv2_filters;
    n += fc1_nodes * flat_size() + fc1_nodes;
    n += fc2_nodes * fc1_nodes + fc2_nodes;
    n += num_classes * fc2_nodes + num_classes;
    return n;
}

void ModelGeometry::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw std::invalid_argument("model geometry: " + what);
    };
    require(input_len >= 1, "input_len must be positive");
    require(feature_dim >= 1, "feature_dim must be positive");
    require(num_classes >= 2, "num_classes must be at least 2");
    require(conv1_filters >= 1 && conv2_filters >= 1, "conv filter counts must be positive");
    require(conv1_width >= 1 && conv2_width >= 1, "conv widths must be positive");
    require(conv1_stride >= 1 && conv2_stride >= 1, "conv strides must be positive");
    require(fc1_nodes >= 1 && fc2_nodes >= 1, "dense sizes must be positive");
    if (input_len < conv1_width) {
        throw std::invalid_argument("model geometry: conv1 output is empty (input_len " +
                                    std::to_string(input_len) + " < conv1 width " +
                                    std::to_string(conv1_width) + ")");
    }
    if (conv1_out_len() < conv2_width) {
        throw std::invalid_argument("model geometry: conv2 output is empty (conv1 output " +
                                    std::to_string(conv1_out_len()) + " < conv2 width " +
                                    std::to_string(conv2_width) + ")");
    }
}

bool operator==(const ModelGeometry& a, const ModelGeometry& b) {
    return a.input_len == b.input_len && a.feature_dim == b.feature_dim &&
           a.num_classes == b.num_classes && a.conv1_filters == b.conv1_filters &&
           a.conv1_width == b.conv1_width && a.conv1_stride == b.conv1_stride &&
           a.conv2_filters == b.conv2_filters && a.conv2_width == b.conv2_width &&
           a.conv2_stride == b.conv2_stride && a.fc1_nodes == b.fc1_nodes &&
           a.fc2_nodes == b.fc2_nodes && a.mode == b.mode;
}

ModelState make_model_shell(const ModelGeometry& geom) {
    geom.validate();
    ModelState m;
    m.geom = geom;
    m.conv1 = make_filter_bank(geom.conv1_filters, geom.conv1_width, geom.feature_dim,
                               geom.conv1_stride);
    m.bn1 = BatchNormState(geom.conv1_filters);
    m.conv2 = make_filter_bank(geom.conv2_filters, geom.conv2_width, geom.conv1_filters,
                               geom.conv2_stride);
    m.bn2 = BatchNormState(geom.conv2_filters);
    m.fc1 = DenseLayer{Matrix(geom.fc1_nodes, geom.flat_size()),
                       std::vector<double>(geom.fc1_nodes, 0.0), Activation::Tanh};
    m.fc2 = DenseLayer{Matrix(geom.fc2_nodes, geom.fc1_nodes),
                       std::vector<double>(geom.fc2_nodes, 0.0), Activation::Tanh};
    m.out = DenseLayer{Matrix(geom.num_classes, geom.fc2_nodes),
                       std::vector<double>(geom.num_classes, 0.0), Activation::Identity};
    return m;
}

namespace {

void init_filters(std::vector<Matrix>& filters, std::size_t fan_in, std::size_t fan_out,
                  Rng& rng) {
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (Matrix& f : filters) {
        for (std::size_t i = 0; i < f.rows(); ++i) {
            for (std::size_t d = 0; d < f.cols(); ++d) {
                f(i, d) = rng.uniform(Stream::Init, -limit, limit);
            }
        }
    }
}

void init_dense(DenseLayer& layer, Rng& rng) {
    double limit = std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
        for (std::size_t c = 0; c < layer.in_dim(); ++c) {
            layer.weight(r, c) = rng.uniform(Stream::Init, -limit, limit);
        }
    }
}

}  // namespace

ModelState init_model(const ModelGeometry& geom, Rng& rng) {
    ModelState m = make_model_shell(geom);
    init_filters(m.conv1.filters, geom.conv1_width * geom.feature_dim,
                 geom.conv1_width * geom.conv1_filters, rng);
    init_filters(m.conv2.filters, geom.conv2_width * geom.conv1_filters,
                 geom.conv2_width * geom.conv2_filters, rng);
    init_dense(m.fc1, rng);
    init_dense(m.fc2, rng);
    init_dense(m.out, rng);
    return m;
}

ModelGrads zero_model_grads(const ModelGeometry& geom) {
    ModelGrads g;
    g.conv1_filters.assign(geom.conv1_filters, Matrix(geom.conv1_width, geom.feature_dim, 0.0));
    g.conv1_biases.assign(geom.conv1_filters, 0.0);
    g.conv2_filters.assign(geom.conv2_filters, Matrix(geom.conv2_width, geom.conv1_filters, 0.0));
    g.conv2_biases.assign(geom.conv2_filters, 0.0);
    g.bn1.gamma.assign(geom.conv1_filters, 0.0);
    g.bn1.beta.assign(geom.conv1_filters, 0.0);
    g.bn2.gamma.assign(geom.conv2_filters, 0.0);
    g.bn2.beta.assign(geom.conv2_filters, 0.0);
    g.fc1 = DenseGrads{Matrix(geom.fc1_nodes, geom.flat_size(), 0.0),
                       std::vector<double>(geom.fc1_nodes, 0.0)};
    g.fc2 = DenseGrads{Matrix(geom.fc2_nodes, geom.fc1_nodes, 0.0),
                       std::vector<double>(geom.fc2_nodes, 0.0)};
    g.out = DenseGrads{Matrix(geom.num_classes, geom.fc2_nodes, 0.0),
                       std::vector<double>(geom.num_classes, 0.0)};
    return g;
}

namespace {

std::vector<double> flatten_map(const Matrix& m) {
    return std::vector<double>(m.data(), m.data() + m.size());
}

Matrix unflatten_map(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    std::copy(v.begin(), v.end(), m.data());
    return m;
}

void conv_layer_forward(const std::vector<Matrix>& in, const ConvFilterBank& bank, ConvMode mode,
                        const std::vector<ConvTrace>* frozen, std::vector<Matrix>& z,
                        std::vector<ConvTrace>& traces, int threads) {
    const std::size_t batch = in.size();
    z.assign(batch, Matrix());
    traces.assign(batch, ConvTrace());
    parallel_for(batch, threads, [&](std::size_t b) {
        if (mode == ConvMode::Linear) {
            z[b] = linear_conv_forward(in[b], bank);
        } else if (frozen) {
            z[b] = dwa_conv_forward_frozen(in[b], bank, (*frozen)[b]);
            traces[b] = (*frozen)[b];
        } else {
            z[b] = dwa_conv_forward(in[b], bank, traces[b]);
        }
    });
}

}  // namespace

Matrix model_forward(const std::vector<Matrix>& batch, ModelState& model,
                     const ForwardOptions& opts, ModelTrace* trace) {
    if (batch.empty()) throw std::invalid_argument("model_forward: empty batch");
    const ModelGeometry& g = model.geom;
    for (const Matrix& x : batch) {
        if (x.rows() != g.input_len || x.cols() != g.feature_dim) {
            throw std::invalid_argument("model_forward: input " + x.shape_str() +
                                        " does not match geometry " + std::to_string(g.input_len) +
                                        "x" + std::to_string(g.feature_dim));
        }
    }
    if (opts.frozen && (opts.frozen->conv1.size() != batch.size() ||
                        opts.frozen->conv2.size() != batch.size())) {
        throw std::invalid_argument("model_forward: frozen alignments do not cover the batch");
    }

    ModelTrace local;
    ModelTrace& tr = trace ? *trace : local;
    tr.inputs = batch;
    const std::size_t n = batch.size();

    conv_layer_forward(batch, model.conv1, g.mode, opts.frozen ? &opts.frozen->conv1 : nullptr,
                       tr.z1, tr.conv1_traces, opts.threads);
    std::vector<Matrix> bn1_out = batchnorm_forward(tr.z1, model.bn1, opts.use_batch_stats,
                                                    opts.update_running, &tr.bn1_cache);
    tr.a1.assign(n, Matrix());
    parallel_for(n, opts.threads, [&](std::size_t b) { tr.a1[b] = tanh_map(bn1_out[b]); });

    conv_layer_forward(tr.a1, model.conv2, g.mode, opts.frozen ? &opts.frozen->conv2 : nullptr,
                       tr.z2, tr.conv2_traces, opts.threads);
    std::vector<Matrix> bn2_out = batchnorm_forward(tr.z2, model.bn2, opts.use_batch_stats,
                                                    opts.update_running, &tr.bn2_cache);
    tr.a2.assign(n, Matrix());
    parallel_for(n, opts.threads, [&](std::size_t b) { tr.a2[b] = tanh_map(bn2_out[b]); });

    tr.flat.assign(n, {});
    tr.fc1_out.assign(n, {});
    tr.fc2_out.assign(n, {});
    tr.logits = Matrix(n, g.num_classes);
    parallel_for(n, opts.threads, [&](std::size_t b) {
        tr.flat[b] = flatten_map(tr.a2[b]);
        tr.fc1_out[b] = dense_forward(model.fc1, tr.flat[b]);
        tr.fc2_out[b] = dense_forward(model.fc2, tr.fc1_out[b]);
        std::vector<double> logits = dense_forward(model.out, tr.fc2_out[b]);
        for (std::size_t k = 0; k < g.num_classes; ++k) tr.logits(b, k) = logits[k];
    });
    return tr.logits;
}

double batch_loss(const Matrix& logits, const std::vector<int>& labels, Matrix* grad_logits) {
    if (logits.rows() != labels.size() || logits.rows() == 0) {
        throw std::invalid_argument("batch_loss: logits/labels mismatch");
    }
    const std::size_t n = logits.rows();
    const std::size_t k = logits.cols();
    if (grad_logits) *grad_logits = Matrix(n, k);
    double total = 0.0;
    std::vector<double> row(k), grad(k);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t c = 0; c < k; ++c) row[c] = logits(b, c);
        total += softmax_cross_entropy(row, labels[b], grad_logits ? &grad : nullptr);
        if (grad_logits) {
            for (std::size_t c = 0; c < k; ++c) {
                (*grad_logits)(b, c) = grad[c] / static_cast<double>(n);
            }
        }
    }
    return total / static_cast<double>(n);
}

ModelGrads model_backward(const std::vector<Matrix>& batch, const ModelState& model,
                          const ModelTrace& trace, const std::vector<int>& labels,
                          double* loss_out, int threads) {
    const ModelGeometry& g = model.geom;
    const std::size_t n = batch.size();
    if (trace.inputs.size() != n || trace.logits.rows() != n) {
        throw std::invalid_argument("model_backward: trace does not match batch");
    }

    ModelGrads grads = zero_model_grads(g);
    Matrix dlogits;
    double loss = batch_loss(trace.logits, labels, &dlogits);
    if (loss_out) *loss_out = loss;

    // Dense stack runs serially: cheap next to the aligned convolutions, and
    // a fixed sample order keeps the accumulated sums thread-count invariant.
    std::vector<std::vector<double>> d_flat(n);
    for (std::size_t b = 0; b < n; ++b) {
        std::vector<double> dl(g.num_classes);
        for (std::size_t k = 0; k < g.num_classes; ++k) dl[k] = dlogits(b, k);
        std::vector<double> d_fc2 = dense_backward(model.out, trace.fc2_out[b], {}, dl, grads.out);
        std::vector<double> d_fc1 =
            dense_backward(model.fc2, trace.fc1_out[b], trace.fc2_out[b], d_fc2, grads.fc2);
        d_flat[b] = dense_backward(model.fc1, trace.flat[b], trace.fc1_out[b], d_fc1, grads.fc1);
    }

    // Through tanh into batch norm 2.
    std::vector<Matrix> d_bn2(n);
    const std::size_t t2 = g.conv2_out_len();
    parallel_for(n, threads, [&](std::size_t b) {
        Matrix da2 = unflatten_map(d_flat[b], t2, g.conv2_filters);
        const Matrix& a2 = trace.a2[b];
        for (std::size_t i = 0; i < da2.size(); ++i) {
            da2.data()[i] *= 1.0 - a2.data()[i] * a2.data()[i];
        }
        d_bn2[b] = std::move(da2);
    });
    std::vector<Matrix> d_z2 = batchnorm_backward(trace.bn2_cache, model.bn2, d_bn2, grads.bn2);

    // Conv2: per-sample partials in parallel, reduced in index order.
    std::vector<ConvGrads> conv2_partial(n);
    parallel_for(n, threads, [&](std::size_t b) {
        conv2_partial[b] = (g.mode == ConvMode::Dwa)
                               ? dwa_conv_backward(trace.conv2_traces[b], trace.a1[b], model.conv2,
                                                   d_z2[b])
                               : linear_conv_backward(trace.a1[b], model.conv2, d_z2[b]);
    });
    std::vector<Matrix> d_a1(n);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t f = 0; f < g.conv2_filters; ++f) {
            Matrix& acc = grads.conv2_filters[f];
            const Matrix& part = conv2_partial[b].filters[f];
            for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += part.data()[i];
            grads.conv2_biases[f] += conv2_partial[b].biases[f];
        }
        d_a1[b] = std::move(conv2_partial[b].input);
    }

    std::vector<Matrix> d_bn1(n);
    parallel_for(n, threads, [&](std::size_t b) {
        Matrix da1 = std::move(d_a1[b]);
        const Matrix& a1 = trace.a1[b];
        for (std::size_t i = 0; i < da1.size(); ++i) {
            da1.data()[i] *= 1.0 - a1.data()[i] * a1.data()[i];
        }
        d_bn1[b] = std::move(da1);
    });
    std::vector<Matrix> d_z1 = batchnorm_backward(trace.bn1_cache, model.bn1, d_bn1, grads.bn1);

    std::vector<ConvGrads> conv1_partial(n);
    parallel_for(n, threads, [&](std::size_t b) {
        conv1_partial[b] = (g.mode == ConvMode::Dwa)
                               ? dwa_conv_backward(trace.conv1_traces[b], trace.inputs[b],
                                                   model.conv1, d_z1[b])
                               : linear_conv_backward(trace.inputs[b], model.conv1, d_z1[b]);
    });
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t f = 0; f < g.conv1_filters; ++f) {
            Matrix& acc = grads.conv1_filters[f];
            const Matrix& part = conv1_partial[b].filters[f];
            for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += part.data()[i];
            grads.conv1_biases[f] += conv1_partial[b].biases[f];
        }
    }
    return grads;
}

namespace {

// Single layout definition so optimizer steps, gradient checks and
// checkpoints all walk parameters in the same order.
template <typename ConvF, typename ConvB, typename BnT, typename DenseT, typename F>
void visit_layout(ConvF& c1f, ConvB& c1b, BnT& bn1g, BnT& bn1b, ConvF& c2f, ConvB& c2b,
                  BnT& bn2g, BnT& bn2b, DenseT& fc1w, ConvB& fc1b, DenseT& fc2w, ConvB& fc2b,
                  DenseT& outw, ConvB& outb, F&& add) {
    add("conv1.weights", true, c1f);
    add("conv1.biases", true, c1b);
    add("bn1.gamma", false, bn1g);
    add("bn1.beta", false, bn1b);
    add("conv2.weights", true, c2f);
    add("conv2.biases", true, c2b);
    add("bn2.gamma", false, bn2g);
    add("bn2.beta", false, bn2b);
    add("fc1.weights", false, fc1w);
    add("fc1.biases", false, fc1b);
    add("fc2.weights", false, fc2w);
    add("fc2.biases", false, fc2b);
    add("out.weights", false, outw);
    add("out.biases", false, outb);
}

void append_ptrs(std::vector<double*>& out, std::vector<Matrix>& ms) {
    for (Matrix& m : ms) {
        for (std::size_t i = 0; i < m.size(); ++i) out.push_back(m.data() + i);
    }
}

void append_ptrs(std::vector<double*>& out, Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i) out.push_back(m.data() + i);
}

void append_ptrs(std::vector<double*>& out, std::vector<double>& v) {
    for (double& x : v) out.push_back(&x);
}

}  // namespace

std::vector<ParamGroup> param_groups(ModelState& m) {
    std::vector<ParamGroup> groups;
    visit_layout(m.conv1.filters, m.conv1.biases, m.bn1.gamma, m.bn1.beta, m.conv2.filters,
                 m.conv2.biases, m.bn2.gamma, m.bn2.beta, m.fc1.weight, m.fc1.bias, m.fc2.weight,
                 m.fc2.bias, m.out.weight, m.out.bias,
                 [&groups](const char* name, bool conv_rate, auto& field) {
                     ParamGroup g;
                     g.name = name;
                     g.conv_rate = conv_rate;
                     append_ptrs(g.values, field);
                     groups.push_back(std::move(g));
                 });
    return groups;
}

std::vector<ParamGroup> grad_groups(ModelGrads& g) {
    std::vector<ParamGroup> groups;
    visit_layout(g.conv1_filters, g.conv1_biases, g.bn1.gamma, g.bn1.beta, g.conv2_filters,
                 g.conv2_biases, g.bn2.gamma, g.bn2.beta, g.fc1.weight, g.fc1.bias, g.fc2.weight,
                 g.fc2.bias, g.out.weight, g.out.bias,
                 [&groups](const char* name, bool conv_rate, auto& field) {
                     ParamGroup grp;
                     grp.name = name;
                     grp.conv_rate = conv_rate;
                     append_ptrs(grp.values, field);
                     groups.push_back(std::move(grp));
                 });
    return groups;
}

}  // namespace dwa
