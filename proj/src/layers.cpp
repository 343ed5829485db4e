#include "dwa/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dwa {

namespace {

void check_conv_input(const Matrix& input, const ConvFilterBank& bank) {
    if (bank.count() == 0) throw std::invalid_argument("conv: empty filter bank");
    if (bank.stride == 0) throw std::invalid_argument("conv: stride must be positive");
    if (input.cols() != bank.in_dim()) {
        throw std::invalid_argument("conv: input dim mismatch " + input.shape_str() + " vs filter " +
                                    bank.filters[0].shape_str());
    }
}

void check_delta(const Matrix& delta, std::size_t t_out, std::size_t n) {
    if (delta.rows() != t_out || delta.cols() != n) {
        throw std::invalid_argument("conv backward: delta shape " + delta.shape_str() +
                                    " does not match feature map " + std::to_string(t_out) + "x" +
                                    std::to_string(n));
    }
}

ConvGrads zero_conv_grads(const ConvFilterBank& bank, const Matrix& input) {
    ConvGrads g;
    g.filters.reserve(bank.count());
    for (std::size_t n = 0; n < bank.count(); ++n) {
        g.filters.emplace_back(bank.width(), bank.in_dim(), 0.0);
    }
    g.biases.assign(bank.count(), 0.0);
    g.input = Matrix(input.rows(), input.cols(), 0.0);
    return g;
}

}  // namespace

ConvFilterBank make_filter_bank(std::size_t count, std::size_t width, std::size_t in_dim,
                                std::size_t stride) {
    ConvFilterBank bank;
    bank.filters.assign(count, Matrix(width, in_dim, 0.0));
    bank.biases.assign(count, 0.0);
    bank.stride = stride;
    return bank;
}

std::size_t conv_out_len(std::size_t input_len, std::size_t width, std::size_t stride) {
    if (input_len < width) {
        throw std::invalid_argument("conv: input length " + std::to_string(input_len) +
                                    " shorter than filter width " + std::to_string(width));
    }
    return (input_len - width) / stride + 1;
}

Matrix linear_conv_forward(const Matrix& input, const ConvFilterBank& bank) {
    check_conv_input(input, bank);
    const std::size_t width = bank.width();
    const std::size_t dim = bank.in_dim();
    const std::size_t t_out = conv_out_len(input.rows(), width, bank.stride);

    Matrix out(t_out, bank.count());
    for (std::size_t n = 0; n < bank.count(); ++n) {
        const Matrix& f = bank.filters[n];
        for (std::size_t j = 0; j < t_out; ++j) {
            const std::size_t base = j * bank.stride;
            double acc = 0.0;
            for (std::size_t i = 0; i < width; ++i) {
                const double* w = f.row(i);
                const double* x = input.row(base + i);
                for (std::size_t d = 0; d < dim; ++d) acc += w[d] * x[d];
            }
            out(j, n) = acc + bank.biases[n];
        }
    }
    return out;
}

Matrix dwa_conv_forward(const Matrix& input, const ConvFilterBank& bank, ConvTrace& trace) {
    check_conv_input(input, bank);
    const std::size_t width = bank.width();
    const std::size_t dim = bank.in_dim();
    const std::size_t t_out = conv_out_len(input.rows(), width, bank.stride);

    trace.t_out = t_out;
    trace.filters = bank.count();
    trace.paths.assign(t_out * bank.count(), AlignmentPath{});

    Matrix out(t_out, bank.count());
    for (std::size_t j = 0; j < t_out; ++j) {
        const std::size_t base = j * bank.stride;
        Matrix window = slice_rows(input, base, width);
        for (std::size_t n = 0; n < bank.count(); ++n) {
            const Matrix& f = bank.filters[n];
            AlignmentPath path = align(f, window);
            double acc = 0.0;
            for (std::size_t i = 0; i < width; ++i) {
                const double* w = f.row(i);
                const double* x = window.row(static_cast<std::size_t>(path.matched[i]));
                for (std::size_t d = 0; d < dim; ++d) acc += w[d] * x[d];
            }
            out(j, n) = acc + bank.biases[n];
            trace.path(j, n) = std::move(path);
        }
    }
    return out;
}

Matrix dwa_conv_forward_frozen(const Matrix& input, const ConvFilterBank& bank,
                               const ConvTrace& trace) {
    check_conv_input(input, bank);
    const std::size_t width = bank.width();
    const std::size_t dim = bank.in_dim();
    const std::size_t t_out = conv_out_len(input.rows(), width, bank.stride);
    if (trace.t_out != t_out || trace.filters != bank.count()) {
        throw std::invalid_argument("conv: frozen trace shape mismatch");
    }

    Matrix out(t_out, bank.count());
    for (std::size_t j = 0; j < t_out; ++j) {
        const std::size_t base = j * bank.stride;
        for (std::size_t n = 0; n < bank.count(); ++n) {
            const Matrix& f = bank.filters[n];
            const auto& matched = trace.path(j, n).matched;
            double acc = 0.0;
            for (std::size_t i = 0; i < width; ++i) {
                const double* w = f.row(i);
                const double* x = input.row(base + static_cast<std::size_t>(matched[i]));
                for (std::size_t d = 0; d < dim; ++d) acc += w[d] * x[d];
            }
            out(j, n) = acc + bank.biases[n];
        }
    }
    return out;
}

ConvGrads dwa_conv_backward(const ConvTrace& trace, const Matrix& input,
                            const ConvFilterBank& bank, const Matrix& delta) {
    check_conv_input(input, bank);
    const std::size_t width = bank.width();
    const std::size_t dim = bank.in_dim();
    const std::size_t t_out = conv_out_len(input.rows(), width, bank.stride);
    check_delta(delta, t_out, bank.count());
    if (trace.t_out != t_out || trace.filters != bank.count()) {
        throw std::invalid_argument("conv backward: trace shape mismatch");
    }

    ConvGrads g = zero_conv_grads(bank, input);
    for (std::size_t n = 0; n < bank.count(); ++n) {
        const Matrix& f = bank.filters[n];
        Matrix& gf = g.filters[n];
        for (std::size_t j = 0; j < t_out; ++j) {
            const double dz = delta(j, n);
            const std::size_t base = j * bank.stride;
            const auto& matched = trace.path(j, n).matched;
            for (std::size_t i = 0; i < width; ++i) {
                const std::size_t r = base + static_cast<std::size_t>(matched[i]);
                const double* w = f.row(i);
                const double* x = input.row(r);
                double* gw = gf.row(i);
                double* gx = g.input.row(r);
                for (std::size_t d = 0; d < dim; ++d) {
                    gw[d] += dz * x[d];
                    gx[d] += dz * w[d];
                }
            }
            g.biases[n] += dz;
        }
    }
    return g;
}

ConvGrads linear_conv_backward(const Matrix& input, const ConvFilterBank& bank,
                               const Matrix& delta) {
    check_conv_input(input, bank);
    const std::size_t width = bank.width();
    const std::size_t dim = bank.in_dim();
    const std::size_t t_out = conv_out_len(input.rows(), width, bank.stride);
    check_delta(delta, t_out, bank.count());

    ConvGrads g = zero_conv_grads(bank, input);
    for (std::size_t n = 0; n < bank.count(); ++n) {
        const Matrix& f = bank.filters[n];
        Matrix& gf = g.filters[n];
        for (std::size_t j = 0; j < t_out; ++j) {
            const double dz = delta(j, n);
            const std::size_t base = j * bank.stride;
            for (std::size_t i = 0; i < width; ++i) {
                const std::size_t r = base + i;
                const double* w = f.row(i);
                const double* x = input.row(r);
                double* gw = gf.row(i);
                double* gx = g.input.row(r);
                for (std::size_t d = 0; d < dim; ++d) {
                    gw[d] += dz * x[d];
                    gx[d] += dz * w[d];
                }
            }
            g.biases[n] += dz;
        }
    }
    return g;
}

BatchNormState::BatchNormState(std::size_t channels)
    : gamma(channels, 1.0),
      beta(channels, 0.0),
      running_mean(channels, 0.0),
      running_var(channels, 1.0),
      initialized(true) {}

std::vector<Matrix> batchnorm_forward(const std::vector<Matrix>& x, BatchNormState& state,
                                      bool use_batch_stats, bool update_running,
                                      BatchNormCache* cache) {
    if (x.empty()) throw std::invalid_argument("batchnorm: empty batch");
    const std::size_t channels = x[0].cols();
    const std::size_t t = x[0].rows();
    if (state.channels() != channels) {
        throw std::invalid_argument("batchnorm: state has " + std::to_string(state.channels()) +
                                    " channels, input has " + std::to_string(channels));
    }
    for (const Matrix& m : x) {
        if (m.rows() != t || m.cols() != channels) {
            throw std::invalid_argument("batchnorm: ragged batch");
        }
    }
    const std::size_t count = x.size() * t;

    std::vector<double> mean(channels, 0.0), var(channels, 0.0);
    if (use_batch_stats) {
        if (count < 2) {
            throw std::invalid_argument("batchnorm: needs at least 2 values per channel, got " +
                                        std::to_string(count));
        }
        for (const Matrix& m : x) {
            for (std::size_t r = 0; r < t; ++r) {
                const double* row = m.row(r);
                for (std::size_t c = 0; c < channels; ++c) mean[c] += row[c];
            }
        }
        for (std::size_t c = 0; c < channels; ++c) mean[c] /= static_cast<double>(count);
        for (const Matrix& m : x) {
            for (std::size_t r = 0; r < t; ++r) {
                const double* row = m.row(r);
                for (std::size_t c = 0; c < channels; ++c) {
                    double diff = row[c] - mean[c];
                    var[c] += diff * diff;
                }
            }
        }
        for (std::size_t c = 0; c < channels; ++c) var[c] /= static_cast<double>(count);
    } else {
        if (!state.initialized) {
            throw std::runtime_error("batchnorm: inference requested before statistics exist");
        }
        mean = state.running_mean;
        var = state.running_var;
    }

    std::vector<double> inv_std(channels);
    for (std::size_t c = 0; c < channels; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + state.eps);

    std::vector<Matrix> out(x.size(), Matrix(t, channels));
    std::vector<Matrix> xhat;
    if (cache) xhat.assign(x.size(), Matrix(t, channels));
    for (std::size_t b = 0; b < x.size(); ++b) {
        for (std::size_t r = 0; r < t; ++r) {
            const double* row = x[b].row(r);
            double* orow = out[b].row(r);
            for (std::size_t c = 0; c < channels; ++c) {
                double xh = (row[c] - mean[c]) * inv_std[c];
                if (cache) xhat[b](r, c) = xh;
                orow[c] = state.gamma[c] * xh + state.beta[c];
            }
        }
    }

    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = inv_std;
        cache->count = count;
    }

    if (use_batch_stats && update_running) {
        const double m = state.momentum;
        for (std::size_t c = 0; c < channels; ++c) {
            state.running_mean[c] = (1.0 - m) * state.running_mean[c] + m * mean[c];
            state.running_var[c] = (1.0 - m) * state.running_var[c] + m * var[c];
        }
        state.initialized = true;
    }
    return out;
}

std::vector<Matrix> batchnorm_backward(const BatchNormCache& cache, const BatchNormState& state,
                                       const std::vector<Matrix>& delta, BatchNormGrads& grads) {
    if (delta.empty() || cache.xhat.size() != delta.size()) {
        throw std::invalid_argument("batchnorm backward: cache/delta mismatch");
    }
    const std::size_t channels = delta[0].cols();
    const std::size_t t = delta[0].rows();
    const double m = static_cast<double>(cache.count);

    std::vector<double> sum_d(channels, 0.0), sum_dx(channels, 0.0);
    for (std::size_t b = 0; b < delta.size(); ++b) {
        for (std::size_t r = 0; r < t; ++r) {
            const double* drow = delta[b].row(r);
            const double* xrow = cache.xhat[b].row(r);
            for (std::size_t c = 0; c < channels; ++c) {
                sum_d[c] += drow[c];
                sum_dx[c] += drow[c] * xrow[c];
            }
        }
    }

    grads.gamma = sum_dx;
    grads.beta = sum_d;

    std::vector<Matrix> dx(delta.size(), Matrix(t, channels));
    for (std::size_t b = 0; b < delta.size(); ++b) {
        for (std::size_t r = 0; r < t; ++r) {
            const double* drow = delta[b].row(r);
            const double* xrow = cache.xhat[b].row(r);
            double* orow = dx[b].row(r);
            for (std::size_t c = 0; c < channels; ++c) {
                double scale = state.gamma[c] * cache.inv_std[c] / m;
                orow[c] = scale * (m * drow[c] - sum_d[c] - xrow[c] * sum_dx[c]);
            }
        }
    }
    return dx;
}

std::vector<double> dense_forward(const DenseLayer& layer, const std::vector<double>& x) {
    std::vector<double> y = matvec(layer.weight, x);
    for (std::size_t r = 0; r < y.size(); ++r) {
        y[r] += layer.bias[r];
        if (layer.act == Activation::Tanh) y[r] = std::tanh(y[r]);
    }
    return y;
}

std::vector<double> dense_backward(const DenseLayer& layer, const std::vector<double>& x,
                                   const std::vector<double>& y,
                                   const std::vector<double>& delta, DenseGrads& grads) {
    if (delta.size() != layer.out_dim() || x.size() != layer.in_dim()) {
        throw std::invalid_argument("dense backward: shape mismatch");
    }
    std::vector<double> dpre(delta);
    if (layer.act == Activation::Tanh) {
        for (std::size_t r = 0; r < dpre.size(); ++r) dpre[r] *= 1.0 - y[r] * y[r];
    }
    std::vector<double> dx(layer.in_dim(), 0.0);
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
        const double* wrow = layer.weight.row(r);
        double* grow = grads.weight.row(r);
        const double d = dpre[r];
        for (std::size_t c = 0; c < layer.in_dim(); ++c) {
            grow[c] += d * x[c];
            dx[c] += d * wrow[c];
        }
        grads.bias[r] += d;
    }
    return dx;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        p[k] = std::exp(logits[k] - mx);
        sum += p[k];
    }
    for (double& v : p) v /= sum;
    return p;
}

double softmax_cross_entropy(const std::vector<double>& logits, int label,
                             std::vector<double>* grad_logits) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
        throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) +
                                    " out of range for " + std::to_string(logits.size()) +
                                    " classes");
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - mx);
    double log_sum = std::log(sum);
    double loss = -(logits[static_cast<std::size_t>(label)] - mx - log_sum);
    if (grad_logits) {
        grad_logits->assign(logits.size(), 0.0);
        for (std::size_t k = 0; k < logits.size(); ++k) {
            (*grad_logits)[k] = std::exp(logits[k] - mx - log_sum);
        }
        (*grad_logits)[static_cast<std::size_t>(label)] -= 1.0;
    }
    return loss;
}

Matrix tanh_map(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = std::tanh(x.data()[i]);
    return out;
}

}  // namespace dwa
