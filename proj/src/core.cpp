#include "dwa/core.hpp"

#include <cmath>
#include <stdexcept>

namespace dwa {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : init) {
        if (r.size() != cols_) {
            throw std::invalid_argument("Matrix: ragged initializer rows");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Matrix::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool operator==(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            if (a(r, c) != b(r, c)) return false;
        }
    }
    return true;
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    a.shape_str() + " vs " + b.shape_str());
    }
}

}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    return out;
}

Matrix scale(const Matrix& a, double s) {
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * s;
    return out;
}

std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
    if (a.cols() != x.size()) {
        throw std::invalid_argument("matvec: shape mismatch " + a.shape_str() +
                                    " vs " + std::to_string(x.size()));
    }
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double acc = 0.0;
        const double* row = a.row(r);
        for (std::size_t c = 0; c < a.cols(); ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
    return y;
}

Matrix slice_rows(const Matrix& a, std::size_t begin, std::size_t count) {
    if (begin + count > a.rows()) {
        throw std::invalid_argument("slice_rows: range [" + std::to_string(begin) + ", " +
                                    std::to_string(begin + count) + ") exceeds " + a.shape_str());
    }
    Matrix out(count, a.cols());
    for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(begin + r, c);
    }
    return out;
}

Series make_series(Matrix values, std::optional<int> label, std::string id) {
    if (values.rows() == 0 || values.cols() == 0) {
        throw std::invalid_argument("Series: empty values (" + values.shape_str() + ")");
    }
    if (!values.all_finite()) {
        throw std::invalid_argument("Series: non-finite value in " +
                                    (id.empty() ? std::string("series") : id));
    }
    if (label && *label < 0) {
        throw std::invalid_argument("Series: negative label");
    }
    return Series{std::move(values), label, std::move(id)};
}

void Dataset::validate(bool require_all_classes) const {
    std::vector<bool> seen(num_classes, false);
    for (const Series& s : items) {
        if (s.dim() != feature_dim) {
            throw std::invalid_argument("Dataset: feature dim mismatch, item " + s.id + " has " +
                                        std::to_string(s.dim()) + " expected " +
                                        std::to_string(feature_dim));
        }
        if (fixed_length && s.length() != *fixed_length) {
            throw std::invalid_argument("Dataset: length mismatch, item " + s.id + " has " +
                                        std::to_string(s.length()) + " expected " +
                                        std::to_string(*fixed_length));
        }
        if (s.label) {
            if (*s.label >= static_cast<int>(num_classes)) {
                throw std::invalid_argument("Dataset: label " + std::to_string(*s.label) +
                                            " out of range for " + std::to_string(num_classes) +
                                            " classes");
            }
            seen[static_cast<std::size_t>(*s.label)] = true;
        }
    }
    if (require_all_classes) {
        for (std::size_t k = 0; k < num_classes; ++k) {
            if (!seen[k]) {
                throw std::invalid_argument("Dataset: class " + std::to_string(k) +
                                            " has no samples");
            }
        }
    }
}

}  // namespace dwa
