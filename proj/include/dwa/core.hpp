#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

namespace dwa {

// Dense row-major matrix of doubles. Time series store one time step per
// row and one feature dimension per column.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::initializer_list<std::initializer_list<double>> init);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    bool all_finite() const;
    std::string shape_str() const;  // e.g. "3x4"

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

bool operator==(const Matrix& a, const Matrix& b);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
std::vector<double> matvec(const Matrix& a, const std::vector<double>& x);
Matrix slice_rows(const Matrix& a, std::size_t begin, std::size_t count);

// One variable-length multivariate time series (T x D), optionally labeled.
struct Series {
    Matrix values;
    std::optional<int> label;
    std::string id;

    std::size_t length() const { return values.rows(); }
    std::size_t dim() const { return values.cols(); }
};

// Validating factory: rejects empty shapes and non-finite entries.
Series make_series(Matrix values, std::optional<int> label = std::nullopt,
                   std::string id = std::string());

struct Dataset {
    std::vector<Series> items;
    std::size_t num_classes = 0;
    std::size_t feature_dim = 0;
    std::optional<std::size_t> fixed_length;

    std::size_t size() const { return items.size(); }
    // require_all_classes: a training set must contain every class at least once.
    void validate(bool require_all_classes = false) const;
};

}  // namespace dwa
