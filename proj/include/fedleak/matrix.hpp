#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedleak {

/// Dense row-major matrix of 64-bit floats. Row/column vectors are 1xN or
/// Nx1 matrices; all model parameters, gradients and samples live in this
/// type. Values are immutable-by-convention once handed to another module.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix constant(std::size_t rows, std::size_t cols, double value);
    static Matrix identity(std::size_t n);
    static Matrix row_vector(std::vector<double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    bool same_shape(const Matrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Standard product; throws ShapeError when inner dimensions disagree.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double factor);

// a += factor * b
void axpy(Matrix& a, const Matrix& b, double factor);

/// Elementwise max(0, x).
Matrix relu(const Matrix& x);

/// Elementwise activation indicator: 1 where x > 0, else 0. A value exactly
/// at the threshold counts as inactive, which is what gates the backward
/// pass of the crafted modules.
Matrix relu_mask(const Matrix& pre_activation);

/// Adds a 1xC row vector to every row of an NxC matrix (bias broadcast).
Matrix add_row_broadcast(const Matrix& m, const Matrix& row);

/// Column sums as a 1xC row vector (bias gradients).
Matrix col_sums(const Matrix& m);

double max_abs(const Matrix& m);

}  // namespace fedleak
