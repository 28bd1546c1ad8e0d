#include "fedleak/matrix.hpp"

#include <cmath>
#include <string>

#include "fedleak/error.hpp"

namespace fedleak {

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

Matrix Matrix::constant(std::size_t rows, std::size_t cols, double value) {
    Matrix m(rows, cols);
    for (double& x : m.data_) x = value;
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::row_vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Matrix(1, n, std::move(values));
}

bool Matrix::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul shape mismatch: " + shape_str(a) + " * " + shape_str(b));
    }
    Matrix out(a.rows(), b.cols());
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();
    const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
    // i-k-j order keeps the inner loop contiguous in both b and out.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < inner; ++k) {
            const double aik = pa[i * inner + k];
            const double* brow = pb + k * m;
            double* orow = po + i * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + " shape mismatch: " + shape_str(a) + " vs " + shape_str(b));
    }
}

}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    double* po = out.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] += pb[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix out = a;
    double* po = out.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] -= pb[i];
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out = a;
    double* po = out.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) po[i] *= pb[i];
    return out;
}

Matrix scale(const Matrix& m, double factor) {
    Matrix out = m;
    for (double& x : out.data()) x *= factor;
    return out;
}

void axpy(Matrix& a, const Matrix& b, double factor) {
    require_same_shape(a, b, "axpy");
    double* pa = a.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] += factor * pb[i];
}

Matrix relu(const Matrix& x) {
    Matrix out = x;
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

Matrix relu_mask(const Matrix& pre_activation) {
    Matrix out = pre_activation;
    for (double& v : out.data()) v = v > 0.0 ? 1.0 : 0.0;
    return out;
}

Matrix add_row_broadcast(const Matrix& m, const Matrix& row) {
    if (row.rows() != 1 || row.cols() != m.cols()) {
        throw ShapeError("bias broadcast expects 1x" + std::to_string(m.cols()) + ", got " + shape_str(row));
    }
    Matrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double* prow = out.row(i).data();
        const double* pb = row.data().data();
        for (std::size_t j = 0; j < m.cols(); ++j) prow[j] += pb[j];
    }
    return out;
}

Matrix col_sums(const Matrix& m) {
    Matrix out(1, m.cols());
    double* po = out.data().data();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* prow = m.row(i).data();
        for (std::size_t j = 0; j < m.cols(); ++j) po[j] += prow[j];
    }
    return out;
}

double max_abs(const Matrix& m) {
    double best = 0.0;
    for (double x : m.data()) best = std::max(best, std::abs(x));
    return best;
}

}  // namespace fedleak
