#pragma once

// Dense row-major f64 matrix and the linear-algebra kernels the rest of the
// library is built on. Every kernel has a fixed summation order, so results
// are bit-reproducible across runs on one platform.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ovit {

class Matrix {
public:
    Matrix() = default;

    // Zero-filled rows x cols matrix. Both dimensions must be positive.
    Matrix(std::size_t rows, std::size_t cols);
    // Takes ownership of row-major data; throws ShapeError on a length
    // mismatch and ArgumentError on any non-finite entry.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    // Nested-list literal, e.g. Matrix{{1, 2}, {3, 4}}.
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols}; }
    static Matrix filled(std::size_t rows, std::size_t cols, double value);
    static Matrix identity(std::size_t n);
    static Matrix scalar(double value) { return filled(1, 1, value); }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    bool is_square() const noexcept { return rows_ == cols_; }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    // Value of a 1x1 matrix.
    double item() const;

    std::string shape_string() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double factor);
Matrix hadamard(const Matrix& a, const Matrix& b);

// Partially pivoted LU solve against the identity. Throws SingularityError
// when a pivot magnitude drops below 1e-12 * max|a|.
Matrix inverse(const Matrix& a);

double frobenius_norm(const Matrix& a);
double sum(const Matrix& a);
double max_abs(const Matrix& a);

// Throws ShapeError unless both operands have identical shape.
void require_same_shape(const Matrix& a, const Matrix& b, const char* op);
void require_square(const Matrix& a, const char* op);

} // namespace ovit
