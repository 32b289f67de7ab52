#include "ovit/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "ovit/errors.hpp"

namespace ovit {

namespace {

void check_dims(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0)
        throw ShapeError(fmt::format("matrix dimensions must be positive, got {}x{}", rows, cols));
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    check_dims(rows, cols);
    data_.assign(rows * cols, 0.0);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    check_dims(rows, cols);
    if (data_.size() != rows * cols)
        throw ShapeError(fmt::format("matrix {}x{} needs {} entries, got {}", rows, cols,
                                     rows * cols, data_.size()));
    for (std::size_t i = 0; i < data_.size(); ++i)
        if (!std::isfinite(data_[i]))
            throw ArgumentError(fmt::format("non-finite matrix entry at flat index {}", i));
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    check_dims(rows_, cols_);
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("ragged matrix literal");
        data_.insert(data_.end(), r.begin(), r.end());
    }
    for (double v : data_)
        if (!std::isfinite(v)) throw ArgumentError("non-finite matrix entry in literal");
}

Matrix Matrix::filled(std::size_t rows, std::size_t cols, double value) {
    Matrix m(rows, cols);
    std::fill(m.data_.begin(), m.data_.end(), value);
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double Matrix::item() const {
    if (rows_ != 1 || cols_ != 1)
        throw ShapeError(fmt::format("item() needs a 1x1 matrix, got {}", shape_string()));
    return data_[0];
}

std::string Matrix::shape_string() const { return fmt::format("{}x{}", rows_, cols_); }

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(fmt::format("{}: shape mismatch {} vs {}", op, a.shape_string(),
                                     b.shape_string()));
}

void require_square(const Matrix& a, const char* op) {
    if (!a.is_square())
        throw ShapeError(fmt::format("{}: expected a square matrix, got {}", op, a.shape_string()));
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError(fmt::format("matmul: {} times {}", a.shape_string(), b.shape_string()));
    const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
    Matrix c(n, p);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = c.data().data();
    // i-k-j order: each c(i,j) accumulates over k in ascending order, the
    // same order as the textbook triple loop, while the inner loop runs
    // contiguously over j.
    for (std::size_t i = 0; i < n; ++i) {
        double* crow = pc + i * p;
        for (std::size_t k = 0; k < m; ++k) {
            const double aik = pa[i * m + k];
            const double* brow = pb + k * p;
            for (std::size_t j = 0; j < p; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix c = a;
    auto out = c.data();
    auto rhs = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += rhs[i];
    return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "subtract");
    Matrix c = a;
    auto out = c.data();
    auto rhs = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= rhs[i];
    return c;
}

Matrix scale(const Matrix& a, double factor) {
    Matrix c = a;
    for (double& v : c.data()) v *= factor;
    return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix c = a;
    auto out = c.data();
    auto rhs = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= rhs[i];
    return c;
}

Matrix inverse(const Matrix& a) {
    require_square(a, "inverse");
    const std::size_t n = a.rows();
    const double threshold = 1e-12 * max_abs(a);

    std::vector<double> lu(a.data().begin(), a.data().end());
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pivot = k;
        double best = std::abs(lu[k * n + k]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::abs(lu[i * n + k]);
            if (v > best) {
                best = v;
                pivot = i;
            }
        }
        if (best <= threshold || best == 0.0)
            throw SingularityError(k, fmt::format("inverse: matrix is singular at pivot {} "
                                                  "(|pivot| = {:.3e}, threshold {:.3e})",
                                                  k, best, threshold));
        if (pivot != k) {
            std::swap_ranges(lu.begin() + k * n, lu.begin() + (k + 1) * n, lu.begin() + pivot * n);
            std::swap(perm[k], perm[pivot]);
        }
        const double inv_pivot = 1.0 / lu[k * n + k];
        for (std::size_t i = k + 1; i < n; ++i) {
            double& lik = lu[i * n + k];
            lik *= inv_pivot;
            if (lik == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) lu[i * n + j] -= lik * lu[k * n + j];
        }
    }

    // Solve L U X = P I one row block at a time, all n right-hand sides at once.
    std::vector<double> x(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) x[i * n + perm[i]] = 1.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < i; ++k) {
            const double lik = lu[i * n + k];
            if (lik == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) x[i * n + j] -= lik * x[k * n + j];
        }
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < n; ++k) {
            const double uik = lu[ii * n + k];
            if (uik == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) x[ii * n + j] -= uik * x[k * n + j];
        }
        const double inv_diag = 1.0 / lu[ii * n + ii];
        for (std::size_t j = 0; j < n; ++j) x[ii * n + j] *= inv_diag;
    }
    return Matrix(n, n, std::move(x));
}

double frobenius_norm(const Matrix& a) {
    // Entries (p, q) and (q, p) are squared and added as a pair (one exactly
    // commutative addition), pairs in (min, max) index order. A^T visits the
    // same pairs in the same order, so ||A|| and ||A^T|| agree bit for bit.
    const std::size_t r = a.rows(), c = a.cols(), n = std::max(r, c);
    auto sq = [&](std::size_t i, std::size_t j) { return i < r && j < c ? a(i, j) * a(i, j) : 0.0; };
    double acc = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        acc += sq(p, p);
        const std::size_t end = std::max(p < r ? c : 0, p < c ? r : 0);
        for (std::size_t q = p + 1; q < end; ++q) acc += sq(p, q) + sq(q, p);
    }
    return std::sqrt(acc);
}

double sum(const Matrix& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    return acc;
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

} // namespace ovit
