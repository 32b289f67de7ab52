#pragma once

// Maps between arbitrary square matrices, the skew-symmetric Lie algebra
// so(n), and the orthogonal group O(n).
//
//   skew_symmetrize   W        -> W - W^T                (any W lands in so(n))
//   cayley            X        -> 2 (E + X)^-1 - E       (so(n) -> O(n))
//   cayley_inverse    Y        -> 2 (E + Y)^-1 - E       (same formula, O(n) -> so(n))
//   matrix_exp        X        -> exp(X)                 (scaling and squaring)
//
// The Cayley map only reaches orthogonal matrices without eigenvalue -1, so
// cayley_inverse raises SingularityError on e.g. -E, and the det = -1
// component of O(n) is never produced.
//
// Also houses the two baselines the parameterization is compared against:
// the Riemannian projection + QR retraction, and the soft penalty
// ||W W^T - E||_F^2.

#include <cstddef>
#include <utility>

#include "ovit/matrix.hpp"

namespace ovit {

class SkewMatrix {
public:
    // Validates inner + inner^T == 0 within 1e-12 per entry.
    static SkewMatrix checked(Matrix inner);
    // For values skew-symmetric by construction (e.g. W - W^T).
    static SkewMatrix unchecked(Matrix inner) { return SkewMatrix(std::move(inner)); }

    const Matrix& matrix() const noexcept { return inner_; }
    std::size_t dim() const noexcept { return inner_.rows(); }

private:
    explicit SkewMatrix(Matrix inner) : inner_(std::move(inner)) {}
    Matrix inner_;
};

class OrthogonalMatrix {
public:
    // Validates ||inner^T inner - E||_F <= tolerance (default 1e-10 sqrt(n)).
    static OrthogonalMatrix checked(Matrix inner, double tolerance = -1.0);
    // For values orthogonal by construction (Cayley, exp, QR outputs).
    static OrthogonalMatrix unchecked(Matrix inner) { return OrthogonalMatrix(std::move(inner)); }

    const Matrix& matrix() const noexcept { return inner_; }
    std::size_t dim() const noexcept { return inner_.rows(); }

private:
    explicit OrthogonalMatrix(Matrix inner) : inner_(std::move(inner)) {}
    Matrix inner_;
};

// 1e-10 * sqrt(n): the orthogonality bound every structural output must meet.
double orthogonality_tolerance(std::size_t n);

SkewMatrix skew_symmetrize(const Matrix& w);
OrthogonalMatrix cayley(const SkewMatrix& x);
SkewMatrix cayley_inverse(const OrthogonalMatrix& y);

// Number of squarings s with ||x||_F / 2^s <= 0.5.
int exp_squarings(const Matrix& x);
// Taylor terms are summed until the Frobenius norm of the last term drops below this.
inline constexpr double kExpTermTolerance = 1e-16;
inline constexpr int kExpMaxTerms = 40;
OrthogonalMatrix matrix_exp(const SkewMatrix& x);

// ||w^T w - E||_F
double orthogonality_error(const Matrix& w);
// ||w w^T - E||_F^2
double orth_penalty(const Matrix& w);

// Riemannian gradient on O(n): w (w^T g - g^T w) / 2.
Matrix tangent_project(const OrthogonalMatrix& w, const Matrix& g);

// Orthonormal factor Q of a = Q R with diag(R) > 0 (Householder).
Matrix qr_orthonormal(const Matrix& a);

// QR retraction of w + step * h. Throws PreconditionError unless w^T h is
// skew within 1e-8 * max(1, ||h||_F).
OrthogonalMatrix retract(const OrthogonalMatrix& w, const Matrix& h, double step);

} // namespace ovit
