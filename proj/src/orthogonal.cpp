#include "ovit/orthogonal.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "ovit/errors.hpp"

namespace ovit {

namespace {

double max_skew_defect(const Matrix& m) {
    double worst = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i; j < m.cols(); ++j)
            worst = std::max(worst, std::abs(m(i, j) + m(j, i)));
    return worst;
}

// 2 (E + m)^-1 - E, shared by the forward and inverse Cayley maps.
Matrix cayley_formula(const Matrix& m) {
    const Matrix eye = Matrix::identity(m.rows());
    return subtract(scale(inverse(add(eye, m)), 2.0), eye);
}

} // namespace

double orthogonality_tolerance(std::size_t n) { return 1e-10 * std::sqrt(static_cast<double>(n)); }

SkewMatrix SkewMatrix::checked(Matrix inner) {
    require_square(inner, "SkewMatrix");
    const double defect = max_skew_defect(inner);
    if (defect > 1e-12)
        throw PreconditionError(
            fmt::format("SkewMatrix: |x + x^T| reaches {:.3e}, exceeds 1e-12", defect));
    return SkewMatrix(std::move(inner));
}

OrthogonalMatrix OrthogonalMatrix::checked(Matrix inner, double tolerance) {
    require_square(inner, "OrthogonalMatrix");
    if (tolerance < 0.0) tolerance = orthogonality_tolerance(inner.rows());
    const double err = orthogonality_error(inner);
    if (err > tolerance)
        throw PreconditionError(fmt::format(
            "OrthogonalMatrix: ||W^T W - E||_F = {:.3e} exceeds {:.3e}", err, tolerance));
    return OrthogonalMatrix(std::move(inner));
}

SkewMatrix skew_symmetrize(const Matrix& w) {
    require_square(w, "skew_symmetrize");
    return SkewMatrix::unchecked(subtract(w, transpose(w)));
}

OrthogonalMatrix cayley(const SkewMatrix& x) {
    try {
        return OrthogonalMatrix::unchecked(cayley_formula(x.matrix()));
    } catch (const SingularityError& e) {
        // E + X is invertible for every real skew X; reaching here means the
        // SkewMatrix invariant was broken upstream.
        throw std::logic_error(fmt::format("cayley: E + X singular for a skew input: {}", e.what()));
    }
}

SkewMatrix cayley_inverse(const OrthogonalMatrix& y) {
    Matrix x = cayley_formula(y.matrix());
    // Exact arithmetic gives a skew result; keep only the antisymmetric part
    // so roundoff cannot break the SkewMatrix invariant.
    const std::size_t n = x.rows();
    for (std::size_t i = 0; i < n; ++i) {
        x(i, i) = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double a = 0.5 * (x(i, j) - x(j, i));
            x(i, j) = a;
            x(j, i) = -a;
        }
    }
    return SkewMatrix::unchecked(std::move(x));
}

int exp_squarings(const Matrix& x) {
    double norm = frobenius_norm(x);
    int s = 0;
    while (norm > 0.5) {
        norm *= 0.5;
        ++s;
    }
    return s;
}

OrthogonalMatrix matrix_exp(const SkewMatrix& x) {
    const Matrix& a = x.matrix();
    const int s = exp_squarings(a);
    const Matrix scaled = scale(a, std::ldexp(1.0, -s));

    Matrix result = Matrix::identity(a.rows());
    Matrix term = result;
    for (int k = 1; k <= kExpMaxTerms; ++k) {
        term = scale(matmul(term, scaled), 1.0 / k);
        result = add(result, term);
        if (frobenius_norm(term) < kExpTermTolerance) break;
    }
    for (int i = 0; i < s; ++i) result = matmul(result, result);
    return OrthogonalMatrix::unchecked(std::move(result));
}

double orthogonality_error(const Matrix& w) {
    require_square(w, "orthogonality_error");
    return frobenius_norm(subtract(matmul(transpose(w), w), Matrix::identity(w.rows())));
}

double orth_penalty(const Matrix& w) {
    require_square(w, "orth_penalty");
    const double f = frobenius_norm(subtract(matmul(w, transpose(w)), Matrix::identity(w.rows())));
    return f * f;
}

Matrix tangent_project(const OrthogonalMatrix& w, const Matrix& g) {
    const Matrix& wm = w.matrix();
    require_same_shape(wm, g, "tangent_project");
    const Matrix wt_g = matmul(transpose(wm), g);
    return matmul(wm, scale(subtract(wt_g, transpose(wt_g)), 0.5));
}

Matrix qr_orthonormal(const Matrix& a) {
    require_square(a, "qr_orthonormal");
    const std::size_t n = a.rows();
    Matrix r = a;
    std::vector<std::vector<double>> reflectors;
    reflectors.reserve(n);

    for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> v(n - k);
        double norm = 0.0;
        for (std::size_t i = k; i < n; ++i) {
            v[i - k] = r(i, k);
            norm += v[i - k] * v[i - k];
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            reflectors.emplace_back();
            continue;
        }
        v[0] += v[0] >= 0.0 ? norm : -norm;
        double vnorm = 0.0;
        for (double e : v) vnorm += e * e;
        vnorm = std::sqrt(vnorm);
        for (double& e : v) e /= vnorm;
        // R <- (I - 2 v v^T) R on rows k.. and columns k..
        for (std::size_t j = k; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t i = k; i < n; ++i) dot += v[i - k] * r(i, j);
            for (std::size_t i = k; i < n; ++i) r(i, j) -= 2.0 * v[i - k] * dot;
        }
        reflectors.push_back(std::move(v));
    }

    // Q = H_0 H_1 ... H_{n-1} E, accumulated right to left.
    Matrix q = Matrix::identity(n);
    for (std::size_t k = n; k-- > 0;) {
        const auto& v = reflectors[k];
        if (v.empty()) continue;
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t i = k; i < n; ++i) dot += v[i - k] * q(i, j);
            for (std::size_t i = k; i < n; ++i) q(i, j) -= 2.0 * v[i - k] * dot;
        }
    }

    // Flip columns so that diag(R) is positive.
    for (std::size_t j = 0; j < n; ++j)
        if (r(j, j) < 0.0)
            for (std::size_t i = 0; i < n; ++i) q(i, j) = -q(i, j);
    return q;
}

OrthogonalMatrix retract(const OrthogonalMatrix& w, const Matrix& h, double step) {
    const Matrix& wm = w.matrix();
    require_same_shape(wm, h, "retract");
    const double tol = 1e-8 * std::max(1.0, frobenius_norm(h));
    const double defect = max_skew_defect(matmul(transpose(wm), h));
    if (defect > tol)
        throw PreconditionError(fmt::format(
            "retract: direction is not tangent, |W^T H + H^T W| reaches {:.3e} (tolerance {:.3e})",
            defect, tol));
    if (step == 0.0 || max_abs(h) == 0.0) return w;
    return OrthogonalMatrix::unchecked(qr_orthonormal(add(wm, scale(h, step))));
}

} // namespace ovit
