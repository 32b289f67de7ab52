#pragma once

#include <cmath>
#include <cstddef>

#include <gtest/gtest.h>

#include "ovit/matrix.hpp"
#include "ovit/random.hpp"

namespace ovit::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double amp = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-amp, amp);
    return m;
}

inline ::testing::AssertionResult near(const Matrix& a, const Matrix& b, double tol) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        return ::testing::AssertionFailure() << "shape " << a.shape_string() << " vs " << b.shape_string();
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (!(std::abs(a(i, j) - b(i, j)) <= tol))
                return ::testing::AssertionFailure()
                       << "(" << i << "," << j << "): " << a(i, j) << " vs " << b(i, j) << " tol " << tol;
    return ::testing::AssertionSuccess();
}

} // namespace ovit::testing
