#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "ovit/errors.hpp"
#include "ovit/matrix.hpp"
#include "support.hpp"

using namespace ovit;
using ovit::testing::near;
using ovit::testing::random_matrix;

TEST(Matrix, ConstructionChecksLengthAndFiniteness) {
    EXPECT_THROW(Matrix(2, 2, {1, 2, 3}), ShapeError);
    EXPECT_THROW(Matrix(1, 2, {1, std::numeric_limits<double>::quiet_NaN()}), ArgumentError);
    EXPECT_THROW(Matrix(1, 1, {std::numeric_limits<double>::infinity()}), ArgumentError);
    const Matrix m{{1, 2, 3}, {4, 5, 6}};
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_EQ(m.cols(), 3u);
    EXPECT_EQ(m(1, 2), 6.0);
}

TEST(Matrix, MatmulHandExample) {
    EXPECT_EQ(matmul(Matrix{{1, 2}, {3, 4}}, Matrix{{5, 6}, {7, 8}}), (Matrix{{19, 22}, {43, 50}}));
}

TEST(Matrix, MatmulIdentityAndZero) {
    Rng rng(1);
    const Matrix a = random_matrix(3, 5, rng);
    EXPECT_EQ(matmul(a, Matrix::identity(5)), a);
    EXPECT_EQ(matmul(a, Matrix::zeros(5, 2)), Matrix::zeros(3, 2));
    EXPECT_THROW(matmul(a, a), ShapeError);
}

TEST(Matrix, MatmulIsAssociative) {
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const Matrix a = random_matrix(4, 6, rng), b = random_matrix(6, 3, rng), c = random_matrix(3, 5, rng);
        const Matrix left = matmul(matmul(a, b), c), right = matmul(a, matmul(b, c));
        EXPECT_LE(frobenius_norm(subtract(left, right)), 1e-9 * frobenius_norm(left));
    }
}

TEST(Matrix, InverseExamples) {
    EXPECT_EQ(inverse(Matrix::identity(3)), Matrix::identity(3));
    EXPECT_TRUE(near(inverse(Matrix{{2, 0}, {0, 4}}), Matrix{{0.5, 0}, {0, 0.25}}, 1e-15));
    EXPECT_THROW(inverse(Matrix{{1, 2}, {2, 4}}), SingularityError);
    EXPECT_THROW(inverse(Matrix::zeros(2, 2)), SingularityError);
    EXPECT_THROW(inverse(Matrix::zeros(2, 3)), ShapeError);
}

TEST(Matrix, InverseOfInverseRecoversWellConditionedInput) {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        // Diagonally dominant, so the condition number stays small.
        Matrix a = random_matrix(6, 6, rng);
        for (std::size_t i = 0; i < 6; ++i) a(i, i) += 8.0;
        const Matrix back = inverse(inverse(a));
        EXPECT_LE(frobenius_norm(subtract(back, a)), 1e-8 * frobenius_norm(a));
        EXPECT_TRUE(near(matmul(a, inverse(a)), Matrix::identity(6), 1e-12));
    }
}

TEST(Matrix, FrobeniusNorm) {
    EXPECT_DOUBLE_EQ(frobenius_norm(Matrix::identity(2)), std::sqrt(2.0));
    EXPECT_EQ(frobenius_norm(Matrix{{3, 4}, {0, 0}}), 5.0);
    EXPECT_EQ(frobenius_norm(Matrix::zeros(3, 3)), 0.0);
}

TEST(Matrix, FrobeniusNormOfTransposeIsExactlyEqual) {
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
        const Matrix a = random_matrix(1 + rng.below(9), 1 + rng.below(9), rng);
        EXPECT_EQ(frobenius_norm(a), frobenius_norm(transpose(a)));
    }
}

TEST(Matrix, ElementwiseHelpers) {
    const Matrix a{{1, -2}, {3, 4}}, b{{5, 6}, {7, -8}};
    EXPECT_EQ(add(a, b), (Matrix{{6, 4}, {10, -4}}));
    EXPECT_EQ(subtract(a, b), (Matrix{{-4, -8}, {-4, 12}}));
    EXPECT_EQ(hadamard(a, b), (Matrix{{5, -12}, {21, -32}}));
    EXPECT_EQ(scale(a, 2), (Matrix{{2, -4}, {6, 8}}));
    EXPECT_EQ(transpose(a), (Matrix{{1, 3}, {-2, 4}}));
    EXPECT_EQ(sum(a), 6.0);
    EXPECT_EQ(max_abs(b), 8.0);
    EXPECT_EQ(Matrix::scalar(2.5).item(), 2.5);
    EXPECT_THROW(a.item(), ShapeError);
    EXPECT_THROW(add(a, Matrix::zeros(2, 3)), ShapeError);
}
