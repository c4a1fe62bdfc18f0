// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "atmlab/errors.hpp"
#include "atmlab/matrix.hpp"
#include "atmlab/rng.hpp"

using namespace atmlab;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -3.0,
                     double hi = 3.0) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = rng.uniform(lo, hi);
    return m;
}

// Independent reference product, deliberately the dumbest possible loop.
Matrix matmul_naive(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k)
                s += a.at(i, k) * b.at(k, j);
            c.at(i, j) = s;
        }
    return c;
}

}  // namespace

TEST_CASE("matrix construction rejects bad shapes") {
    CHECK_THROWS_AS(Matrix(0, 3), ContractError);
    CHECK_THROWS_AS(Matrix(3, 0), ContractError);
    CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1.0, 2.0, 3.0}),
                    ContractError);
    CHECK_THROWS_AS(Matrix({{1.0, 2.0}, {3.0}}), ContractError);
}

TEST_CASE("matmul against hand values") {
    const Matrix id{{1, 0}, {0, 1}};
    const Matrix a{{1, 2}, {3, 4}};
    CHECK(matmul(id, a) == a);

    const Matrix row{{1, 2}};
    const Matrix col{{3}, {4}};
    const Matrix dot = matmul(row, col);
    CHECK(dot.rows() == 1);
    CHECK(dot.cols() == 1);
    CHECK(dot.at(0, 0) == 11.0);
}

TEST_CASE("matmul matches the naive triple loop") {
    Rng rng(2026, 11);
    SUBCASE("fixed 5x7 by 7x3") {
        const Matrix a = random_matrix(rng, 5, 7);
        const Matrix b = random_matrix(rng, 7, 3);
        const Matrix got = matmul(a, b);
        const Matrix want = matmul_naive(a, b);
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(std::fabs(got.data()[i] - want.data()[i]) < 1e-12);
    }
    SUBCASE("random shapes up to 32x32") {
        for (int trial = 0; trial < 25; ++trial) {
            const std::size_t n = 1 + rng.next_below(32);
            const std::size_t k = 1 + rng.next_below(32);
            const std::size_t m = 1 + rng.next_below(32);
            const Matrix a = random_matrix(rng, n, k);
            const Matrix b = random_matrix(rng, k, m);
            const Matrix got = matmul(a, b);
            const Matrix want = matmul_naive(a, b);
            for (std::size_t i = 0; i < got.size(); ++i)
                REQUIRE(std::fabs(got.data()[i] - want.data()[i]) < 1e-12);
        }
    }
}

TEST_CASE("dimension errors name both shapes") {
    const Matrix a(2, 3);
    const Matrix b(4, 5);
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
        CHECK(msg.find("4x5") != std::string::npos);
    }
    CHECK_THROWS_AS(add(a, b), DimensionError);
    CHECK_THROWS_AS(sub(a, b), DimensionError);
    CHECK_THROWS_AS(hadamard(a, b), DimensionError);
    CHECK_THROWS_AS(mse(a, b), DimensionError);
    CHECK_THROWS_AS(add_rowvec(a, Matrix(1, 5)), DimensionError);
}

TEST_CASE("softmax_rows hand values") {
    const Matrix uniform = softmax_rows(Matrix{{0, 0}});
    CHECK(uniform.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(uniform.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));

    // exp(1)/(exp(1)+exp(2)+exp(3)) and friends, worked out by hand.
    const Matrix probs = softmax_rows(Matrix{{1, 2, 3}});
    CHECK(probs.at(0, 0) == doctest::Approx(0.09003057).epsilon(1e-7));
    CHECK(probs.at(0, 1) == doctest::Approx(0.24472847).epsilon(1e-7));
    CHECK(probs.at(0, 2) == doctest::Approx(0.66524096).epsilon(1e-7));

    double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
    const double z = e1 + e2 + e3;
    CHECK(std::fabs(probs.at(0, 0) - e1 / z) < 1e-15);
    CHECK(std::fabs(probs.at(0, 1) - e2 / z) < 1e-15);
    CHECK(std::fabs(probs.at(0, 2) - e3 / z) < 1e-15);

    const Matrix big = softmax_rows(Matrix{{1000, 1000}});
    CHECK(big.at(0, 0) == 0.5);
    CHECK(big.at(0, 1) == 0.5);
}

TEST_CASE("softmax_rows rows sum to one and shifts cancel") {
    Rng rng(2026, 13);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t r = 1 + rng.next_below(8);
        const std::size_t c = 1 + rng.next_below(12);
        const Matrix x = random_matrix(rng, r, c, -50.0, 50.0);
        const Matrix y = softmax_rows(x);
        for (std::size_t i = 0; i < r; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                REQUIRE(y.at(i, j) >= 0.0);
                s += y.at(i, j);
            }
            REQUIRE(std::fabs(s - 1.0) < 1e-12);
        }
        const double shift = rng.uniform(-100.0, 100.0);
        Matrix xs = x;
        for (std::size_t i = 0; i < xs.size(); ++i) xs.data()[i] += shift;
        const Matrix ys = softmax_rows(xs);
        for (std::size_t i = 0; i < y.size(); ++i)
            REQUIRE(std::fabs(y.data()[i] - ys.data()[i]) < 1e-12);
    }
}

TEST_CASE("structural ops") {
    CHECK(transpose(Matrix{{1, 2}, {3, 4}}) == Matrix{{1, 3}, {2, 4}});
    CHECK(mean_pool_rows(Matrix{{2, 0}, {0, 2}}) == Matrix{{1, 1}});
    CHECK(relu(Matrix{{-1, 2}}) == Matrix{{0, 2}});
    CHECK(scale(Matrix{{1, -2}}, -0.5) == Matrix{{-0.5, 1}});
    CHECK(add_rowvec(Matrix{{1, 1}, {2, 2}}, Matrix{{10, 20}}) ==
          Matrix{{11, 21}, {12, 22}});
    CHECK(colsum(Matrix{{1, 2}, {3, 4}}) == Matrix{{4, 6}});

    const Matrix parts[] = {Matrix{{1, 2}}, Matrix{{3, 4}, {5, 6}}};
    CHECK(concat_rows(parts) == Matrix{{1, 2}, {3, 4}, {5, 6}});
    const Matrix ragged[] = {Matrix{{1, 2}}, Matrix{{3}}};
    CHECK_THROWS_AS(concat_rows(ragged), DimensionError);

    CHECK(transpose(transpose(Matrix{{1, 2, 3}, {4, 5, 6}})) ==
          Matrix{{1, 2, 3}, {4, 5, 6}});
}

TEST_CASE("reductions") {
    CHECK(sum_all(Matrix{{1, 2}, {3, 4}}) == 10.0);
    CHECK(mse(Matrix{{1, 2}}, Matrix{{1, 2}}) == 0.0);
    CHECK(mse(Matrix{{0, 0}}, Matrix{{2, 4}}) == 10.0);
    CHECK(max_abs(Matrix{{-7, 3}}) == 7.0);
    CHECK(argmax_row(Matrix{{1, 5, 5, 2}}) == 1);  // ties break low
    CHECK(argmax_row(Matrix{{3, 1}}) == 0);
}

TEST_CASE("non-finite results are rejected") {
    const Matrix big{{1e308, 1e308}};
    CHECK_THROWS_AS(add(big, big), NumericError);
    CHECK_THROWS_AS(scale(big, 10.0), NumericError);
}
