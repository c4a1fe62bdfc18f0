// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstring>
#include <vector>

#include "atmlab/errors.hpp"
#include "atmlab/kernels.hpp"
#include "atmlab/rng.hpp"

using namespace atmlab;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-2.0, 2.0);
    return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("scalar matmul matches a hand-worked product") {
    const auto& k = kernels::scalar_table();
    // [[1,2],[3,4]] * [[5,6],[7,8]] = [[19,22],[43,50]]
    const double a[] = {1, 2, 3, 4};
    const double b[] = {5, 6, 7, 8};
    double c[4];
    k.matmul(a, b, c, 2, 2, 2);
    CHECK(c[0] == 19.0);
    CHECK(c[1] == 22.0);
    CHECK(c[2] == 43.0);
    CHECK(c[3] == 50.0);
}

TEST_CASE("scalar elementwise kernels") {
    const auto& k = kernels::scalar_table();
    const double a[] = {1.0, -2.0, 3.0};
    const double b[] = {0.5, 4.0, -1.0};
    double out[3];

    k.add(a, b, out, 3);
    CHECK(out[1] == 2.0);
    k.sub(a, b, out, 3);
    CHECK(out[0] == 0.5);
    k.mul(a, b, out, 3);
    CHECK(out[2] == -3.0);
    k.scale(a, 2.0, out, 3);
    CHECK(out[1] == -4.0);
    k.axpby(2.0, a, 3.0, b, out, 3);
    CHECK(out[0] == 3.5);
    k.relu(a, out, 3);
    CHECK(out[1] == 0.0);
    CHECK(out[2] == 3.0);
    const double dy[] = {10.0, 10.0, 10.0};
    k.relu_mask(a, dy, out, 3);
    CHECK(out[0] == 10.0);
    CHECK(out[1] == 0.0);
}

TEST_CASE("simd and scalar kernels are bit-identical") {
    if (!kernels::cpu_supports(kernels::Simd::kAvx2)) {
        MESSAGE("no AVX2 on this host, skipping equivalence checks");
        return;
    }
    const auto& s = kernels::scalar_table();
    const auto& v = kernels::avx2_table();
    Rng rng(2026, 7);

    // Sizes straddle the vector width so both full lanes and tails run.
    const std::size_t dims[] = {1, 2, 3, 4, 5, 7, 8, 9, 16, 17, 31, 33};
    for (std::size_t n : dims) {
        for (std::size_t k : dims) {
            for (std::size_t m : dims) {
                auto a = random_vec(rng, n * k);
                auto b = random_vec(rng, k * m);
                std::vector<double> cs(n * m), cv(n * m);
                s.matmul(a.data(), b.data(), cs.data(), n, k, m);
                v.matmul(a.data(), b.data(), cv.data(), n, k, m);
                CAPTURE(n);
                CAPTURE(k);
                CAPTURE(m);
                REQUIRE(bit_equal(cs, cv));
            }
        }
    }

    for (std::size_t n : {1u, 3u, 4u, 5u, 8u, 100u, 1003u}) {
        auto a = random_vec(rng, n);
        auto b = random_vec(rng, n);
        std::vector<double> os(n), ov(n);
        CAPTURE(n);
        s.add(a.data(), b.data(), os.data(), n);
        v.add(a.data(), b.data(), ov.data(), n);
        REQUIRE(bit_equal(os, ov));
        s.sub(a.data(), b.data(), os.data(), n);
        v.sub(a.data(), b.data(), ov.data(), n);
        REQUIRE(bit_equal(os, ov));
        s.mul(a.data(), b.data(), os.data(), n);
        v.mul(a.data(), b.data(), ov.data(), n);
        REQUIRE(bit_equal(os, ov));
        s.scale(a.data(), 1.7, os.data(), n);
        v.scale(a.data(), 1.7, ov.data(), n);
        REQUIRE(bit_equal(os, ov));
        s.axpby(0.9, a.data(), 0.1, b.data(), os.data(), n);
        v.axpby(0.9, a.data(), 0.1, b.data(), ov.data(), n);
        REQUIRE(bit_equal(os, ov));
        s.relu(a.data(), os.data(), n);
        v.relu(a.data(), ov.data(), n);
        REQUIRE(bit_equal(os, ov));
        s.relu_mask(a.data(), b.data(), os.data(), n);
        v.relu_mask(a.data(), b.data(), ov.data(), n);
        REQUIRE(bit_equal(os, ov));
    }
}

TEST_CASE("force pins the active table") {
    kernels::force(kernels::Simd::kScalar);
    CHECK(std::string(kernels::active().name) == "scalar");
    if (kernels::cpu_supports(kernels::Simd::kAvx2)) {
        kernels::force(kernels::Simd::kAvx2);
        CHECK(std::string(kernels::active().name) == "avx2");
        kernels::force(kernels::Simd::kScalar);
    }
}
