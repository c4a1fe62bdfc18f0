// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <optional>
#include <vector>

#include "atmlab/atm.hpp"
#include "atmlab/errors.hpp"
#include "atmlab/matrix.hpp"
#include "atmlab/rng.hpp"
#include "atmlab/tape.hpp"
#include "gradcheck.hpp"

using namespace atmlab;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = rng.uniform(-2.0, 2.0);
    return m;
}

// Reference retrieval: per query row, scalar softmax over slot dot
// products, then an explicit weighted sum of memory rows.
RetrievalResult retrieve_naive(const Matrix& item, const Matrix& q) {
    const std::size_t l = q.rows(), m = item.rows(), c = item.cols();
    Matrix w(l, m);
    Matrix r(l, c);
    for (std::size_t i = 0; i < l; ++i) {
        std::vector<double> logits(m, 0.0);
        for (std::size_t k = 0; k < m; ++k) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += q.at(i, j) * item.at(k, j);
            logits[k] = dot / std::sqrt(double(c));
        }
        double mx = logits[0];
        for (double v : logits) mx = std::max(mx, v);
        double z = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            w.at(i, k) = std::exp(logits[k] - mx);
            z += w.at(i, k);
        }
        for (std::size_t k = 0; k < m; ++k) w.at(i, k) /= z;
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t j = 0; j < c; ++j)
                r.at(i, j) += w.at(i, k) * item.at(k, j);
    }
    return RetrievalResult{r, w};
}

// Reference EMA write: every memory row becomes a convex blend of itself
// and the column-normalized attention pull of the query rows.
Matrix update_naive(const Matrix& item, const Matrix& q, const Matrix& w,
                    double alpha, double eps) {
    const std::size_t l = q.rows(), m = item.rows(), c = item.cols();
    Matrix out(m, c);
    for (std::size_t k = 0; k < m; ++k) {
        double colsum = 0.0;
        for (std::size_t i = 0; i < l; ++i) colsum += w.at(i, k);
        const double denom = std::max(colsum, eps);
        for (std::size_t j = 0; j < c; ++j) {
            double pulled = 0.0;
            for (std::size_t i = 0; i < l; ++i)
                pulled += (w.at(i, k) / denom) * q.at(i, j);
            out.at(k, j) = alpha * pulled + (1.0 - alpha) * item.at(k, j);
        }
    }
    return out;
}

MemoryBank small_bank(double alpha = 0.1) {
    Rng rng(7, 7);
    return make_memory_bank(3, 4, 2, alpha, rng);
}

}  // namespace

TEST_CASE("uniform attention over orthonormal slots") {
    MemoryBank bank;
    bank.items.push_back(Matrix{{1, 0}, {0, 1}});
    const RetrievalResult r = retrieve(bank, 0, Matrix{{0, 0}});
    CHECK(r.weights.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.weights.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.retrieved.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.retrieved.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("peaked attention follows the aligned slot") {
    MemoryBank bank;
    bank.items.push_back(Matrix{{1, 0}, {0, 1}});
    const RetrievalResult r = retrieve(bank, 0, Matrix{{10, 0}});
    // logits are [10, 0] / sqrt(2); recompute the two-way softmax here.
    const double a = 10.0 / std::sqrt(2.0);
    const double w0 = 1.0 / (1.0 + std::exp(-a));
    CHECK(r.weights.at(0, 0) == doctest::Approx(w0).epsilon(1e-12));
    CHECK(r.weights.at(0, 0) == doctest::Approx(0.99915).epsilon(1e-4));
    CHECK(r.weights.at(0, 1) == doctest::Approx(1.0 - w0).epsilon(1e-9));
    CHECK(r.retrieved.at(0, 0) == doctest::Approx(w0).epsilon(1e-12));
}

TEST_CASE("retrieval matches the naive loop oracle") {
    Rng rng(2026, 31);
    Rng init(2026, 32);
    MemoryBank bank = make_memory_bank(2, 8, 16, 0.1, init);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix q = random_matrix(rng, 4, 16);
        const RetrievalResult got = retrieve(bank, trial % 2, q);
        const RetrievalResult want = retrieve_naive(bank.items[trial % 2], q);
        for (std::size_t i = 0; i < got.weights.size(); ++i)
            REQUIRE(std::fabs(got.weights.data()[i] - want.weights.data()[i]) <
                    1e-12);
        for (std::size_t i = 0; i < got.retrieved.size(); ++i)
            REQUIRE(std::fabs(got.retrieved.data()[i] -
                              want.retrieved.data()[i]) < 1e-12);
        double rowsum = 0.0;
        for (std::size_t k = 0; k < got.weights.cols(); ++k)
            rowsum += got.weights.at(0, k);
        REQUIRE(std::fabs(rowsum - 1.0) < 1e-12);
    }
}

TEST_CASE("retrieval never mutates the bank") {
    MemoryBank bank = small_bank();
    const std::vector<Matrix> before = bank.items;
    Rng rng(1, 2);
    (void)retrieve(bank, 1, random_matrix(rng, 5, 2));
    CHECK(bank.items == before);
    bank.frozen = true;
    (void)retrieve(bank, 2, random_matrix(rng, 5, 2));
    CHECK(bank.items == before);
}

TEST_CASE("retrieval errors") {
    MemoryBank bank = small_bank();
    Rng rng(1, 3);
    CHECK_THROWS_AS(retrieve(bank, 3, random_matrix(rng, 2, 2)), RoutingError);
    CHECK_THROWS_AS(retrieve(bank, 0, random_matrix(rng, 2, 5)),
                    DimensionError);
}

TEST_CASE("column normalization floors tiny denominators") {
    const Matrix w{{0.6, 1e-12}, {0.6, 1e-12}};
    const Matrix n = column_normalize(w, 1e-8);
    // Healthy column sums to one; starved column is scaled by raw/eps
    // instead of being amplified to one.
    CHECK(n.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(n.at(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(n.at(0, 1) == doctest::Approx(1e-12 / 1e-8).epsilon(1e-9));
    CHECK(n.at(0, 1) + n.at(1, 1) < 1.0);
}

TEST_CASE("column normalization properties on attention weights") {
    Rng rng(2026, 33);
    Rng init(2026, 34);
    MemoryBank bank = make_memory_bank(1, 6, 4, 0.1, init);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix q = random_matrix(rng, 5, 4);
        const RetrievalResult r = retrieve(bank, 0, q);
        const Matrix n = column_normalize(r.weights, bank.epsilon_norm);
        for (std::size_t i = 0; i < n.size(); ++i) {
            REQUIRE(n.data()[i] >= 0.0);
            REQUIRE(n.data()[i] <= 1.0);
        }
        const Matrix sums = colsum(n);
        const Matrix raw = colsum(r.weights);
        for (std::size_t k = 0; k < n.cols(); ++k) {
            REQUIRE(sums.at(0, k) <= 1.0 + 1e-9);
            if (raw.at(0, k) >= bank.epsilon_norm)
                REQUIRE(sums.at(0, k) == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("ema update identities") {
    SUBCASE("alpha zero is the identity") {
        MemoryBank bank = small_bank(0.0);
        const std::vector<Matrix> before = bank.items;
        Rng rng(4, 4);
        const Matrix q = random_matrix(rng, 3, 2);
        const RetrievalResult r = retrieve(bank, 1, q);
        update(bank, 1, q, r.weights);
        CHECK(bank.items == before);
    }
    SUBCASE("alpha one with one query row copies the row everywhere") {
        MemoryBank bank = small_bank(1.0);
        const Matrix q{{2.5, -1.5}};
        const RetrievalResult r = retrieve(bank, 0, q);
        update(bank, 0, q, r.weights);
        for (std::size_t k = 0; k < bank.items[0].rows(); ++k) {
            CHECK(bank.items[0].at(k, 0) == doctest::Approx(2.5).epsilon(1e-12));
            CHECK(bank.items[0].at(k, 1) == doctest::Approx(-1.5).epsilon(1e-12));
        }
    }
    SUBCASE("hand-worked half step") {
        MemoryBank bank;
        bank.alpha = 0.5;
        bank.items.push_back(Matrix{{0.0}, {0.0}});
        update(bank, 0, Matrix{{2.0}, {4.0}}, Matrix{{1, 0}, {0, 1}});
        CHECK(bank.items[0].at(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(bank.items[0].at(1, 0) == doctest::Approx(2.0).epsilon(1e-15));
    }
}

TEST_CASE("ema update matches the naive reference") {
    Rng rng(2026, 35);
    Rng init(2026, 36);
    MemoryBank bank = make_memory_bank(3, 5, 4, 0.3, init);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t task = trial % 3;
        const Matrix q = random_matrix(rng, 6, 4);
        const RetrievalResult r = retrieve(bank, task, q);
        const Matrix want = update_naive(bank.items[task], q, r.weights,
                                         bank.alpha, bank.epsilon_norm);
        const std::vector<Matrix> others_before = bank.items;
        update(bank, task, q, r.weights);
        for (std::size_t i = 0; i < want.size(); ++i)
            REQUIRE(std::fabs(bank.items[task].data()[i] - want.data()[i]) <
                    1e-13);
        for (std::size_t j = 0; j < bank.items.size(); ++j)
            if (j != task) REQUIRE(bank.items[j] == others_before[j]);
    }
}

TEST_CASE("updates stay inside the input bounds") {
    Rng rng(2026, 37);
    Rng init(2026, 38);
    MemoryBank bank = make_memory_bank(1, 6, 3, 0.4, init);
    for (int step = 0; step < 50; ++step) {
        const Matrix q = random_matrix(rng, 5, 3);
        const double bound = std::max(max_abs(bank.items[0]), max_abs(q));
        const RetrievalResult r = retrieve(bank, 0, q);
        update(bank, 0, q, r.weights);
        REQUIRE(max_abs(bank.items[0]) <= bound + 1e-12);
    }
}

TEST_CASE("repeated constant updates converge geometrically") {
    Rng rng(2026, 39);
    Rng init(2026, 40);
    MemoryBank bank = make_memory_bank(1, 4, 3, 0.25, init);
    const Matrix q = random_matrix(rng, 5, 3);
    const Matrix w = retrieve(bank, 0, q).weights;
    const Matrix target = matmul(
        transpose(column_normalize(w, bank.epsilon_norm)), q);
    double prev = max_abs(sub(bank.items[0], target));
    for (int step = 0; step < 20; ++step) {
        update(bank, 0, q, w);
        const double dist = max_abs(sub(bank.items[0], target));
        REQUIRE(dist <= (1.0 - bank.alpha) * prev + 1e-12);
        prev = dist;
    }
    CHECK(prev < 1e-2);
}

TEST_CASE("update errors") {
    MemoryBank bank = small_bank();
    Rng rng(9, 9);
    const Matrix q = random_matrix(rng, 3, 2);
    const Matrix w = retrieve(bank, 0, q).weights;
    bank.frozen = true;
    CHECK_THROWS_AS(update(bank, 0, q, w), StateError);
    bank.frozen = false;
    CHECK_THROWS_AS(update(bank, 5, q, w), RoutingError);
    CHECK_THROWS_AS(update(bank, 0, q, Matrix(3, 7)), DimensionError);
    CHECK_THROWS_AS(update(bank, 0, Matrix(2, 2), w), DimensionError);
}

TEST_CASE("zero gate is uniform and routes to class zero") {
    GateClassifier gate{Matrix(2, 8), Matrix(1, 8), Matrix(8, 3), Matrix(1, 3)};
    Rng rng(3, 3);
    const GateDecision d = gate_predict(gate, random_matrix(rng, 4, 2));
    CHECK(d.task == 0);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(d.probs.at(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("gate distribution sums to one for random gates") {
    Rng rng(2026, 41);
    for (int trial = 0; trial < 10; ++trial) {
        GateClassifier gate = make_gate(5, 20, 4, rng);
        const GateDecision d = gate_predict(gate, random_matrix(rng, 3, 5));
        double s = 0.0;
        for (std::size_t j = 0; j < 4; ++j) s += d.probs.at(0, j);
        REQUIRE(std::fabs(s - 1.0) < 1e-12);
        REQUIRE(d.task < 4);
        REQUIRE(d.task == argmax_row(d.probs));
    }
    GateClassifier gate = make_gate(5, 20, 4, rng);
    CHECK_THROWS_AS(gate_predict(gate, Matrix(3, 6)), DimensionError);
}

TEST_CASE("modulate routes by label when given, by gate otherwise") {
    Rng rng(2026, 42);
    Rng init(2026, 43);
    MemoryBank bank = make_memory_bank(3, 4, 2, 0.2, init);
    // Bias the second logit so the untrained gate always says task 1.
    GateClassifier gate{Matrix(2, 8), Matrix(1, 8), Matrix(8, 3), Matrix(1, 3)};
    gate.b2.at(0, 1) = 5.0;
    const Matrix q = random_matrix(rng, 4, 2);

    const RetrievalResult by_gate = modulate(bank, gate, q, std::nullopt, false);
    const RetrievalResult direct = retrieve(bank, 1, q);
    CHECK(by_gate.retrieved == direct.retrieved);

    const RetrievalResult by_label = modulate(bank, gate, q, 2, false);
    CHECK(by_label.retrieved == retrieve(bank, 2, q).retrieved);
}

TEST_CASE("modulate training writes exactly the routed item") {
    Rng rng(2026, 44);
    Rng init(2026, 45);
    MemoryBank bank = make_memory_bank(3, 4, 2, 0.2, init);
    GateClassifier gate = make_gate(2, 8, 3, init);
    const Matrix q = random_matrix(rng, 4, 2);
    const std::vector<Matrix> before = bank.items;

    const RetrievalResult r = modulate(bank, gate, q, 0, true);
    CHECK(bank.items[0] != before[0]);
    CHECK(bank.items[1] == before[1]);
    CHECK(bank.items[2] == before[2]);
    // The write used the retrieval's own pre-update weights.
    MemoryBank replay;
    replay.alpha = 0.2;
    replay.items.push_back(before[0]);
    update(replay, 0, q, r.weights);
    CHECK(replay.items[0] == bank.items[0]);

    bank.frozen = true;
    CHECK_THROWS_AS(modulate(bank, gate, q, 0, true), StateError);
    const std::vector<Matrix> frozen_before = bank.items;
    (void)modulate(bank, gate, q, std::nullopt, false);
    CHECK(bank.items == frozen_before);
}

TEST_CASE("modulate with alpha zero equals plain retrieval") {
    Rng rng(2026, 46);
    Rng init(2026, 47);
    MemoryBank bank = make_memory_bank(2, 4, 3, 0.0, init);
    GateClassifier gate = make_gate(3, 12, 2, init);
    const Matrix q = random_matrix(rng, 5, 3);
    const std::vector<Matrix> before = bank.items;
    const RetrievalResult trained = modulate(bank, gate, q, 1, true);
    CHECK(bank.items == before);
    CHECK(trained.retrieved == retrieve(bank, 1, q).retrieved);
}

TEST_CASE("compose stacks retrievals in order") {
    Rng rng(2026, 48);
    RetrievalResult a{random_matrix(rng, 4, 8), Matrix(4, 2)};
    RetrievalResult b{random_matrix(rng, 4, 8), Matrix(4, 2)};
    const std::vector<RetrievalResult> two = {a, b};
    const Matrix stacked = compose(two);
    CHECK(stacked.rows() == 8);
    CHECK(stacked.cols() == 8);

    const std::vector<RetrievalResult> one = {a};
    CHECK(compose(one) == a.retrieved);

    RetrievalResult p{random_matrix(rng, 2, 3), Matrix(2, 2)};
    RetrievalResult q{random_matrix(rng, 3, 3), Matrix(3, 2)};
    RetrievalResult r{random_matrix(rng, 5, 3), Matrix(5, 2)};
    const std::vector<RetrievalResult> three = {p, q, r};
    const Matrix m = compose(three);
    REQUIRE(m.rows() == 10);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(m.at(0, j) == p.retrieved.at(0, j));
        CHECK(m.at(2, j) == q.retrieved.at(0, j));
        CHECK(m.at(5, j) == r.retrieved.at(0, j));
        CHECK(m.at(9, j) == r.retrieved.at(4, j));
    }

    RetrievalResult bad{random_matrix(rng, 2, 4), Matrix(2, 2)};
    const std::vector<RetrievalResult> mixed = {a, bad};
    CHECK_THROWS_AS(compose(mixed), DimensionError);
    CHECK_THROWS_AS(compose(std::span<const RetrievalResult>{}), ContractError);
}

TEST_CASE("taped retrieval equals the eager path bitwise") {
    Rng rng(2026, 49);
    Rng init(2026, 50);
    MemoryBank bank = make_memory_bank(1, 6, 4, 0.1, init);
    const Matrix q = random_matrix(rng, 3, 4);
    const RetrievalResult eager = retrieve(bank, 0, q);

    Tape t;
    const RetrieveNodes nodes =
        retrieve_nodes(t, t.leaf(q), t.leaf(bank.items[0]), 4);
    CHECK(t.value(nodes.weights) == eager.weights);
    CHECK(t.value(nodes.retrieved) == eager.retrieved);
}

TEST_CASE("gradients flow through taped retrieval to both inputs") {
    Rng rng(2026, 51);
    const Matrix q = random_matrix(rng, 3, 4);
    const Matrix item = random_matrix(rng, 5, 4);
    const Matrix target = random_matrix(rng, 3, 4);
    const double rel = testing::gradcheck_max_rel(
        {q, item}, [&](Tape& t, const std::vector<NodeId>& in) {
            const RetrieveNodes n = retrieve_nodes(t, in[0], in[1], 4);
            return t.mse(n.retrieved, t.constant(target));
        });
    CHECK(rel < 1e-4);
}

TEST_CASE("taped gate forward equals the eager gate") {
    Rng rng(2026, 52);
    GateClassifier gate = make_gate(4, 16, 3, rng);
    const Matrix q = random_matrix(rng, 5, 4);
    const GateDecision d = gate_predict(gate, q);

    Tape t;
    const NodeId pooled = t.constant(mean_pool_rows(q));
    const NodeId logits =
        gate_logits(t, pooled, t.leaf(gate.w1), t.leaf(gate.b1),
                    t.leaf(gate.w2), t.leaf(gate.b2));
    CHECK(softmax_rows(t.value(logits)) == d.probs);
}
