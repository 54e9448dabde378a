#include "doctest.h"
#include "ksp/invariant_finder.hpp"

#include <random>

using namespace ksp;

namespace {

// Backward shift plus a diagonal and a random band that stays inside the
// regrouped continuity shape (row i reads columns <= 2 floor(i/2) + 3).
OmegaOperator banded(std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::uniform_int_distribution<int> num(-3, 3), den(1, 4);
    std::vector<OmegaOperator::Row> rows(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        const std::size_t hi = std::min(dim - 1, 2 * (i / 2) + 3);
        for (std::size_t c = i; c <= hi; ++c) {
            Scalar v(num(g), den(g));
            if (c == i + 1) v = Scalar(1) + abs(v);  // keeps the shift part alive
            v.canonicalize();
            if (v != 0) rows[i].emplace_back(c, v);
        }
    }
    return OmegaOperator(dim, std::move(rows));
}

std::vector<std::vector<std::size_t>> shift_table(unsigned L) {
    std::vector<std::vector<std::size_t>> A{{0, 1}};
    for (unsigned l = 1; l <= L; ++l) A.push_back({l + 1});
    return A;
}

}  // namespace

TEST_CASE("kernel chain of the regrouped omega seminorms") {
    auto op = OmegaOperator::forward_shift(64);
    KernelChain ch = build_chain(op, 4);
    CHECK(ch.group == 2);
    CHECK_FALSE(ch.trivial);
    REQUIRE(ch.M.size() == 4);
    CHECK(ch.M[0] == std::vector<std::size_t>{2, 3});
    CHECK(ch.M[3] == std::vector<std::size_t>{8, 9});
    REQUIRE(ch.u.size() == 62);
    for (std::size_t n = 0; n < ch.u.size(); ++n) CHECK(ch.u[n] == n + 2);
    // P_{M_1} x = 0 on ker q_1 means x lies in ker q_2.
    CoordVector x = {{4, Scalar(1)}, {9, Scalar(-2)}};
    CHECK(ch.project(x).empty());
    CHECK(ch.project(unit(3, 5)) == unit(1, 5));

    CHECK(build_chain(OmegaOperator::zero(3), 1).trivial);
    // A profile where p_1 is already a norm has no kernels to chain.
    OmegaOperator normed(8, {}, {static_cast<std::size_t>(-1)});
    CHECK_THROWS_AS(build_chain(normed, 1), ConfigError);
    // Profile with big jumps needs no regrouping.
    OmegaOperator wide(20, {}, {3, 6, 9});
    KernelChain w = build_chain(wide, 2);
    CHECK(w.group == 1);
    CHECK(w.M[0] == std::vector<std::size_t>{3, 4, 5});
    // Row 0 reading column 10 is not continuous for the regrouped seminorms.
    OmegaOperator bad(16, {{{10, Scalar(1)}}});
    CHECK_THROWS_AS(build_chain(bad, 2), ConfigError);
}

TEST_CASE("A_l tables for the shifts and zero") {
    const unsigned L = 30;
    auto B = OmegaOperator::backward_shift(64);
    CHECK(compute_Al(build_chain(B, 2), B, L) == shift_table(L));
    for (const auto& op : {OmegaOperator::forward_shift(64), OmegaOperator::zero(64)}) {
        auto A = compute_Al(build_chain(op, 2), op, L);
        CHECK(A[0] == std::vector<std::size_t>{0, 1});
        for (unsigned l = 1; l <= L; ++l) CHECK(A[l].empty());
        CHECK(classify(A) == OmegaCase::One);
    }
    CHECK(classify(shift_table(20)) == OmegaCase::Two);
    // A late non-empty A_l below the top leaves the horizon undecided.
    auto mixed = shift_table(10);
    mixed[10].clear();
    CHECK(classify(mixed) == OmegaCase::Insufficient);

    // Reading two columns ahead still fits the shape, so the frontier stops at l = 30.
    std::vector<OmegaOperator::Row> rows(64);
    for (std::size_t i = 0; i + 2 < 64; ++i) rows[i] = {{i + 2, Scalar(1)}};
    OmegaOperator two(64, rows);
    KernelChain ch = build_chain(two, 2);
    CHECK_NOTHROW(compute_Al(ch, two, 30));
    CHECK_THROWS_AS(compute_Al(ch, two, 31), TruncationExit);
}

TEST_CASE("case-1 witnesses") {
    auto F = OmegaOperator::forward_shift(64);
    auto w = case1_witness(build_chain(F, 2), F, 30);
    REQUIRE(w);
    CHECK(w->n == 2);
    CHECK(w->report.records.size() == 31);
    CHECK(w->report.all_pass());
    for (unsigned l = 0; l <= 30; ++l) CHECK(w->orbit[l] == unit(4 + l));
    // Each step loses one M_j of exact coordinates: 64 - 2l >= 4 stops at l = 30.
    CHECK_THROWS_AS(case1_witness(build_chain(F, 2), F, 31), TruncationExit);

    auto Z = OmegaOperator::zero(64);
    auto wz = case1_witness(build_chain(Z, 2), Z, 30);
    REQUIRE(wz);
    CHECK(wz->n == 2);

    auto B = OmegaOperator::backward_shift(64);
    CHECK_FALSE(case1_witness(build_chain(B, 2), B, 20));
}

TEST_CASE("case-2 functional on the backward shift") {
    auto B = OmegaOperator::backward_shift(64);
    KernelChain ch = build_chain(B, 2);
    Case2Functional f = case2_functional(ch, B, 20);
    CHECK(f.report.all_pass());
    CHECK(f.report.by_cond("phi").size() == 21);
    CHECK(f.alpha[0] != 0);
    CHECK_FALSE(f.x.empty());
    CHECK(f.sweep_stabilized);
    // l_m = l and x^{(l)} = u_{l+1}.
    for (unsigned l = 1; l <= 20; ++l) {
        CHECK(f.l_m[l - 1] == l);
        CHECK(f.family[l - 1] == unit(l + 3));
    }
    // Independent recheck of phi(B^l x) by index arithmetic: B^l e_m = e_{m-l}.
    for (unsigned l = 0; l <= 20; ++l) {
        Scalar s = 0;
        for (const auto& [m, v] : f.x) {
            if (m == l + 2) s += f.alpha[0] * v;
            if (m == l + 3) s += f.alpha[1] * v;
        }
        CHECK(s == 0);
    }

    auto F = OmegaOperator::forward_shift(64);
    CHECK_THROWS_AS(case2_functional(build_chain(F, 2), F, 20), ConfigError);
}

TEST_CASE("random banded perturbations of the backward shift") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        auto op = banded(64, seed);
        KernelChain ch = build_chain(op, 2);
        auto A = compute_Al(ch, op, 20);
        OmegaCase c = classify(A);
        CHECK(c != OmegaCase::Insufficient);
        if (c == OmegaCase::Two) {
            Case2Functional f = case2_functional(ch, op, 20);
            CHECK(f.report.all_pass());
            for (const Record* r : f.report.failures()) MESSAGE(seed << " " << r->cond << format_idx(r->idx));
        } else {
            auto w = case1_witness(ch, op, 20);
            REQUIRE(w);
            CHECK(w->report.all_pass());
        }
    }
}

TEST_CASE("row-sparse operator text") {
    auto op = parse_omega_operator("1:1\n2:1/2 0:-3  # comment\n\n", 4);
    CHECK(op.dimension() == 4);
    CHECK(op.apply(unit(1)) == unit(0));
    CoordVector y = op.apply(unit(0));
    CHECK(y == unit(1, -3));
    CHECK(op.apply(unit(2)) == unit(1, Scalar(1, 2)));
    CHECK_THROWS_AS(parse_omega_operator("1-1\n"), ConfigError);
    CHECK_THROWS_AS(parse_omega_operator("x:1\n"), ConfigError);
    CHECK_THROWS_AS(parse_omega_operator("5:1\n", 3), ConfigError);
    CHECK(parse_omega_operator("1:1\n\n3:2\n").dimension() == 4);
}
