#include "doctest.h"
#include "ksp/kothe.hpp"

#include <random>

using namespace ksp;

namespace {

KotheSpace builtin(MatrixKind k, SpaceKind kind = SpaceKind::LambdaP, Scalar p = 1) {
    SpaceSpec s;
    s.matrix.kind = k;
    s.kind = kind;
    s.p = p;
    return make_space(s);
}

CoordVector random_vector(std::mt19937_64& g, std::size_t max_support, std::size_t max_index) {
    std::uniform_int_distribution<std::size_t> idx(0, max_index), cnt(0, max_support);
    std::uniform_int_distribution<int> num(-20, 20), den(1, 9);
    CoordVector v;
    std::size_t c = cnt(g);
    for (std::size_t i = 0; i < c; ++i) {
        Scalar q(num(g), den(g));
        q.canonicalize();
        if (q != 0) v[idx(g)] = q;
    }
    return v;
}

}  // namespace

TEST_CASE("rational parsing and printing") {
    CHECK(to_string(parse_rational("6/4")) == "3/2");
    CHECK(to_string(parse_rational("-7")) == "-7/1");
    CHECK_THROWS_AS(parse_rational("1/0"), ConfigError);
    CHECK_THROWS_AS(parse_rational("1.5"), ConfigError);
    CHECK_THROWS_AS(parse_rational("/3"), ConfigError);
    CHECK(floor_log2(Scalar(1, 3)) == -2);
    CHECK(floor_log2(Scalar(8)) == 3);
    CHECK(pow2_ceil(Scalar(5)) == 8);
    CHECK(pow2_floor(Scalar(5)) == 4);
    CHECK(pow2(-3) == Scalar(1, 8));
}

TEST_CASE("builtin matrix entries") {
    auto s = builtin(MatrixKind::S);
    CHECK(s.entry(2, 2) == 9);
    CHECK(s.seminorm(2, unit(2)) == 9);
    auto prime = builtin(MatrixKind::Prime);
    CHECK(prime.entry(1, 2) == 1);
    CHECK(prime.entry(2, 2) == 3);
    // n + 1 = 60 = 2^2 * 3 * 5
    CHECK(prime.entry(1, 59) == 4);
    CHECK(prime.entry(2, 59) == 12);
    CHECK(prime.entry(3, 59) == 60);
    auto entire = builtin(MatrixKind::Entire);
    CHECK(entire.seminorm(1, sum(unit(0), unit(1))) == 3);
    CHECK(entire.seminorm(3, CoordVector{}) == 0);
}

TEST_CASE("stride regroups levels") {
    SpaceSpec spec;
    spec.matrix.kind = MatrixKind::S;
    spec.matrix.stride = 3;
    auto s = make_space(spec);
    CHECK(s.entry(1, 4) == 125);
    CHECK(s.entry(2, 1) == 64);
}

TEST_CASE("power-series surrogate") {
    SpaceSpec spec;
    spec.matrix.kind = MatrixKind::PowerSeries;
    spec.matrix.base = Scalar(3, 2);
    spec.matrix.t_step = 1;
    spec.matrix.alpha_step = 2;
    auto ps = make_space(spec);
    CHECK(ps.entry(2, 3) == pow(Scalar(3, 2), 12));
    CHECK(ps.entry(1, 0) == 1);
    CHECK(ps.ratio_R(1, 3) == pow(Scalar(3, 2), 6));
}

TEST_CASE("matrix validation") {
    SpaceSpec spec;
    spec.matrix.kind = MatrixKind::Table;
    spec.matrix.table = {{Scalar(1), Scalar(0), Scalar(2)}, {Scalar(1), Scalar(0), Scalar(3)}};
    CHECK_THROWS_AS(make_space(spec), ConfigError);
    spec.matrix.table = {{Scalar(2), Scalar(1)}, {Scalar(1), Scalar(1)}};
    CHECK_THROWS_AS(make_space(spec), ConfigError);
    spec.matrix.table = {{Scalar(1), Scalar(1)}, {Scalar(1), Scalar(2)}};
    CHECK_NOTHROW(make_space(spec));
}

TEST_CASE("ratio_R") {
    CHECK(builtin(MatrixKind::S).ratio_R(3, 4) == 5);
    CHECK(builtin(MatrixKind::Entire).ratio_R(1, 3) == 8);
    // Independent: a_{2,2}/a_{1,2} for n+1 = 3 = q_2 is 3/1.
    CHECK(builtin(MatrixKind::Prime).ratio_R(1, 2) == 3);
    SpaceSpec spec;
    spec.matrix.kind = MatrixKind::Table;
    spec.matrix.table = {{Scalar(0), Scalar(1)}, {Scalar(1), Scalar(1)}};
    auto t = make_space(spec);
    CHECK_THROWS_AS(t.ratio_R(1, 0), ConfigError);
}

TEST_CASE("continuous norm scan") {
    CHECK(continuous_norm_scan(builtin(MatrixKind::S), 3, 1000).level == 1u);
    CHECK(continuous_norm_scan(builtin(MatrixKind::Prime), 3, 1000).level == 1u);
    SpaceSpec spec;
    spec.matrix.kind = MatrixKind::Table;
    for (unsigned j = 1; j <= 5; ++j) {
        std::vector<Scalar> row;
        for (unsigned n = 0; n <= 50; ++n) row.push_back(Scalar(n < j ? 1 : 0));
        spec.matrix.table.push_back(row);
    }
    KotheSpace omega(spec);
    auto r = continuous_norm_scan(omega, 5, 50);
    CHECK_FALSE(r.level.has_value());
    CHECK(r.n_max == 50);
}

TEST_CASE("basis constant of canonical bases") {
    CHECK(basis_constant_scan(builtin(MatrixKind::S), 1, 40) == 1);
    CHECK(basis_constant_scan(builtin(MatrixKind::S), 3, 40) == 1);
    CHECK(basis_constant_scan(builtin(MatrixKind::Entire), 2, 100) == 1);
}

TEST_CASE("seminorm properties on random vectors") {
    std::mt19937_64 g(7);
    auto s = builtin(MatrixKind::S);
    auto c0 = builtin(MatrixKind::Entire, SpaceKind::C0);
    auto l2 = builtin(MatrixKind::Prime, SpaceKind::LambdaP, 2);
    std::uniform_int_distribution<int> num(-30, 30), den(1, 11);
    for (int it = 0; it < 200; ++it) {
        CoordVector x = random_vector(g, 3, 40), y = random_vector(g, 3, 40);
        Scalar c(num(g), den(g));
        c.canonicalize();
        unsigned j = 1 + it % 4;
        for (const KotheSpace* sp : {&s, &c0}) {
            CHECK(sp->seminorm(j, scaled(x, c)) == abs(c) * sp->seminorm(j, x));
            CHECK(sp->seminorm(j, x) <= sp->seminorm(j + 1, x));
            CHECK(sp->seminorm(j, sum(x, y)) <= sp->seminorm(j, x) + sp->seminorm(j, y));
        }
        // lambda^2 works on squares: homogeneity becomes |c|^2.
        CHECK(l2.seminorm_power(j, scaled(x, c)) == c * c * l2.seminorm_power(j, x));
        CHECK(l2.seminorm_power(j, x) <= l2.seminorm_power(j + 1, x));
        // Triangle for square roots: S(x+y) <= Sx + Sy + 2 sqrt(Sx Sy).
        Scalar sx = l2.seminorm_power(j, x), sy = l2.seminorm_power(j, y);
        Scalar gap = l2.seminorm_power(j, sum(x, y)) - sx - sy;
        CHECK((gap <= 0 || gap * gap <= 4 * sx * sy));
        std::size_t n = it % 50;
        CHECK(s.ratio_R(j, n) * s.seminorm(j, unit(n)) == s.seminorm(j + 1, unit(n)));
    }
}
