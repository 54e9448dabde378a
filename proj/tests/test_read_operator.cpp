#include "doctest.h"
#include "ksp/read_operator.hpp"

#include <random>
#include <set>

using namespace ksp;

namespace {

KotheSpace s_space(unsigned stride) {
    SpaceSpec s;
    s.matrix.kind = MatrixKind::S;
    s.matrix.stride = stride;
    return KotheSpace(s);
}

// Operator on the horizon-1 parameters with the stage-1 families fixed to Q = 1.
ReadOperator stage1_operator() {
    ReadOperator op(make_parameters(1, {}));
    StageFamilies f;
    f.n = 1;
    f.P = {Polynomial({Scalar(1)})};
    f.S = f.P;
    f.Q = f.P;
    f.back = {{1, 1}};
    op.set_families(f);
    return op;
}

CoordVector random_vector(std::mt19937_64& g, std::size_t below, std::size_t terms) {
    std::uniform_int_distribution<std::size_t> idx(0, below - 1);
    std::uniform_int_distribution<int> num(-9, 9), den(1, 5);
    CoordVector x;
    for (std::size_t i = 0; i < terms; ++i) {
        int v = num(g);
        if (v == 0) continue;
        Scalar q(v, den(g));
        q.canonicalize();
        x[idx(g)] = q;
    }
    return x;
}

}  // namespace

TEST_CASE("parameter schedule") {
    auto p = make_parameters(1, {});
    CHECK(p.delta[1] == 1);
    CHECK(p.c[1] == 32);
    CHECK(p.delta[2] == 38);
    CHECK(p.a[2] == 114);
    CHECK(p.t[2] == 186);
    CHECK(p.dimension() == 186);

    auto p2 = make_parameters(2, {});
    CHECK(p2.c[2] == 1308);
    CHECK(p2.delta[3] == 1494);
    CHECK(p2.a[3] == 5976);
    CHECK(p2.t[3] == 8780);
    // Independent re-check of the displayed inequalities.
    for (unsigned n = 1; n <= 3; ++n) {
        CHECK(2 * p2.delta[n] < p2.a[n]);
        CHECK(p2.a[n] + p2.delta[n] < p2.t[n]);
        CHECK(p2.t[n] % (n + 1) == 0);
    }
    for (unsigned n = 1; n <= 2; ++n) CHECK(3 * p2.t[n] + n < p2.c[n]);

    try {
        make_parameters(1, {}, 6, 2);
        FAIL("expected a parameter error");
    } catch (const ParameterError& e) {
        CHECK(std::string(e.what()).find("2Δ_n < a_n violated") != std::string::npos);
    }
    CHECK_THROWS_AS(make_parameters(1, {}, 7, 3), ParameterError);
    ScheduleSpec bad;
    bad.N = {2, 1};
    CHECK_THROWS_AS(make_parameters(1, bad), ParameterError);
    bad.relaxed = true;
    CHECK_NOTHROW(make_parameters(1, bad));
    ScheduleSpec jump;
    jump.N = {1, 3};
    jump.relaxed = true;
    CHECK_THROWS_AS(make_parameters(1, jump), ParameterError);
}

TEST_CASE("iterates of u_0 and the column rules") {
    ReadOperator op = stage1_operator();
    CHECK(op.gamma(0) == unit(0));
    CHECK(op.gamma(3) == sum(unit(3), unit(0)));
    CHECK(op.gamma(4) == unit(4));
    CHECK(op.gamma(114) == sum(unit(114), unit(0)));
    CHECK(op.gamma(150) == sum(unit(150), sum(unit(36), unit(4))));
    // Q = 1 in the window [32, 38): T^j u_0 = u_j + T^{j-32} u_0.
    CHECK(op.gamma(32) == sum(unit(32), unit(0)));
    CHECK(op.gamma(35) == sum(unit(35), sum(unit(3), unit(0))));

    CHECK(op.apply(unit(2)) == sum(unit(3), unit(0)));
    CHECK(op.apply(unit(3)) == diff(unit(4), unit(1)));
    CHECK(op.apply(unit(5)) == unit(6));
    CHECK(op.apply(unit(31)) == sum(unit(32), unit(0)));
    CHECK(op.apply(unit(37)) == diff(unit(38), unit(6)));
    CHECK(op.apply(unit(151)) == diff(unit(152), unit(38)));
    CHECK_THROWS_AS(op.apply(unit(185)), TruncationExit);

    for (std::size_t j = 0; j + 1 < op.dimension(); ++j) CHECK(op.apply(op.gamma(j)) == op.gamma(j + 1));

    ReadOperator bare(make_parameters(1, {}));
    CHECK_THROWS_AS(bare.gamma(33), ConstructionError);
}

TEST_CASE("change of basis and truncation map") {
    ReadOperator op = stage1_operator();
    CHECK(op.to_gamma(unit(1)) == unit(1));
    CHECK(op.from_gamma(unit(3)) == sum(unit(3), unit(0)));
    std::mt19937_64 g(11);
    for (int it = 0; it < 100; ++it) {
        CoordVector x = random_vector(g, op.dimension(), 20);
        CHECK(op.from_gamma(op.to_gamma(x)) == x);
        CHECK(op.to_gamma(op.from_gamma(x)) == x);
    }
    ReadOperator op2(make_parameters(2, {}));
    CoordVector low = sum(unit(1), scaled(unit(4), Scalar(3)));
    CHECK(op.tau(2, low) == low);
    CHECK(op.tau(2, unit(40)).empty());
    CHECK(op.tau(2, unit(114)) == scaled(unit(0), Scalar(-1)));
    CHECK_THROWS_AS(op.tau(2, unit(186)), ConfigError);
    CHECK_THROWS_AS(op.tau(1, low), ConfigError);
    (void)op2;
}

TEST_CASE("polynomials and nets") {
    Polynomial P({Scalar(1), Scalar(-2), Scalar(1, 2)}), Q({Scalar(0), Scalar(3)});
    CHECK(P.degree() == 2);
    CHECK(P.norm() == Scalar(7, 2));
    CHECK((P * Q).degree() == 3);
    CHECK((P * Q).norm() <= P.norm() * Q.norm());
    CHECK(Polynomial({Scalar(0), Scalar(0)}).is_zero());

    // Mesh 1/2 and R = 1: step 1/4 lattice in the unit l1 ball.
    CHECK(net_size(1, Scalar(1, 2)) == 41);
    auto net = build_net(1, Scalar(1, 2));
    CHECK(net.size() == 41);
    CHECK(net.front() == Polynomial({Scalar(1)}));
    std::set<std::vector<Scalar>> distinct;
    for (const auto& S : net) {
        CHECK(S.norm() <= 1);
        CHECK(S.degree() <= 1);
        distinct.insert(S.coef);
    }
    CHECK(distinct.size() == 41);
    CHECK(build_net(1, Scalar(1, 2), 1).size() == 1);
    CHECK(net_size(2, Scalar(1)) == build_net(2, Scalar(1)).size());

    std::mt19937_64 g(5);
    std::uniform_int_distribution<int> num(-40, 40);
    for (int it = 0; it < 200; ++it) {
        unsigned R = 1 + it % 2;
        std::vector<Scalar> c(R + 1);
        for (auto& v : c) v = Scalar(num(g), 17);
        Polynomial S(c);
        if (S.norm() > R) continue;
        Scalar mesh(1, 1 + it % 3);
        Polynomial w = net_round(S, R, mesh);
        CHECK((S - w).norm() <= mesh);
        CHECK(w.norm() <= R);
        if (R == 1 && mesh == Scalar(1, 2)) CHECK(std::find(net.begin(), net.end(), w) != net.end());
    }
}

TEST_CASE("P synthesis") {
    ReadOperator op(make_parameters(2, {}));
    StageFamilies f1;
    f1.n = 1;
    f1.P = f1.S = f1.Q = {Polynomial({Scalar(1)})};
    f1.back = {{1, 1}};
    op.set_families(f1);
    auto r = synthesize_P(op, 2, unit(0));
    CHECK(r.P == Polynomial::monomial(114));
    CHECK(r.residual.empty());
    CHECK(r.D == 1);
    // y = T^{a_n - r} u_0 gives P = X^r.
    auto r2 = synthesize_P(op, 2, op.gamma(100));
    CHECK(r2.P == Polynomial::monomial(14));
    CHECK(op.poly_apply(r2.P, op.gamma(100)) == sum(unit(114), unit(0)));
    // A mixed y: gamma-coordinates of P(T)y equal delta_{a_n} below t_n.
    CoordVector y = sum(unit(1), scaled(unit(2), Scalar(1, 3)));
    auto r3 = synthesize_P(op, 2, y);
    CHECK(r3.P.degree() < 186);
    CoordVector img = op.to_gamma(op.poly_apply(r3.P, y));
    for (const auto& [k, v] : img) {
        if (k < 186) CHECK(((k == 114 && v == 1) || v == 0));
        else CHECK(r3.residual.at(k) == v);
    }
    CHECK_THROWS_AS(synthesize_P(op, 2, unit(160)), ConstructionError);
}

namespace {

KotheSpace entire_space(unsigned stride) {
    SpaceSpec s;
    s.matrix.kind = MatrixKind::Entire;
    s.matrix.stride = stride;
    return KotheSpace(s);
}

std::set<std::string> conditions(const LedgerReport& rep) {
    std::set<std::string> out;
    for (const auto& r : rep.records) out.insert(r.cond);
    return out;
}

}  // namespace

TEST_CASE("construction on s passes its ledger") {
    auto params = make_parameters(1, {});
    Construction cons = build_construction(s_space(64), params);
    CHECK(cons.built() == 186);
    CHECK(cons.completed_stages() == 1);
    for (std::size_t j = 0; j < 186; ++j) CHECK(cons.basis().assigned(j));
    auto rep = verify_ledger(cons);
    CHECK(rep.fail_count() == 0);
    for (const Record* r : rep.failures()) MESSAGE(r->cond << " " << format_idx(r->idx));
    // With mu_1 = 1 there is no earlier (n', k') and no c_0: (4.13) and (4.19) have no indices.
    const std::set<std::string> expected = {"4.3",  "4.4",  "4.5",  "4.6",  "4.7",  "4.8",  "4.11", "4.12",
                                            "4.14", "4.15", "4.16", "4.17", "4.18", "4.21", "4.22", "4.23"};
    CHECK(conditions(rep) == expected);
    // Two prefix records, two (4.11) records per Q, one record per atom.
    CHECK(stage_atoms(cons, 1).size() + 2 + 2 * cons.op().families(1)->Q.size() == rep.records.size());

    // The single-step continuity bound, checked directly on the realized vectors.
    for (unsigned N = 1; N <= 2; ++N)
        for (std::size_t j = to_index(params.t[N]); j + 1 < cons.dimension(); ++j)
            CHECK(cons.p(N, cons.op().apply(unit(j))) <= pow2(-static_cast<long>(j)) * cons.pu(N + 1, j));

    // Dropping passing records keeps the counts.
    LedgerOptions lean;
    lean.keep_passing = false;
    auto slim = verify_ledger(cons, lean);
    CHECK(slim.records.empty());
    CHECK(slim.pass_count() == rep.pass_count());
}

TEST_CASE("doubling a Q-window scalar breaks only conditions that mention it") {
    Construction cons = build_construction(s_space(64), make_parameters(1, {}));
    const std::size_t dim = cons.dimension();
    for (std::size_t j : {32ul, 33ul, 37ul}) {
        Construction m = cons;
        m.set_alpha(j, m.basis().alpha[j] * 2);
        auto rep = verify_ledger(m);
        REQUIRE(rep.fail_count() > 0);
        bool saw421 = false;
        auto atoms = stage_atoms(m, 1);
        for (const Record* r : rep.failures()) {
            if (r->cond == "4.21" && r->idx[1] == static_cast<long long>(j)) saw421 = true;
            auto it = std::find_if(atoms.begin(), atoms.end(),
                                   [&](const LedgerAtom& a) { return a.cond == r->cond && a.idx == r->idx; });
            REQUIRE(it != atoms.end());
            CHECK(it->references(m, j));
        }
        CHECK(saw421);
    }
    (void)dim;
}

TEST_CASE("construction edge cases") {
    // Before any stage is built the ledger has nothing to say.
    Construction empty(s_space(64), make_parameters(1, {}), {});
    CHECK(verify_ledger(empty).records.empty());
    CHECK(empty.built() == 6);

    // Bounded level ratios: the first Q-window vector cannot be both large and small.
    SpaceSpec b;
    b.matrix.kind = MatrixKind::Table;
    for (unsigned l = 1; l <= 8; ++l) b.matrix.table.emplace_back(200, pow2(l));
    try {
        build_construction(KotheSpace(b), make_parameters(1, {}));
        FAIL("expected a construction error");
    } catch (const ConstructionError& e) {
        CHECK(std::string(e.what()).find("block (i)") != std::string::npos);
    }

    SpaceSpec l2;
    l2.matrix.kind = MatrixKind::S;
    l2.p = 2;
    CHECK_THROWS_AS(Construction(KotheSpace(l2), make_parameters(1, {}), {}), ConfigError);
}

TEST_CASE("construction on entire follows the same contract") {
    auto params = make_parameters(1, {});
    Construction cons = build_construction(entire_space(8), params);
    auto rep = verify_ledger(cons);
    CHECK(rep.fail_count() == 0);
    CHECK(conditions(rep).size() == 16);
    const StageFamilies* f = cons.op().families(1);
    REQUIRE(f != nullptr);
    for (const auto& Q : f->Q) {
        CHECK(Q.degree() <= 6 + 1);
        CHECK(Q.norm() <= f->D);
    }
    Scalar L1 = compute_L(cons, 1);
    CHECK(L1 >= 1);
    for (std::size_t j = 0; j < 6; ++j)
        CHECK(cons.p(1, cons.op().apply(unit(j))) <= pow2(-static_cast<long>(j)) * L1 * cons.pu(2, j));
}
