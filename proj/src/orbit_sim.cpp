#include "ksp/orbit_sim.hpp"

#include <algorithm>

namespace ksp {

namespace {

CoordVector below(const CoordVector& x, std::size_t t) {
    CoordVector y;
    for (const auto& [j, v] : x)
        if (j < t) y.emplace(j, v);
    return y;
}

long long ll(std::size_t x) { return static_cast<long long>(x); }

}  // namespace

std::vector<OrbitStep> orbit(const Construction& cons, const CoordVector& x, std::size_t steps,
                             const std::vector<unsigned>& levels, const CoordVector& z) {
    std::vector<OrbitStep> out;
    CoordVector cur = x;
    prune(cur);
    for (std::size_t i = 0;; ++i) {
        OrbitStep s;
        s.i = i;
        s.x = cur;
        CoordVector d = diff(cur, z);
        for (unsigned l : levels) s.values.push_back(cons.p(l, d));
        out.push_back(std::move(s));
        if (i == steps) break;
        try {
            cur = cons.op().apply(cur);
        } catch (const TruncationExit& e) {
            throw TruncationExit("orbit step " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

CoordVector random_support(std::mt19937_64& rng, std::size_t lo, std::size_t hi, std::size_t terms) {
    if (hi <= lo) throw ConfigError("empty support range");
    std::uniform_int_distribution<std::size_t> idx(lo, hi - 1);
    std::uniform_int_distribution<int> num(-9, 9), den(1, 5);
    CoordVector x;
    for (std::size_t i = 0; i < terms; ++i) {
        int v = num(rng);
        if (v == 0) continue;
        Scalar q(v, den(rng));
        q.canonicalize();
        x[idx(rng)] = q;
    }
    return x;
}

LedgerReport continuity_check(const Construction& cons, unsigned N, std::size_t lo, std::size_t hi,
                              std::size_t samples, std::uint64_t seed) {
    const ReadParameters& p = cons.params();
    if (N == 0 || N > p.horizon + 1) throw ConfigError("continuity check needs 1 <= N <= horizon + 1");
    LedgerReport rep;
    const std::size_t dim = cons.dimension();
    const std::size_t tN = to_index(p.t[N]);
    hi = std::min(hi, dim - 1);
    for (std::size_t j = std::max(lo, tN); j < hi; ++j) {
        Scalar lhs = cons.p(N, cons.op().apply(unit(j)));
        rep.add("L4.2", {N, ll(j)}, lhs, Rel::LE, cons.pu(N + 1, j) * pow2(-static_cast<long>(j)));
    }
    const Scalar L = compute_L(cons, N);
    const Scalar K = 4 * cons.options().basis_constant * L;
    rep.set_meta("L_" + std::to_string(N), to_string(L));
    std::vector<CoordVector> xs{CoordVector{}, unit(0)};
    std::mt19937_64 rng(seed);
    for (std::size_t s = 0; s < samples; ++s) xs.push_back(random_support(rng, 0, dim - 1, 8));
    for (std::size_t s = 0; s < xs.size(); ++s) {
        const CoordVector& x = xs[s];
        rep.add("C4.3", {N, ll(s)}, cons.p(N, cons.op().apply(x)), Rel::LE, K * cons.p(N + 2, x));
    }
    return rep;
}

std::vector<CaptureRow> capture_check(const Construction& cons, const CoordVector& x,
                                      const std::vector<unsigned>& stages) {
    if (cons.p(1, x) != 1) throw ConfigError("capture check needs p_1(x) = 1");
    std::vector<CaptureRow> out;
    for (unsigned n : stages) {
        CaptureRow r;
        r.n = n;
        r.available = n >= 2 && n <= cons.completed_stages() + 1 && n <= cons.params().horizon + 1;
        if (r.available) {
            KnMembership m = kn_membership(cons, n, below(x, to_index(cons.params().t[n])));
            r.p1_y = m.p1;
            r.p1_tau = m.p1_tau;
            r.member = m.member;
        }
        out.push_back(r);
    }
    return out;
}

Record tail_check(const Construction& cons, unsigned n, unsigned k, const CoordVector& x) {
    const ReadParameters& p = cons.params();
    if (n == 0 || n > cons.completed_stages()) throw ConfigError("tail check on a stage that is not built");
    if (k == 0 || k > p.mu[n]) throw ConfigError("tail check needs 1 <= k <= mu_n");
    const std::size_t t = to_index(p.t[n]);
    for (const auto& kv : x)
        if (kv.first < t || kv.first >= cons.dimension()) throw ConfigError("tail vector outside [t_n, dimension)");
    const unsigned N = p.N[n];
    CoordVector img = cons.op().apply_power(x, to_index(p.c_pow(n, k)));
    LedgerReport tmp;
    return tmp.add("L4.9", {n, k}, cons.p(N, img), Rel::LE, cons.p(N + 3, x));
}

LedgerReport tail_battery(const Construction& cons, std::size_t samples, std::uint64_t seed) {
    const ReadParameters& p = cons.params();
    LedgerReport rep;
    std::mt19937_64 rng(seed);
    for (unsigned n = 1; n <= cons.completed_stages(); ++n)
        for (unsigned k = 1; k <= p.mu[n]; ++k) {
            const std::size_t t = to_index(p.t[n]), c = to_index(p.c_pow(n, k));
            if (t + c >= cons.dimension()) continue;
            for (std::size_t s = 0; s < samples; ++s) {
                CoordVector x = random_support(rng, t, cons.dimension() - c, 5);
                Record r = tail_check(cons, n, k, x);
                r.idx.push_back(ll(s));
                rep.records.push_back(std::move(r));
            }
        }
    return rep;
}

std::vector<CoordVector> sample_kn(const Construction& cons, unsigned n, std::size_t count, std::uint64_t seed) {
    const std::size_t t = to_index(cons.params().t[n]);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> scale(12, 20), noise(-4, 4);
    std::uniform_int_distribution<std::size_t> idx(1, t - 1);
    std::vector<CoordVector> out;
    const Scalar p0 = cons.pu(1, 0);
    while (out.size() < count) {
        // s in [3/4, 5/4] times the p_1-normalized u_0, plus noise worth at most 1/8 in p_1.
        Scalar s0(scale(rng), 16);
        s0.canonicalize();
        CoordVector y = unit(0, s0 / p0);
        for (int i = 0; i < 3; ++i) {
            std::size_t j = idx(rng);
            int v = noise(rng);
            if (v == 0) continue;
            Scalar q(v, 96);
            q.canonicalize();
            y[j] = q / cons.pu(1, j);
        }
        prune(y);
        if (kn_membership(cons, n, y).member) out.push_back(std::move(y));
    }
    return out;
}

LedgerReport cor47_check(const Construction& cons, unsigned n, const std::vector<CoordVector>& ys) {
    const ReadParameters& p = cons.params();
    if (n < 2 || n > cons.completed_stages()) throw ConfigError("covering check needs a built stage n >= 2");
    const std::size_t t = to_index(p.t[n]), a = to_index(p.a[n]);
    if (2 * t >= cons.dimension()) throw ConfigError("covering check needs u_j up to 2 t_n");
    const unsigned N = p.N[n];
    std::vector<Polynomial> family;
    Scalar D = 1;
    for (const auto& y : ys) {
        PSynthesis s = synthesize_P(cons.op(), n, y);
        D = std::max(D, s.D);
        family.push_back(std::move(s.P));
    }
    Scalar top = 0;
    for (std::size_t j = t; j <= 2 * t; ++j) top = std::max(top, cons.pu(N, j));
    const Scalar bound = 2 * cons.pu(N, a) + D * top;
    LedgerReport rep;
    rep.set_meta("D", to_string(D));
    for (std::size_t i = 0; i < ys.size(); ++i) {
        KnMembership m = kn_membership(cons, n, ys[i]);
        rep.add("K_n", {n, ll(i)}, Scalar(m.member ? 1 : 0), Rel::EQ, Scalar(1));
        Scalar best;
        for (std::size_t l = 0; l < family.size(); ++l) {
            Scalar r = cons.p(N, diff(cons.op().poly_apply(family[l], ys[i]), unit(0)));
            if (l == 0 || r < best) best = r;
        }
        rep.add("C4.7", {n, ll(i)}, best, Rel::LE, bound);
    }
    return rep;
}

LedgerReport net_check(const Construction& cons, unsigned n, std::size_t samples, std::uint64_t seed) {
    const StageFamilies* f = cons.op().families(n);
    if (!f) throw ConfigError("net check on a stage without families");
    const unsigned R = cons.params().R[n];
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> num(-60, 60);
    LedgerReport rep;
    // Lattice step 1 / (ceil(1/mesh) (R + 1)).
    const Scalar inv = 1 / f->mesh;
    Integer q = inv.get_num() / inv.get_den();
    if (q * inv.get_den() != inv.get_num()) q += 1;
    const Integer step_d = q * (R + 1);
    for (std::size_t s = 0; s < samples; ++s) {
        std::vector<Scalar> c(R + 1);
        for (auto& v : c) {
            v = Scalar(num(rng), 61);
            v.canonicalize();
        }
        Polynomial S(c);
        if (S.norm() > R) continue;
        Polynomial w = net_round(S, R, f->mesh);
        rep.add("net.mesh", {n, ll(s)}, (S - w).norm(), Rel::LE, f->mesh);
        rep.add("net.norm", {n, ll(s)}, w.norm(), Rel::LE, Scalar(R));
        bool lattice = true;
        for (const auto& v : w.coef) {
            Scalar u = v * step_d;
            lattice = lattice && u.get_den() == 1;
        }
        rep.add("net.lattice", {n, ll(s)}, Scalar(lattice ? 1 : 0), Rel::EQ, Scalar(1));
    }
    return rep;
}

WitnessResult witness(const Construction& cons, const CoordVector& x0, const CoordVector& z, unsigned N,
                      const std::optional<Polynomial>& S_in) {
    const ReadParameters& p = cons.params();
    const ReadOperator& op = cons.op();
    WitnessResult res;
    const Scalar p1 = cons.p(1, x0);
    if (p1 == 0) throw ConfigError("witness needs x != 0");
    const Scalar scale = 1 / p1;
    const CoordVector x = scaled(x0, scale);
    const CoordVector zu = z;
    bool any_stage = false;
    for (unsigned n = 2; n <= cons.completed_stages(); ++n) {
        const StageFamilies* f = op.families(n);
        const unsigned R = p.R[n], Nn = p.N[n];
        const std::string tag = "stage " + std::to_string(n) + ": ";
        if (Nn != N + 2 * R) {
            res.diagnostics.push_back(tag + "(N_n, R_n) = (" + std::to_string(Nn) + ", " + std::to_string(R) +
                                      "), need N_n = N + 2 R_n");
            continue;
        }
        any_stage = true;
        // S and its net element.
        Polynomial S;
        std::size_t w = 0;
        if (S_in) {
            S = *S_in;
            if (S.degree() > R || S.norm() > R) {
                res.diagnostics.push_back(tag + "S exceeds R_n");
                continue;
            }
            Polynomial sw = net_round(S, R, f->mesh);
            auto it = std::find(f->S.begin(), f->S.end(), sw);
            if (it == f->S.end()) {
                res.diagnostics.push_back(tag + "net element " + sw.str() + " lies outside the capped net");
                continue;
            }
            w = static_cast<std::size_t>(it - f->S.begin()) + 1;
        } else {
            for (std::size_t i = 0; i < f->S.size() && w == 0; ++i)
                if (cons.p(Nn, diff(op.poly_apply(f->S[i], unit(0)), zu)) <= 1) w = i + 1;
            if (w == 0) {
                res.diagnostics.push_back(tag + "z is outside the reach of the capped net");
                continue;
            }
            S = f->S[w - 1];
        }
        const Polynomial& Sw = f->S[w - 1];
        const std::size_t t = to_index(p.t[n]);
        const CoordVector y = below(x, t);
        KnMembership m = kn_membership(cons, n, y);
        if (!m.member) {
            res.diagnostics.push_back(tag + "y not in K_n: p_1(y) = " + to_string(m.p1) +
                                      ", p_1(tau_n y) = " + to_string(m.p1_tau));
            continue;
        }
        // P with the smallest covering residual; ties go to the smallest index.
        std::size_t l = 0;
        Scalar best;
        for (std::size_t i = 0; i < f->P.size(); ++i) {
            Scalar r = cons.p(Nn, diff(op.poly_apply(f->P[i], y), unit(0)));
            if (i == 0 || r < best) best = r, l = i + 1;
        }
        std::size_t k = 0;
        for (std::size_t i = 0; i < f->back.size() && k == 0; ++i)
            if (f->back[i] == std::make_pair(l, w)) k = i + 1;
        if (k == 0) {
            res.diagnostics.push_back(tag + "no Q_{n,k} = P_l S_w for l = " + std::to_string(l) +
                                      ", w = " + std::to_string(w));
            continue;
        }
        const std::size_t i = to_index(p.c_pow(n, static_cast<unsigned>(k)));
        const Polynomial& Q = f->Q[k - 1];
        WitnessCertificate c;
        c.stage = n;
        c.level = Nn;
        c.k = k;
        c.l = l;
        c.w = w;
        c.power = p.c_pow(n, static_cast<unsigned>(k));
        c.S = S;
        c.scale = scale;
        const CoordVector tail = diff(x, y);
        try {
            c.terms[0] = cons.p(Nn, op.apply_power(tail, i));
        } catch (const TruncationExit&) {
            c.terms[0] = cons.p(Nn + 3, tail);
            c.tail_bounded = true;
        }
        const CoordVector Ty = op.apply_power(y, i);
        c.terms[1] = cons.p(Nn, diff(Ty, op.poly_apply(Q, y)));
        c.terms[2] = cons.p(Nn, op.poly_apply(Sw, diff(op.poly_apply(f->P[l - 1], y), unit(0))));
        const CoordVector Su0 = op.poly_apply(S, unit(0));
        c.terms[3] = cons.p(Nn, diff(op.poly_apply(Sw, unit(0)), Su0));
        c.terms[4] = cons.p(Nn, diff(Su0, zu));
        c.total = 0;
        for (const auto& v : c.terms) c.total += v;
        try {
            CoordVector orbit_point = diff(op.apply_power(x, i), zu);
            c.exact_top = cons.p(Nn, orbit_point);
            c.exact_N = cons.p(N, orbit_point);
        } catch (const TruncationExit&) {
            res.diagnostics.push_back(tag + "T^i x leaves the truncation; exact value unavailable");
            c.exact_top = c.exact_N = -1;
        }
        res.cert = std::move(c);
        return res;
    }
    if (!any_stage)
        res.diagnostics.push_back("no stage up to the horizon has (N_n, R_n) with N_n = " + std::to_string(N) +
                                  " + 2 R_n");
    return res;
}

}  // namespace ksp
