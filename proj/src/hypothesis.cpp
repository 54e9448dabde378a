#include "ksp/hypothesis.hpp"

#include <algorithm>
#include <set>

namespace ksp {

namespace {

using ll = long long;

std::string nstr(std::size_t n) { return std::to_string(n); }

Scalar p_unit(const KotheSpace& s, unsigned j, const FamilyEntry& e) {
    return abs(e.alpha) * s.entry(j, e.n);
}

Scalar positive_p1(const KotheSpace& s, std::size_t n) {
    Scalar v = s.entry(1, n);
    if (v <= 0) throw HypothesisError("p_1(e_" + nstr(n) + ") = 0");
    return v;
}

// Min and max of p_j(e_n)/p_j(e_{n+1}) over j <= K and lo <= n < hi.
std::pair<Scalar, Scalar> ratio_extremes(const KotheSpace& s, unsigned K, std::size_t lo,
                                         std::size_t hi) {
    std::optional<Scalar> mn, mx;
    for (unsigned j = 1; j <= K; ++j)
        for (std::size_t n = lo; n < hi; ++n) {
            Scalar d = s.entry(j, n + 1);
            if (d == 0) throw HypothesisError("p_" + std::to_string(j) + "(e_" + nstr(n + 1) + ") = 0");
            Scalar r = s.entry(j, n) / d;
            if (!mn || r < *mn) mn = r;
            if (!mx || r > *mx) mx = r;
        }
    if (!mn) return {Scalar(1), Scalar(1)};
    return {*mn, *mx};
}

}  // namespace

void SelectionParams::validate() const {
    if (eps <= 0) throw ConfigError("eps must be positive");
    if (C < 1) throw ConfigError("C must be >= 1");
    if (M < 1) throw ConfigError("M must be >= 1");
    if (N < 1) throw ConfigError("N must be >= 1");
    if (J < 2 || K < J) throw ConfigError("need K >= J >= 2");
    if (basis_bound < 1) throw ConfigError("basis bound must be >= 1");
}

const FamilyEntry& SelectionFamily::at(unsigned j, unsigned m) const {
    return entries.at((j - 1) * params.M + (m - 1));
}

FamilyEntry& SelectionFamily::at(unsigned j, unsigned m) {
    return entries.at((j - 1) * params.M + (m - 1));
}

std::optional<std::pair<unsigned, unsigned>> lex_next(unsigned j, unsigned m, unsigned J, unsigned M,
                                                      unsigned l) {
    std::size_t pos = static_cast<std::size_t>(j - 1) * M + (m - 1) + l;
    if (pos >= static_cast<std::size_t>(J) * M) return std::nullopt;
    return std::make_pair(static_cast<unsigned>(pos / M) + 1, static_cast<unsigned>(pos % M) + 1);
}

std::optional<std::size_t> check_cor34(const KotheSpace& space, unsigned j, const Scalar& Cj,
                                       const Scalar& L, std::size_t N, std::size_t window) {
    for (std::size_t n = N + 1; n <= window; ++n) {
        Scalar p1 = positive_p1(space, n);
        Scalar pj = space.entry(j, n);
        if (pj <= Cj * p1 && space.entry(j + 1, n) >= L * pj) return n;
    }
    return std::nullopt;
}

LedgerReport check_cor37(const KotheSpace& space, unsigned j_max, std::size_t n_max,
                         const Scalar& growth_threshold) {
    LedgerReport rep;
    rep.set_meta("window", "j<=" + std::to_string(j_max) + ", n<=" + nstr(n_max));
    // R[j-1][n] for j <= j_max, n <= n_max + 1.
    std::vector<std::vector<Scalar>> R(j_max);
    for (unsigned j = 1; j <= j_max; ++j)
        for (std::size_t n = 0; n <= n_max + 1; ++n) {
            if (space.entry(j, n) == 0)
                throw HypothesisError("p_" + std::to_string(j) + "(e_" + nstr(n) + ") = 0");
            R[j - 1].push_back(space.ratio_R(j, n));
        }
    for (unsigned j = 1; j <= j_max; ++j) {
        for (std::size_t n = 0; n <= n_max; ++n) {
            if (j < j_max) rep.add("R.mono_j", {ll(j), ll(n)}, R[j - 1][n], Rel::LE, R[j][n]);
            if (n < n_max) rep.add("R.mono_n", {ll(j), ll(n)}, R[j - 1][n], Rel::LE, R[j - 1][n + 1]);
            if (j < j_max && n < n_max)
                rep.add("R.interlace", {ll(j), ll(n)}, R[j][n], Rel::LE, R[j - 1][n + 1]);
        }
        rep.add("R.growth", {ll(j), ll(n_max)}, R[j - 1][n_max], Rel::GE, growth_threshold);
        std::optional<Scalar> lo, hi;
        for (std::size_t n = 0; n < n_max; ++n) {
            Scalar r = space.entry(j, n) / space.entry(j, n + 1);
            if (!lo || r < *lo) lo = r;
            if (!hi || r > *hi) hi = r;
        }
        if (lo) {
            rep.add("ratio.inf", {ll(j)}, *lo, Rel::GT, Scalar(0));
            rep.set_meta("ratio_min_" + std::to_string(j), to_string(*lo));
            rep.set_meta("ratio_max_" + std::to_string(j), to_string(*hi));
        }
    }
    return rep;
}

std::vector<std::size_t> check_cor314(const KotheSpace& space, unsigned j, const Scalar& C,
                                      std::size_t window) {
    std::vector<std::size_t> out;
    for (std::size_t n = 0; n <= window; ++n)
        if (space.entry(j + 1, n) > C * space.entry(j, n)) out.push_back(n);
    return out;
}

SelectionFamily select_family_cor34(const KotheSpace& space, const SelectionParams& P,
                                    std::size_t window) {
    P.validate();
    const unsigned J = P.J, M = P.M, K = P.K;
    const Scalar& C = P.C;
    const Scalar& G = P.basis_bound;
    SelectionFamily fam;
    fam.params = P;
    fam.method = "cor34";
    fam.entries.resize(static_cast<std::size_t>(J) * M);
    std::size_t floor_idx = P.N;  // every new index exceeds all earlier ones

    auto exhausted = [&](unsigned j, unsigned m, const std::string& what) {
        return WindowExhausted("window " + nstr(window) + " exhausted selecting n_{" +
                               std::to_string(j) + "," + std::to_string(m) + "}: no index with " + what);
    };

    // Top row: consecutive indices above N, scalars fixed backwards from m = M.
    for (unsigned m = 1; m <= M; ++m) {
        std::size_t n = ++floor_idx;
        if (n > window) throw exhausted(J, m, "p_1(e_n) > 0");
        positive_p1(space, n);
        fam.at(J, m).n = n;
    }
    fam.at(J, M).alpha = (1 / P.eps) / space.entry(1, fam.at(J, M).n);
    for (unsigned m = M - 1; m >= 1; --m) {
        FamilyEntry& e = fam.at(J, m);
        e.alpha = C * p_unit(space, K, fam.at(J, m + 1)) / space.entry(1, e.n);
    }

    Scalar eta = P.eps / (pow(Scalar(G * C), (J - 2) * M) * pow(C, M - 1));
    fam.notes.emplace_back("eta", to_string(eta));

    // Row J-1: large p_2/p_1 ratios, chosen from m = M downwards.
    for (unsigned m = M; m >= 1; --m) {
        Scalar need;
        std::string what;
        if (m == M) {
            need = C * p_unit(space, K, fam.at(J, 1)) / eta;
            what = "p_2(e_n)/p_1(e_n) > C p_K(alpha_{J,1} e)/eta = " + to_string(need);
        } else {
            const FamilyEntry& nx = fam.at(J - 1, m + 1);
            need = space.entry(K, nx.n) / space.entry(1, nx.n);
            what = "p_2(e_n)/p_1(e_n) > p_K(e_next)/p_1(e_next) = " + to_string(need);
        }
        std::size_t n = floor_idx + 1;
        for (; n <= window; ++n)
            if (space.entry(2, n) > need * positive_p1(space, n)) break;
        if (n > window) throw exhausted(J - 1, m, what);
        floor_idx = n;
        FamilyEntry& e = fam.at(J - 1, m);
        e.n = n;
        if (m == M) e.alpha = eta / space.entry(1, n);
        else e.alpha = C * p_unit(space, 1, fam.at(J - 1, m + 1)) / space.entry(1, n);
    }

    // Rows j < J-1, each above everything chosen so far.
    for (unsigned j = J - 2; j >= 1; --j) {
        const unsigned lo = J - j, hi = J - j + 1;
        for (unsigned m = M; m >= 1; --m) {
            const FamilyEntry& nx = (m == M) ? fam.at(j + 1, 1) : fam.at(j, m + 1);
            Scalar need = space.entry(K, nx.n) / space.entry(1, nx.n);
            std::size_t n = floor_idx + 1;
            for (; n <= window; ++n) {
                Scalar p1 = positive_p1(space, n);
                Scalar plo = space.entry(lo, n);
                if (space.entry(hi, n) > need * plo && plo <= G * p1) break;
            }
            if (n > window)
                throw exhausted(j, m, "p_" + std::to_string(hi) + "(e_n) > " + to_string(need) + " p_" +
                                          std::to_string(lo) + "(e_n) and p_" + std::to_string(lo) +
                                          "(e_n) <= Gamma p_1(e_n)");
            floor_idx = n;
            FamilyEntry& e = fam.at(j, m);
            e.n = n;
            Scalar target = (m == M) ? C * p_unit(space, J - j - 1, fam.at(j + 1, 1))
                                     : C * p_unit(space, J - j, fam.at(j, m + 1));
            e.alpha = target / space.entry(1, n);
        }
    }
    return fam;
}

SelectionFamily select_family_cor37(const KotheSpace& space, const SelectionParams& P,
                                    std::size_t window, const Cor37Options& opts) {
    P.validate();
    const unsigned J = P.J, M = P.M, K = P.K;
    const Scalar& C = P.C;
    const std::size_t JM = static_cast<std::size_t>(J) * M;

    std::size_t pre = std::min(window, opts.precheck_window);
    LedgerReport hyp = check_cor37(space, K + 1, pre, Scalar(2));
    if (!hyp.all_pass()) {
        const Record* f = hyp.failures().front();
        throw HypothesisError("ratio hypotheses fail on the window n<=" + nstr(pre) + ": " + f->cond +
                              format_idx(f->idx) + " " + to_string(f->lhs) + " " + rel_symbol(f->rel) +
                              " " + to_string(f->rhs));
    }

    const unsigned long E = static_cast<unsigned long>(J) * J * M;
    const Scalar base = pow(C, E) / (P.eps * P.eps);
    // Threshold and bounds use gamma, Gamma taken over the family range itself.
    auto feasible = [&](std::size_t n0, Scalar* thr_out) {
        if (n0 + JM - 1 > window) return false;
        auto [g, G] = ratio_extremes(space, K, n0, n0 + JM - 1);
        g = std::min(g, Scalar(1));
        G = std::max(G, Scalar(1));
        Scalar thr = base * pow(Scalar(G / g), E);
        if (thr_out) *thr_out = thr;
        for (unsigned j = 1; j <= K; ++j)
            for (std::size_t n = n0; n < n0 + JM; ++n)
                if (!(space.ratio_R(j, n) > thr)) return false;
        return true;
    };

    std::size_t lo = P.N;  // infeasible or below the allowed range
    std::size_t hi = P.N + 1;
    while (!feasible(hi, nullptr)) {
        if (hi + JM > window)
            throw WindowExhausted("threshold index N_0 lies beyond the window " + nstr(window) +
                                  " (R_{j,n} never exceeds C^{J^2 M}/eps^2 (Gamma/gamma)^{J^2 M})");
        lo = hi;
        hi = std::min<std::size_t>(2 * hi, window - JM + 1);
        if (hi == lo) ++hi;
    }
    while (hi - lo > 1) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (mid > P.N && feasible(mid, nullptr)) hi = mid;
        else lo = mid;
    }
    const std::size_t N0 = hi;
    Scalar thr;
    feasible(N0, &thr);

    SelectionFamily fam;
    fam.params = P;
    fam.method = "cor37";
    fam.entries.resize(JM);
    fam.notes.emplace_back("N0", nstr(N0));
    fam.notes.emplace_back("threshold", to_string(thr));
    for (unsigned j = 1; j <= J; ++j)
        for (unsigned m = 1; m <= M; ++m) fam.at(j, m).n = N0 + (j - 1) * M + m - 1;

    Scalar prodR = 1;
    for (unsigned j = J - 1; j + 2 <= K; ++j) prodR *= space.ratio_R(j, fam.at(1, 1).n);
    for (unsigned m = 1; m <= M; ++m) {
        FamilyEntry& e = fam.at(1, m);
        e.alpha = P.eps * prodR / (pow(C, m - 1) * space.entry(K - 1, e.n));
    }
    for (unsigned j = 2; j <= J; ++j) {
        Scalar top = p_unit(space, K, fam.at(j - 1, 1));
        for (unsigned m = 1; m <= M; ++m) {
            FamilyEntry& e = fam.at(j, m);
            e.alpha = top / (pow(C, (j - 1) * M + m - 1) * space.entry(K - 1, e.n));
        }
    }
    return fam;
}

LedgerReport verify_theorem33(const KotheSpace& space, const SelectionFamily& fam) {
    const SelectionParams& P = fam.params;
    const unsigned J = P.J, M = P.M, K = P.K;
    LedgerReport rep;
    rep.set_meta("family", fam.method);
    if (fam.entries.size() != static_cast<std::size_t>(J) * M) {
        rep.add("struct.size", {}, Scalar(static_cast<long>(fam.entries.size())), Rel::EQ,
                Scalar(static_cast<long>(J * M)));
        return rep;
    }
    std::set<std::size_t> seen;
    for (unsigned j = 1; j <= J; ++j)
        for (unsigned m = 1; m <= M; ++m) {
            const FamilyEntry& e = fam.at(j, m);
            seen.insert(e.n);
            rep.add("struct.index", {ll(j), ll(m)}, Scalar(static_cast<unsigned long>(e.n)), Rel::GT,
                    Scalar(static_cast<unsigned long>(P.N)));
            rep.add("struct.nonzero", {ll(j), ll(m)}, abs(e.alpha), Rel::GT, Scalar(0));
        }
    rep.add("struct.distinct", {}, Scalar(static_cast<unsigned long>(seen.size())), Rel::EQ,
            Scalar(static_cast<unsigned long>(fam.entries.size())));

    const Scalar inv_eps = 1 / P.eps;
    for (unsigned m = 1; m <= M; ++m) {
        rep.add("T3.3(1)", {ll(m)}, p_unit(space, J - 1, fam.at(1, m)), Rel::LE, P.eps);
        rep.add("T3.3(2)", {ll(m)}, p_unit(space, 1, fam.at(J, m)), Rel::GE, inv_eps);
    }
    for (unsigned j = 1; j <= J; ++j)
        for (unsigned m = 1; m <= M; ++m) {
            const FamilyEntry& e = fam.at(j, m);
            for (unsigned l = 1; l <= M; ++l) {
                auto nx = lex_next(j, m, J, M, l);
                if (!nx) break;
                const FamilyEntry& f = fam.at(nx->first, nx->second);
                for (unsigned k = 1; k < K; ++k)
                    rep.add("T3.3(3)", {ll(j), ll(m), ll(l), ll(k)}, P.C * p_unit(space, k, f), Rel::LE,
                            p_unit(space, k + 1, e));
            }
            rep.add("T3.3.derived", {ll(j), ll(m)}, p_unit(space, J - j + 1, e), Rel::GE, inv_eps);
        }
    const FamilyEntry& first = fam.at(1, 1);
    Scalar den = p_unit(space, J - 1, first);
    if (den > 0)
        rep.add("T3.3.ratio", {}, p_unit(space, J, first) / den, Rel::GE, inv_eps * inv_eps,
                "p_J/p_{J-1} of alpha_{1,1} e_{n_{1,1}}");
    return rep;
}

}  // namespace ksp
