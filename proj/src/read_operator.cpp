#include "ksp/read_operator.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <tuple>
#include <sstream>
#include <unordered_map>

namespace ksp {

namespace {

std::string stage_tag(unsigned n) { return " (stage " + std::to_string(n) + ")"; }

void require(bool ok, const std::string& what, unsigned n) {
    if (!ok) throw ParameterError(what + " violated" + stage_tag(n));
}

template <class T>
T at_or(const std::vector<T>& v, std::size_t i, T fallback) {
    return i < v.size() ? v[i] : fallback;
}

Scalar times_pow2(const Scalar& x, long e) {
    Scalar r;
    if (e >= 0) mpq_mul_2exp(r.get_mpq_t(), x.get_mpq_t(), static_cast<mp_bitcnt_t>(e));
    else mpq_div_2exp(r.get_mpq_t(), x.get_mpq_t(), static_cast<mp_bitcnt_t>(-e));
    return r;
}

}  // namespace

std::size_t to_index(const Integer& z) {
    if (sgn(z) < 0 || !z.fits_ulong_p()) throw ConfigError("index " + z.get_str() + " does not fit");
    return static_cast<std::size_t>(z.get_ui());
}

Integer ReadParameters::c_pow(unsigned n, unsigned k) const {
    if (n == 0) return 0;
    return ipow(c.at(n), k);
}

Integer ReadParameters::c_top(unsigned n) const {
    if (n == 0) return 0;
    return c_pow(n, mu.at(n));
}

std::size_t ReadParameters::dimension() const { return to_index(t.at(horizon + 1)); }

void validate_parameters(const ReadParameters& p) {
    const unsigned H = p.horizon;
    if (H == 0) throw ParameterError("horizon must be >= 1");
    if (p.mu.size() < H + 1 || p.c.size() < H + 1 || p.R.size() < H + 1 || p.delta.size() < H + 2 ||
        p.a.size() < H + 2 || p.t.size() < H + 2 || p.N.size() < H + 2)
        throw ParameterError("parameter vectors shorter than the horizon");
    require(p.delta[1] == 1, "Δ_1 = 1", 1);
    for (unsigned n = 1; n <= H + 1; ++n) {
        require(2 * p.delta[n] < p.a[n], "2Δ_n < a_n", n);
        require(p.a[n] + p.delta[n] < p.t[n], "a_n + Δ_n < t_n", n);
        require(p.t[n] % (n + 1) == 0, "t_n multiple of n+1", n);
        require(p.N[n] >= 1, "N_n >= 1", n);
        if (!p.relaxed_schedule) require(p.N[n] <= n, "N_n <= n", n);
        if (n > 1) {
            unsigned lo = std::min(p.N[n], p.N[n - 1]), hi = std::max(p.N[n], p.N[n - 1]);
            require(hi - lo <= 1, "|N_{n+1} - N_n| <= 1", n - 1);
        }
    }
    for (unsigned n = 1; n <= H; ++n) {
        require(p.mu[n] >= 1, "μ_n >= 1", n);
        if (!p.relaxed_schedule) require(p.R[n] <= n, "R_n <= n", n);
        require(3 * p.t[n] + n < p.c[n], "3t_n + n < c_n", n);
        for (unsigned k = 1; k < p.mu[n]; ++k)
            require(2 * p.c_pow(n, k) + 2 * p.t[n] < p.c_pow(n, k + 1), "2c_n^k + 2t_n < c_n^{k+1}", n);
        require(p.delta[n + 1] == p.c_top(n) + p.t[n], "Δ_{n+1} = c_n^{μ_n} + t_n", n);
        require(p.t[n + 1] > p.t[n], "t_{n+1} > t_n", n);
    }
}

ReadParameters make_parameters(unsigned horizon, const ScheduleSpec& sched, const Integer& t1,
                               const Integer& a1) {
    ReadParameters p;
    p.horizon = horizon;
    p.relaxed_schedule = sched.relaxed;
    const unsigned H = horizon;
    p.mu.assign(H + 1, 1);
    p.R.assign(H + 1, 1);
    p.N.assign(H + 2, 1);
    p.c.assign(H + 1, 0);
    p.delta.assign(H + 2, 0);
    p.a.assign(H + 2, 0);
    p.t.assign(H + 2, 0);
    for (unsigned n = 1; n <= H; ++n) {
        p.mu[n] = at_or(sched.mu, n - 1, 1u);
        p.R[n] = at_or(sched.R, n - 1, 1u);
    }
    for (unsigned n = 1; n <= H + 1; ++n) p.N[n] = at_or(sched.N, n - 1, 1u);
    p.delta[1] = 1;
    p.a[1] = a1;
    p.t[1] = t1;
    if (H >= 1) {
        require(t1 >= a1 + 2, "t_1 >= a_1 + Δ_1 + 1", 1);
        require(t1 % 2 == 0, "t_n multiple of n+1", 1);
        require(2 < a1, "2Δ_n < a_n", 1);
    }
    for (unsigned n = 1; n <= H; ++n) {
        p.c[n] = p.t[n] + (n + 1) * (2 * p.t[n] + n);
        Integer top = p.c_top(n);
        p.delta[n + 1] = top + p.t[n];
        p.a[n + 1] = (n + 1) * p.delta[n + 1] + top + p.t[n];
        Integer floor_t = p.a[n + 1] + p.delta[n + 1] + top;
        Integer m = n + 2;
        p.t[n + 1] = (floor_t / m + 1) * m;
    }
    validate_parameters(p);
    return p;
}

BasisAssignment::BasisAssignment(std::size_t dimension)
    : e_index(dimension, npos), alpha(dimension), sigma(dimension, npos) {}

void BasisAssignment::assign(std::size_t j, std::size_t e, const Scalar& a) {
    if (j >= size() || e >= size()) throw InternalError("assignment outside the truncation");
    if (a == 0) throw InternalError("zero scalar for u_" + std::to_string(j));
    if (e_index[j] != npos) sigma[e_index[j]] = npos;
    if (sigma[e] != npos && sigma[e] != j) throw InternalError("e-index " + std::to_string(e) + " reused");
    e_index[j] = e;
    alpha[j] = a;
    sigma[e] = j;
}

Scalar BasisAssignment::lambda_of_e(std::size_t m) const {
    if (m >= size() || sigma[m] == npos) throw InternalError("e_" + std::to_string(m) + " unassigned");
    return 1 / alpha[sigma[m]];
}

CoordVector BasisAssignment::to_e(const CoordVector& x) const {
    CoordVector out;
    for (const auto& [j, v] : x) {
        if (!assigned(j)) throw InternalError("u_" + std::to_string(j) + " unassigned");
        out[e_index[j]] = v * alpha[j];
    }
    return out;
}

CoordVector BasisAssignment::from_e(const CoordVector& x) const {
    CoordVector out;
    for (const auto& [m, v] : x) out[sigma.at(m)] = v * lambda_of_e(m);
    return out;
}

Polynomial::Polynomial(std::vector<Scalar> c) : coef(std::move(c)) {
    while (!coef.empty() && coef.back() == 0) coef.pop_back();
}

Polynomial Polynomial::monomial(std::size_t deg, const Scalar& c) {
    std::vector<Scalar> v(deg + 1);
    v[deg] = c;
    return Polynomial(std::move(v));
}

std::size_t Polynomial::degree() const { return coef.empty() ? 0 : coef.size() - 1; }

Scalar Polynomial::norm() const {
    Scalar s = 0;
    for (const auto& c : coef) s += abs(c);
    return s;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
    if (is_zero() || o.is_zero()) return {};
    std::vector<Scalar> r(coef.size() + o.coef.size() - 1);
    for (std::size_t i = 0; i < coef.size(); ++i)
        if (coef[i] != 0)
            for (std::size_t j = 0; j < o.coef.size(); ++j) r[i + j] += coef[i] * o.coef[j];
    return Polynomial(std::move(r));
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
    std::vector<Scalar> r(std::max(coef.size(), o.coef.size()));
    for (std::size_t i = 0; i < coef.size(); ++i) r[i] += coef[i];
    for (std::size_t i = 0; i < o.coef.size(); ++i) r[i] -= o.coef[i];
    return Polynomial(std::move(r));
}

std::string Polynomial::str() const {
    if (coef.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (std::size_t i = 0; i < coef.size(); ++i) {
        if (coef[i] == 0) continue;
        if (!first) os << " + ";
        first = false;
        os << to_string(coef[i]);
        if (i) os << "*X^" << i;
    }
    return os.str();
}

// ---------------------------------------------------------------- operator

ReadOperator::ReadOperator(ReadParameters params) : params_(std::move(params)) {
    validate_parameters(params_);
    dim_ = params_.dimension();
    windows_.assign(dim_, {});
    const unsigned H = params_.horizon;
    for (unsigned n = 1; n <= H + 1; ++n) {
        std::size_t a = to_index(params_.a[n]), d = to_index(params_.delta[n]);
        for (std::size_t j = a; j < a + d && j < dim_; ++j) windows_[j] = {WindowKind::A, n, 0, a};
    }
    for (unsigned n = 1; n <= H; ++n) {
        std::size_t t = to_index(params_.t[n]);
        for (unsigned k = 1; k <= params_.mu[n]; ++k) {
            Integer ck = params_.c_pow(n, k);
            if (ck >= dim_) break;
            std::size_t c = to_index(ck);
            for (std::size_t j = c; j < c + t && j < dim_; ++j) windows_[j] = {WindowKind::C, n, k, c};
        }
    }
    fam_.resize(H + 2);
    memo_.resize(dim_);
}

void ReadOperator::set_families(const StageFamilies& f) {
    if (f.n == 0 || f.n > params_.horizon) throw InternalError("families for a stage outside the horizon");
    if (f.Q.size() != params_.mu[f.n])
        throw ConstructionError("stage " + std::to_string(f.n) + " has " + std::to_string(f.Q.size()) +
                                " polynomials Q but μ_n = " + std::to_string(params_.mu[f.n]));
    fam_[f.n] = f;
    // Iterates inside this stage's windows may have been refused before; nothing cached depends on Q.
}

const StageFamilies* ReadOperator::families(unsigned n) const {
    if (n >= fam_.size() || !fam_[n]) return nullptr;
    return &*fam_[n];
}

WindowInfo ReadOperator::window(std::size_t j) const {
    if (j >= dim_) throw TruncationExit("index " + std::to_string(j) + " outside the truncation");
    return windows_[j];
}

const CoordVector& ReadOperator::gamma(std::size_t j) const {
    if (j >= dim_) throw TruncationExit("T^" + std::to_string(j) + " u_0 outside the truncation");
    if (memo_[j]) return *memo_[j];
    CoordVector g = unit(j);
    const WindowInfo& w = windows_[j];
    if (w.kind == WindowKind::A) {
        axpy(g, Scalar(1), gamma(j - to_index(params_.a[w.n])));
    } else if (w.kind == WindowKind::C) {
        const StageFamilies* f = families(w.n);
        if (!f)
            throw ConstructionError("T^" + std::to_string(j) + " u_0 needs Q_{" + std::to_string(w.n) + "," +
                                    std::to_string(w.k) + "}, which is not fixed yet");
        const Polynomial& Q = f->Q[w.k - 1];
        std::size_t base = j - w.start;
        for (std::size_t i = 0; i < Q.coef.size(); ++i)
            if (Q.coef[i] != 0) axpy(g, Q.coef[i], gamma(base + i));
    }
    memo_[j] = std::move(g);
    return *memo_[j];
}

void ReadOperator::check_support(const CoordVector& x, const char* what) const {
    if (!x.empty() && x.rbegin()->first >= dim_)
        throw TruncationExit(std::string(what) + ": index " + std::to_string(x.rbegin()->first) +
                             " outside the truncation");
}

CoordVector ReadOperator::apply(const CoordVector& x) const {
    check_support(x, "apply_T");
    CoordVector out;
    for (const auto& [j, v] : x) {
        if (j + 1 >= dim_)
            throw TruncationExit("T u_" + std::to_string(j) + " needs u_" + std::to_string(j + 1) +
                                 ", outside the truncation");
        axpy(out, v, unit(j + 1));
        const WindowInfo& next = windows_[j + 1];
        const WindowInfo& cur = windows_[j];
        // Entering a window: the perturbation T^{start} u_0 - u_{start}.
        if (next.kind != WindowKind::None && next.start == j + 1) {
            if (next.kind == WindowKind::A) {
                axpy(out, v, unit(0));
            } else {
                const StageFamilies* f = families(next.n);
                if (!f) throw ConstructionError("T u_" + std::to_string(j) + " needs an unfixed Q");
                const Polynomial& Q = f->Q[next.k - 1];
                for (std::size_t i = 0; i < Q.coef.size(); ++i)
                    if (Q.coef[i] != 0) axpy(out, v * Q.coef[i], gamma(i));
            }
        }
        // Leaving a window.
        bool leaving = cur.kind != WindowKind::None &&
                       (next.kind != cur.kind || next.start != cur.start || next.n != cur.n);
        if (leaving) {
            if (cur.kind == WindowKind::A) {
                axpy(out, -v, unit(to_index(params_.delta[cur.n])));
            } else {
                const Polynomial& Q = families(cur.n)->Q[cur.k - 1];
                std::size_t t = to_index(params_.t[cur.n]);
                for (std::size_t i = 0; i < Q.coef.size(); ++i)
                    if (Q.coef[i] != 0) axpy(out, -v * Q.coef[i], unit(t + i));
            }
        }
    }
    prune(out);
    return out;
}

CoordVector ReadOperator::to_gamma(const CoordVector& x) const {
    check_support(x, "change_basis");
    CoordVector r = x, g;
    while (!r.empty()) {
        auto it = std::prev(r.end());
        std::size_t j = it->first;
        Scalar c = it->second;
        g[j] = c;
        axpy(r, -c, gamma(j));
        prune(r);
        if (!r.empty() && r.rbegin()->first >= j) throw InternalError("iterate basis is not unipotent");
    }
    return g;
}

CoordVector ReadOperator::from_gamma(const CoordVector& g) const {
    check_support(g, "change_basis");
    CoordVector out;
    for (const auto& [j, c] : g) axpy(out, c, gamma(j));
    prune(out);
    return out;
}

CoordVector ReadOperator::apply_power(const CoordVector& x, std::size_t k) const {
    if (x.empty() || k == 0) return x;
    CoordVector g = to_gamma(x);
    if (g.rbegin()->first + k >= dim_)
        throw TruncationExit("T^" + std::to_string(k) + " x needs T^" + std::to_string(g.rbegin()->first + k) +
                             " u_0, outside the truncation");
    CoordVector shifted;
    for (const auto& [j, c] : g) shifted.emplace(j + k, c);
    return from_gamma(shifted);
}

CoordVector ReadOperator::poly_apply(const Polynomial& P, const CoordVector& x) const {
    if (x.empty() || P.is_zero()) return {};
    CoordVector g = to_gamma(x), out;
    for (std::size_t i = 0; i < P.coef.size(); ++i) {
        if (P.coef[i] == 0) continue;
        for (const auto& [j, c] : g) {
            if (j + i >= dim_)
                throw TruncationExit("P(T) x needs T^" + std::to_string(j + i) + " u_0, outside the truncation");
            out[j + i] += P.coef[i] * c;
        }
    }
    prune(out);
    return from_gamma(out);
}

CoordVector ReadOperator::tau(unsigned n, const CoordVector& y) const {
    if (n < 2 || n > params_.horizon + 1) throw ConfigError("τ_n needs 2 <= n <= horizon+1");
    std::size_t tn = to_index(params_.t[n]), tprev = to_index(params_.t[n - 1]);
    if (!y.empty() && y.rbegin()->first >= tn)
        throw ConfigError("τ_" + std::to_string(n) + ": support reaches u_" + std::to_string(y.rbegin()->first) +
                          ", beyond t_n = " + std::to_string(tn));
    CoordVector g = to_gamma(y);
    g.erase(g.lower_bound(tprev), g.end());
    return from_gamma(g);
}

// ---------------------------------------------------------------- nets

namespace {

struct NetShape {
    Integer q;       // h = 1/q
    Integer step_d;  // lattice step = 1/step_d
    Integer bound;   // l1 bound on numerators
};

NetShape net_shape(unsigned R, const Scalar& mesh) {
    if (mesh <= 0) throw ConfigError("net mesh must be positive");
    NetShape s;
    Integer num = mesh.get_den(), den = mesh.get_num();
    s.q = (num + den - 1) / den;  // ceil(1/mesh)
    s.step_d = s.q * (R + 1);
    s.bound = s.step_d * R;
    return s;
}

}  // namespace

std::size_t net_size(unsigned R, const Scalar& mesh) {
    NetShape s = net_shape(R, mesh);
    // Lattice points in the l1 ball: sum_k 2^k C(d,k) C(B,k).
    const unsigned d = R + 1;
    Integer total = 0, binB = 1;
    for (unsigned k = 0; k <= d; ++k) {
        if (k > 0) {
            if (s.bound < k) break;
            binB = binB * (s.bound - (k - 1)) / k;
        }
        Integer bind;
        mpz_bin_uiui(bind.get_mpz_t(), d, k);
        total += bind * binB * (Integer(1) << k);
    }
    if (!total.fits_ulong_p()) return std::numeric_limits<std::size_t>::max();
    return total.get_ui();
}

std::vector<Polynomial> build_net(unsigned R, const Scalar& mesh, std::size_t cap) {
    NetShape s = net_shape(R, mesh);
    std::vector<Polynomial> out;
    const Scalar step(Integer(1), s.step_d);
    auto done = [&] { return cap != 0 && out.size() >= cap; };
    if (R >= 1) out.push_back(Polynomial({Scalar(1)}));
    if (done()) return out;
    if (!s.bound.fits_slong_p()) throw ConfigError("net too fine to enumerate");
    const long B = s.bound.get_si();
    const long one = s.step_d.get_si();
    std::vector<long> c(R + 1, -B);
    // Lexicographic sweep over numerators with the l1 constraint.
    std::function<void(unsigned, long)> rec = [&](unsigned i, long left) {
        if (done()) return;
        if (i == R + 1) {
            bool is_one = c[0] == one;
            for (unsigned k = 1; k <= R && is_one; ++k) is_one = c[k] == 0;
            if (is_one && R >= 1) return;
            std::vector<Scalar> v(R + 1);
            for (unsigned k = 0; k <= R; ++k) v[k] = Scalar(c[k]) * step;
            out.push_back(Polynomial(std::move(v)));
            return;
        }
        for (long x = -left; x <= left && !done(); ++x) {
            c[i] = x;
            rec(i + 1, left - std::labs(x));
        }
    };
    rec(0, B);
    return out;
}

Polynomial net_round(const Polynomial& S, unsigned R, const Scalar& mesh) {
    if (S.degree() > R) throw ConfigError("polynomial degree exceeds the net's R");
    NetShape s = net_shape(R, mesh);
    std::vector<Scalar> v(S.coef.size());
    for (std::size_t i = 0; i < S.coef.size(); ++i) {
        Scalar scaled = S.coef[i] * s.step_d;
        Integer t;
        mpz_tdiv_q(t.get_mpz_t(), scaled.get_num_mpz_t(), scaled.get_den_mpz_t());
        v[i] = Scalar(t, s.step_d);
        v[i].canonicalize();
    }
    return Polynomial(std::move(v));
}

PSynthesis synthesize_P(const ReadOperator& op, unsigned n, const CoordVector& y) {
    const ReadParameters& p = op.params();
    if (n < 2 || n > p.horizon) throw ConfigError("P synthesis needs 2 <= n <= horizon");
    std::size_t t = to_index(p.t[n]), a = to_index(p.a[n]);
    if (y.empty()) throw ConstructionError("P synthesis on the zero vector");
    if (y.rbegin()->first >= t) throw ConstructionError("P synthesis: y not below t_n");
    PSynthesis r;
    r.y_gamma = op.to_gamma(y);
    const CoordVector& g = r.y_gamma;
    std::size_t nu = g.begin()->first;
    if (nu > a) throw ConstructionError("P synthesis: γ-valuation " + std::to_string(nu) + " exceeds a_n");
    const Scalar lead = g.begin()->second;
    std::vector<Scalar> P(t - nu);
    for (std::size_t i = 0; i < P.size(); ++i) {
        std::size_t k = nu + i;
        Scalar s = (k == a) ? Scalar(1) : Scalar(0);
        for (auto it = std::next(g.begin()); it != g.end() && it->first <= k; ++it) s -= P[k - it->first] * it->second;
        P[i] = s / lead;
    }
    r.P = Polynomial(std::move(P));
    for (std::size_t i = 0; i < r.P.coef.size(); ++i) {
        if (r.P.coef[i] == 0) continue;
        for (const auto& [j, c] : g)
            if (i + j >= t) r.residual[i + j] += r.P.coef[i] * c;
    }
    prune(r.residual);
    Scalar ysum = 0, rsum = 0;
    for (const auto& kv : g) ysum += abs(kv.second);
    for (const auto& kv : r.residual) rsum += abs(kv.second);
    r.D = std::max({Scalar(1), r.P.norm(), ysum, rsum});
    return r;
}

// ---------------------------------------------------------------- construction

Construction::Construction(KotheSpace space, ReadParameters params, ConstructionOptions opts)
    : space_(std::move(space)), opts_(std::move(opts)), op_(std::move(params)) {
    if (!space_.is_lambda1()) throw ConfigError("the construction solver needs a lambda^1 space");
    const std::size_t dim = op_.dimension();
    basis_ = BasisAssignment(dim);
    pos_.assign(dim, BasisAssignment::npos);
    pu_.resize(dim);
    pg_.resize(dim);
    plan_order();
    std::size_t t1 = to_index(op_.params().t[1]);
    for (std::size_t j = 0; j < t1; ++j) assign(j, Scalar(1));
}

void Construction::plan_order() {
    const ReadParameters& p = op_.params();
    auto push = [&](std::size_t lo, std::size_t hi, unsigned stage, unsigned block) {
        for (std::size_t j = lo; j < hi; ++j) {
            if (pos_[j] != BasisAssignment::npos) throw InternalError("block overlap at " + std::to_string(j));
            pos_[j] = order_.size();
            order_.push_back({j, stage, block});
        }
    };
    push(0, to_index(p.t[1]), 0, 0);
    for (unsigned n = 1; n <= p.horizon; ++n) {
        std::size_t t = to_index(p.t[n]), c = to_index(p.c[n]), top = to_index(p.c_top(n));
        std::size_t a2 = to_index(p.a[n + 1]), d2 = to_index(p.delta[n + 1]), t2 = to_index(p.t[n + 1]);
        unsigned mu = p.mu[n];
        for (unsigned k = 1; k <= mu; ++k) {
            std::size_t ck = to_index(p.c_pow(n, k));
            push(ck, ck + t, n, 1);
        }
        push(t, c, n, 2);
        for (unsigned k = 1; k < mu; ++k) push(to_index(p.c_pow(n, k)) + t, to_index(p.c_pow(n, k + 1)), n, 3);
        push(a2, a2 + d2, n, 4);
        push(top + t, a2, n, 5);
        push(a2 + d2, t2, n, 6);
    }
    if (order_.size() != op_.dimension()) throw InternalError("build order does not cover the truncation");
}

void Construction::assign(std::size_t j, const Scalar& alpha) {
    basis_.assign(j, next_e_++, alpha);
    ++built_;
}

void Construction::set_alpha(std::size_t j, const Scalar& alpha) {
    if (!basis_.assigned(j)) throw InternalError("set_alpha on an unassigned index");
    basis_.alpha[j] = alpha;
    pu_[j].clear();
    for (auto& v : pg_) v.clear();
}

const Scalar& Construction::pu(unsigned l, std::size_t j) const {
    if (l == 0) throw InternalError("seminorm level 0");
    if (!basis_.assigned(j)) throw InternalError("p(u_" + std::to_string(j) + ") before assignment");
    auto& v = pu_[j];
    while (v.size() < l) {
        unsigned lev = static_cast<unsigned>(v.size()) + 1;
        v.push_back(abs(basis_.alpha[j]) * space_.entry(lev, basis_.e_index[j]));
    }
    return v[l - 1];
}

const Scalar& Construction::pg(unsigned l, std::size_t m) const {
    auto& v = pg_.at(m);
    if (v.size() < l) v.resize(l);
    if (!v[l - 1]) v[l - 1] = p(l, op_.gamma(m));
    return *v[l - 1];
}

Scalar Construction::p(unsigned l, const CoordVector& x) const {
    Scalar s = 0;
    for (const auto& [j, c] : x) s += abs(c) * pu(l, j);
    return s;
}

KnMembership kn_membership(const Construction& cons, unsigned n, const CoordVector& y) {
    KnMembership m;
    m.p1 = cons.p(1, y);
    m.p1_tau = cons.p(1, cons.op().tau(n, y));
    m.member = m.p1 <= Scalar(3, 2) && m.p1_tau >= Scalar(1, 2);
    return m;
}

StageFamilies build_poly_families(const Construction& cons, unsigned n, const FamilyPolicy& policy) {
    const ReadParameters& p = cons.params();
    const ReadOperator& op = cons.op();
    StageFamilies f;
    f.n = n;
    if (n == 1) {
        // K_1 is not defined; the stage-1 cover is the constant polynomial.
        f.P.push_back(Polynomial({Scalar(1)}));
    } else {
        std::vector<CoordVector> reps = policy.cover;
        if (reps.empty()) reps.push_back(unit(0, 1 / cons.pu(1, 0)));
        for (const auto& y : reps) {
            if (!kn_membership(cons, n, y).member)
                throw ConstructionError("cover representative outside K_" + std::to_string(n));
            PSynthesis s = synthesize_P(op, n, y);
            f.D = std::max(f.D, s.D);
            ++f.cover_cells;
            if (std::find(f.P.begin(), f.P.end(), s.P) == f.P.end() && f.P.size() < policy.cover_cap)
                f.P.push_back(s.P);
        }
    }
    const unsigned R = p.R[n], N = p.N[n];
    Scalar maxp = 0;
    for (unsigned l = 0; l <= R; ++l) maxp = std::max(maxp, cons.pg(N, l));
    f.mesh = 1 / maxp;
    const std::size_t k = f.P.size(), mu = p.mu[n];
    if (mu % k != 0)
        throw ConstructionError("μ_n = " + std::to_string(mu) + " is not a multiple of k_n = " + std::to_string(k) +
                                stage_tag(n));
    const std::size_t W = mu / k;
    f.full_net_size = net_size(R, f.mesh);
    f.S = build_net(R, f.mesh, W);
    if (f.S.size() < W) throw ConstructionError("net smaller than μ_n / k_n" + stage_tag(n));
    const std::size_t t = to_index(p.t[n]);
    for (std::size_t kk = 0; kk < k; ++kk)
        for (std::size_t w = 0; w < W; ++w) {
            Polynomial Q = f.P[kk] * f.S[w];
            if (Q.degree() > t + n || Q.norm() > n * f.D)
                throw ConstructionError("(4.11) violated by Q_{" + std::to_string(n) + "," +
                                        std::to_string(f.Q.size() + 1) + "}");
            f.Q.push_back(std::move(Q));
            f.back.emplace_back(kk + 1, w + 1);
        }
    return f;
}

// ---------------------------------------------------------------- ledger atoms

bool LedgerAtom::references(const Construction& cons, std::size_t j) const {
    auto hit = [&](const LedgerItem& it) {
        if (!it.gamma) return it.idx == j;
        return cons.op().gamma(it.idx).count(j) > 0;
    };
    if (hit(lhs)) return true;
    if (set)
        for (const auto& it : *set)
            if (hit(it)) return true;
    return false;
}

namespace {

using ItemSet = std::vector<LedgerItem>;
using SetPtr = std::shared_ptr<const ItemSet>;

struct AtomSink {
    std::vector<LedgerAtom>& out;

    void add(const char* cond, std::vector<long long> idx, LedgerItem lhs, Rel rel, Scalar factor, long exp2,
             SetPtr set) {
        out.push_back({cond, std::move(idx), lhs, rel, std::move(factor), exp2, std::move(set)});
    }
};

SetPtr single(unsigned level, std::size_t idx, bool gamma = false) {
    return std::make_shared<const ItemSet>(ItemSet{{level, gamma, idx}});
}

SetPtr u_range(unsigned level, std::size_t lo, std::size_t hi) {
    auto s = std::make_shared<ItemSet>();
    for (std::size_t m = lo; m < hi; ++m) s->push_back({level, false, m});
    return s;
}

SetPtr g_range(unsigned level, std::size_t lo, std::size_t hi) {
    auto s = std::make_shared<ItemSet>();
    for (std::size_t m = lo; m < hi; ++m) s->push_back({level, true, m});
    return s;
}

long ll(std::size_t x) { return static_cast<long>(x); }

}  // namespace

std::vector<LedgerAtom> stage_atoms(const Construction& cons, unsigned n) {
    const ReadParameters& p = cons.params();
    const StageFamilies* f = cons.op().families(n);
    if (!f) throw InternalError("stage atoms requested before the stage families exist");
    std::vector<LedgerAtom> out;
    const std::size_t dim = cons.dimension();
    AtomSink sink{out};
    const Scalar C = cons.options().basis_constant;
    const Scalar& D = f->D;
    const std::size_t t = to_index(p.t[n]), t2 = to_index(p.t[n + 1]);
    const std::size_t a2 = to_index(p.a[n + 1]), d2 = to_index(p.delta[n + 1]);
    const std::size_t top = to_index(p.c_top(n));
    const std::size_t prev_top = to_index(p.c_top(n - 1));
    const unsigned mu = p.mu[n], N = p.N[n], N2 = p.N[n + 1];
    const long long nn = n;
    std::vector<std::size_t> ck(mu + 1);
    for (unsigned k = 1; k <= mu; ++k) ck[k] = to_index(p.c_pow(n, k));

    // (4.4)
    for (std::size_t j = t; j < t2 && j + 1 < dim; ++j)
        for (unsigned l = 1; l <= n; ++l)
            sink.add("4.4", {nn, ll(j), l}, {l + 1, false, j}, Rel::GE, 1, ll(j + 1), single(l, j + 1));
    // (4.5), (4.6) for index n+1
    sink.add("4.5", {nn + 1, ll(a2 - 1)}, {1, false, a2 - 1}, Rel::GE, 1, ll(a2), single(n, 0));
    sink.add("4.6", {nn + 1, ll(a2 + d2 - 1)}, {1, false, a2 + d2 - 1}, Rel::GE, 1, ll(a2 + d2), single(n, d2));
    // (4.7), (4.8)
    auto low_iterates = g_range(n, 0, t);
    for (unsigned k = 1; k <= mu; ++k) {
        const Polynomial& Q = f->Q[k - 1];
        Scalar qn = Q.norm();
        sink.add("4.7", {nn, ll(ck[k] - 1), k}, {1, false, ck[k] - 1}, Rel::GE, qn, ll(ck[k]), low_iterates);
        auto pair = std::make_shared<const ItemSet>(ItemSet{{1, false, ck[k] + t - 1}, {1, false, ck[k] - 1}});
        for (std::size_t m = 0; m <= Q.degree(); ++m)
            sink.add("4.8", {nn, ll(t + m), k}, {n, false, t + m}, Rel::LE, 1 / qn, -ll(ck[k] + t), pair);
    }
    // (4.12)
    {
        auto sup1 = g_range(1, 0, t);
        std::vector<std::size_t> js;
        for (unsigned k = 1; k <= mu; ++k)
            for (std::size_t j = ck[k]; j <= ck[k] + t; ++j) js.push_back(j);
        for (std::size_t j = a2; j < a2 + d2; ++j) js.push_back(j);
        std::sort(js.begin(), js.end());
        js.erase(std::unique(js.begin(), js.end()), js.end());
        for (std::size_t j : js)
            sink.add("4.12", {nn, ll(j)}, {N2 + 2, false, j}, Rel::GE, Scalar(n) * D, ll(j), sup1);
    }
    // (4.13), (4.14)
    for (std::size_t j = t; j < t2; ++j) {
        for (unsigned l = 1; l <= n; ++l)
            for (std::size_t r = 1; r <= prev_top && j + r < dim; ++r)
                sink.add("4.13", {nn, ll(j), l, ll(r)}, {l + 2, false, j}, Rel::GE, C, ll(j + 2), single(l, j + r));
        for (unsigned k = 1; k <= mu; ++k)
            if (j + ck[k] < dim)
                sink.add("4.14", {nn, ll(j), k}, {N + 2, false, j}, Rel::GE, C, ll(j + 2), single(N, j + ck[k]));
    }
    // (4.15), (4.16)
    {
        auto s15 = u_range(n, d2, d2 + top);
        for (std::size_t j = a2 + d2 - top; j < a2 + d2; ++j)
            sink.add("4.15", {nn, ll(j)}, {1, false, j}, Rel::GE, C, ll(a2 + d2 + 1), s15);
        auto s16 = g_range(n, 0, top + 1);
        for (std::size_t j = a2 - top; j < a2; ++j)
            sink.add("4.16", {nn, ll(j)}, {1, false, j}, Rel::GE, C, ll(a2 + 1), s16);
    }
    // (4.17), (4.18)
    {
        auto s17 = u_range(n, t, 3 * t + n);
        auto s18 = std::make_shared<ItemSet>();
        std::vector<std::size_t> ms;
        for (unsigned k = 1; k <= mu; ++k)
            for (std::size_t m = ck[k]; m <= ck[k] + 2 * t + n; ++m) ms.push_back(m);
        std::sort(ms.begin(), ms.end());
        ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
        for (std::size_t m : ms)
            if (m < dim) s18->push_back({N, false, m});
        for (unsigned k = 1; k <= mu; ++k)
            for (std::size_t j = ck[k]; j < ck[k] + t; ++j) {
                sink.add("4.17", {nn, ll(j), k}, {1, false, j}, Rel::GE, C * D, ll(ck[k] + t + 2), s17);
                sink.add("4.18", {nn, ll(j), k}, {N + 2, false, j}, Rel::GE, C * D, ll(ck[k] + t + 2), s18);
            }
    }
    // (4.19): j in [c_n^k - c_{n'}^{k'}, c_n^k) for (n', k') < (n, k).
    {
        auto s19 = g_range(n, 0, 2 * t + n + 1);
        for (unsigned k = 1; k <= mu; ++k) {
            std::size_t widest = k > 1 ? ck[k - 1] : prev_top;
            for (std::size_t j = ck[k] - widest; j < ck[k]; ++j)
                sink.add("4.19", {nn, ll(j), k}, {1, false, j}, Rel::GE, C * D, ll(ck[k] + 1), s19);
        }
    }
    // (4.21), (4.22), (4.23)
    for (unsigned k = 1; k <= mu; ++k)
        for (std::size_t j = 0; j < t; ++j)
            sink.add("4.21", {nn, ll(ck[k] + j), k}, {N, false, ck[k] + j}, Rel::LE, 1 / D, 0, nullptr);
    sink.add("4.22", {nn + 1, ll(a2)}, {N2, false, a2}, Rel::LE, 1, -ll(n + 1), nullptr);
    for (std::size_t j = t; j <= 2 * t; ++j)
        sink.add("4.23", {nn, ll(j)}, {N, false, j}, Rel::LE, 1 / D, -static_cast<long>(n), nullptr);
    return out;
}

namespace {

// Evaluates and caches set aggregates (max and min) over a frozen construction.
class AtomEvaluator {
public:
    explicit AtomEvaluator(const Construction& c) : cons_(c) {}

    Scalar item(const LedgerItem& it) const { return it.gamma ? cons_.pg(it.level, it.idx) : cons_.pu(it.level, it.idx); }

    const std::pair<Scalar, Scalar>& extremes(const SetPtr& s) {
        auto it = cache_.find(s.get());
        if (it != cache_.end()) return it->second;
        Scalar mx, mn;
        bool first = true;
        for (const auto& x : *s) {
            Scalar v = item(x);
            if (first || v > mx) mx = v;
            if (first || v < mn) mn = v;
            first = false;
        }
        return cache_.emplace(s.get(), std::make_pair(mx, mn)).first->second;
    }

    Scalar rhs(const LedgerAtom& a) {
        Scalar base = a.factor;
        if (a.set) {
            const auto& e = extremes(a.set);
            bool upper = a.rel == Rel::GE || a.rel == Rel::GT;
            base *= upper ? e.first : e.second;
        }
        return times_pow2(base, a.exp2);
    }

private:
    const Construction& cons_;
    std::unordered_map<const void*, std::pair<Scalar, Scalar>> cache_;
};

struct Bound {
    std::optional<Scalar> value;
    bool strict = false;
    std::string why;
    const LedgerAtom* atom = nullptr;
    const LedgerItem* item = nullptr;  // set item behind the bound, if any
};

// An upper bound on |alpha_j| comes from an earlier u_{j'} that is too small;
// the attempt restarts with |alpha_{j'}| >= alpha.
struct RaiseFloor {
    std::size_t j;
    Scalar alpha;
    std::string msg;
};

std::string atom_name(const LedgerAtom& a) { return "(" + a.cond + ") at " + format_idx(a.idx); }

std::string log2_text(const Scalar& q) {
    if (q <= 0) return "-inf";
    std::ostringstream os;
    os.precision(6);
    os << approx_log2(q);
    return os.str();
}

const char* block_name(unsigned b) {
    static const char* names[] = {"initial", "(i)", "(ii)", "(iii)", "(iv)", "(v)", "(vi)"};
    return b < 7 ? names[b] : "?";
}

}  // namespace

Construction build_construction(const KotheSpace& space, const ReadParameters& params,
                                const ConstructionOptions& opts) {
    auto build_once = [&](const std::map<std::size_t, Scalar>& floors) -> Construction {
        Construction cons(space, params, opts);
        const std::size_t dim = cons.dimension();

        // Largest build position referenced by an item.
        std::vector<std::size_t> gpos(dim, BasisAssignment::npos);
        auto item_pos = [&](const LedgerItem& it) -> std::size_t {
            if (!it.gamma) return cons.position(it.idx);
            auto& g = gpos[it.idx];
            if (g == BasisAssignment::npos) {
                g = 0;
                for (const auto& kv : cons.op().gamma(it.idx)) g = std::max(g, cons.position(kv.first));
            }
            return g;
        };
        std::unordered_map<const void*, std::size_t> set_pos;
        auto atom_set_pos = [&](const SetPtr& s) -> std::size_t {
            if (!s) return 0;
            auto it = set_pos.find(s.get());
            if (it != set_pos.end()) return it->second;
            std::size_t m = 0;
            for (const auto& x : *s) m = std::max(m, item_pos(x));
            set_pos.emplace(s.get(), m);
            return m;
        };

        // A set atom splits by item: items built no later than the lhs are handled
        // together at the lhs's step (item = -1), each later item at its own step.
        struct Part {
            std::uint32_t stage;
            std::uint32_t atom;
            std::int32_t item;
        };
        std::vector<std::vector<Part>> pending(dim);
        std::vector<std::vector<LedgerAtom>> all_atoms;

        for (unsigned n = 1; n <= params.horizon; ++n) {
            cons.op().set_families(build_poly_families(cons, n, opts.family));
            all_atoms.push_back(stage_atoms(cons, n));
            const std::vector<LedgerAtom>& atoms = all_atoms.back();
            AtomEvaluator early(cons);
            auto fixed_check = [&](const LedgerAtom& a, const Scalar& lhs, const Scalar& rhs) {
                if (!holds(lhs, a.rel, rhs))
                    throw ConstructionError("stage " + std::to_string(n) + ": " + atom_name(a) +
                                            " involves only fixed vectors and fails");
            };
            for (std::uint32_t ai = 0; ai < atoms.size(); ++ai) {
                const LedgerAtom& a = atoms[ai];
                const std::size_t lp = item_pos(a.lhs);
                const std::size_t lj = cons.order()[lp].j;
                if (!a.set) {
                    if (cons.basis().assigned(lj)) fixed_check(a, early.item(a.lhs), early.rhs(a));
                    else pending[lj].push_back({n, ai, -1});
                    continue;
                }
                if (atom_set_pos(a.set) <= lp) {
                    if (cons.basis().assigned(lj)) fixed_check(a, early.item(a.lhs), early.rhs(a));
                    else pending[lj].push_back({n, ai, -1});
                    continue;
                }
                bool prefix = false;
                for (std::int32_t ii = 0; ii < static_cast<std::int32_t>(a.set->size()); ++ii) {
                    const LedgerItem& it = (*a.set)[ii];
                    const std::size_t ip = item_pos(it);
                    const std::size_t ij = cons.order()[ip].j;
                    if (ip <= lp) {
                        if (cons.basis().assigned(lj))
                            fixed_check(a, early.item(a.lhs), times_pow2(a.factor * early.item(it), a.exp2));
                        prefix = true;
                        continue;
                    }
                    if (cons.basis().assigned(ij))
                        fixed_check(a, early.item(a.lhs), times_pow2(a.factor * early.item(it), a.exp2));
                    else
                        pending[ij].push_back({n, ai, ii});
                }
                if (prefix && !cons.basis().assigned(lj)) pending[lj].push_back({n, ai, -1});
            }

            std::unordered_map<const void*, std::pair<Scalar, Scalar>> agg;
            for (std::size_t pos = 0; pos < cons.order().size(); ++pos) {
                const BuildStep& step = cons.order()[pos];
                if (step.stage != n) continue;
                const std::size_t j = step.j;
                Bound lo, hi;
                double hi_log = 0;
                std::map<std::tuple<const void*, long, unsigned>, std::pair<const LedgerAtom*, Scalar>>
                    shared_best;
                auto tighten = [&](const Scalar& coef, Rel rel, const Scalar& rhsv, const LedgerAtom& a,
                                   const LedgerItem* item = nullptr) {
                    // coef * x rel rhsv with x > 0.
                    bool strict = rel == Rel::GT || rel == Rel::LT;
                    bool ge = rel == Rel::GE || rel == Rel::GT;
                    if (coef == 0) {
                        bool ok = ge ? (strict ? 0 > rhsv : 0 >= rhsv) : (strict ? 0 < rhsv : 0 <= rhsv);
                        if (!ok)
                            throw ConstructionError("stage " + std::to_string(n) + " block " + block_name(step.block) +
                                                    " u_" + std::to_string(j) + ": " + atom_name(a) +
                                                    " cannot hold for any scalar");
                        return;
                    }
                    Scalar b = rhsv / coef;
                    bool lower = (coef > 0) == ge;
                    Bound& B = lower ? lo : hi;
                    bool tighter = !B.value || (lower ? (b > *B.value || (b == *B.value && strict))
                                                      : (b < *B.value || (b == *B.value && strict)));
                    if (tighter) {
                        B = {b, strict, atom_name(a), &a, item};
                        if (!lower) hi_log = approx_log2(b);
                    }
                };
                const std::size_t e_next = cons.built();  // e-index this u receives
                std::vector<std::optional<Scalar>> a_cache;
                auto a_level = [&](unsigned l) -> const Scalar& {
                    if (a_cache.size() < l) a_cache.resize(l);
                    if (!a_cache[l - 1]) a_cache[l - 1] = cons.space().entry(l, e_next);
                    return *a_cache[l - 1];
                };
                // Linear form of an item in x = |alpha_j|: coefficient and constant.
                auto linear = [&](const LedgerItem& it) -> std::pair<Scalar, Scalar> {
                    if (!it.gamma) {
                        if (it.idx == j) return {a_level(it.level), Scalar(0)};
                        return {Scalar(0), cons.pu(it.level, it.idx)};
                    }
                    Scalar c = 0, b = 0;
                    for (const auto& [k, v] : cons.op().gamma(it.idx)) {
                        if (k == j) c += abs(v) * a_level(it.level);
                        else b += abs(v) * cons.pu(it.level, k);
                    }
                    return {c, b};
                };
                for (const Part& part : pending[j]) {
                    const LedgerAtom& a = all_atoms[part.stage - 1][part.atom];
                    if (part.item >= 0 && hi.value && a.rel == Rel::GE && !a.lhs.gamma && a.lhs.idx != j) {
                        // Common shape p(u_j') >= F p(u_j): skip the exact quotient when a
                        // log estimate shows it cannot beat the current cap.
                        const LedgerItem& item = (*a.set)[part.item];
                        if (!item.gamma && item.idx == j) {
                            // Atoms sharing set, level, and scale: only the smallest lhs binds.
                            const Scalar& lhs = cons.pu(a.lhs.level, a.lhs.idx);
                            auto [seen, fresh] = shared_best.try_emplace({a.set.get(), a.exp2, a.lhs.level}, &a, lhs);
                            if (!fresh && seen->second.first->factor == a.factor) {
                                if (lhs >= seen->second.second) continue;
                                seen->second = {&a, lhs};
                            }
                            double est = approx_log2(cons.pu(a.lhs.level, a.lhs.idx)) - approx_log2(a.factor) -
                                         static_cast<double>(a.exp2) - approx_log2(a_level(item.level));
                            if (est > hi_log + 4) continue;
                        }
                    }
                    auto [cA, bA] = linear(a.lhs);
                    Scalar F = times_pow2(a.factor, a.exp2);
                    if (!a.set) {
                        tighten(cA, a.rel, F - bA, a);
                        continue;
                    }
                    if (part.item >= 0) {
                        const LedgerItem& item = (*a.set)[part.item];
                        auto [ci, bi] = linear(item);
                        tighten(cA - F * ci, a.rel, F * bi - bA, a, &item);
                        continue;
                    }
                    if (atom_set_pos(a.set) < pos) {
                        auto it = agg.find(a.set.get());
                        if (it == agg.end()) {
                            AtomEvaluator ev(cons);
                            it = agg.emplace(a.set.get(), ev.extremes(a.set)).first;
                        }
                        bool upper = a.rel == Rel::GE || a.rel == Rel::GT;
                        tighten(cA, a.rel, F * (upper ? it->second.first : it->second.second) - bA, a);
                        continue;
                    }
                    for (const auto& item : *a.set) {
                        if (item_pos(item) > pos) continue;
                        auto [ci, bi] = linear(item);
                        tighten(cA - F * ci, a.rel, F * bi - bA, a, &item);
                    }
                }
                pending[j].clear();
                pending[j].shrink_to_fit();

                // Choose x: p_1(u_j) = 1 when admissible, else a power of two next to the binding bound.
                auto admissible = [&](const Scalar& x) {
                    if (x <= 0) return false;
                    if (lo.value && (lo.strict ? x <= *lo.value : x < *lo.value)) return false;
                    if (hi.value && (hi.strict ? x >= *hi.value : x > *hi.value)) return false;
                    return true;
                };
                if (auto f = floors.find(j); f != floors.end() && (!lo.value || f->second > *lo.value))
                    lo = {f->second, false, "raised floor"};
                if (hi.value && (*hi.value <= 0 || (lo.value && (*lo.value > *hi.value ||
                                                                 (*lo.value == *hi.value && (lo.strict || hi.strict)))))) {
                    std::string msg = "stage " + std::to_string(n) + " block " + block_name(step.block) + " u_" +
                                      std::to_string(j) + ": no admissible scalar; " +
                                      (lo.value ? lo.why + " needs |α| >= 2^" + log2_text(*lo.value) + ", "
                                                : std::string()) +
                                      hi.why + " caps it at 2^" + log2_text(*hi.value);
                    // Cap of the form p(u_{j'}) >= F * p(item), item linear in x: lift u_{j'} instead.
                    const LedgerAtom* a = hi.atom;
                    if (lo.value && a && hi.item && a->rel == Rel::GE && !a->lhs.gamma && a->lhs.idx != j &&
                        a->lhs.idx >= to_index(params.t[1])) {
                        auto [ci, bi] = linear(*hi.item);
                        Scalar need = times_pow2(a->factor, a->exp2) * (2 * ci * *lo.value + bi);
                        const std::size_t jp = a->lhs.idx;
                        Scalar alpha = pow2_ceil(need / cons.space().entry(a->lhs.level, cons.basis().e_index[jp]));
                        throw RaiseFloor{jp, alpha, msg};
                    }
                    throw ConstructionError(msg);
                }
                Scalar target = 1 / a_level(1);
                // Q-window vectors sit at the top of their interval, within a factor 2 of the cap.
                if (step.block == 1 && hi.value) {
                    target = pow2_floor(*hi.value);
                    if (!admissible(target)) target /= 2;
                }
                Scalar x;
                if (admissible(target)) {
                    x = target;
                } else if (lo.value && target <= *lo.value) {
                    x = pow2_ceil(*lo.value);
                    if (!admissible(x)) x *= 2;
                    if (!admissible(x)) x = hi.value ? Scalar((*lo.value + *hi.value) / 2) : Scalar(*lo.value * 2);
                } else {
                    x = pow2_floor(*hi.value);
                    if (!admissible(x)) x /= 2;
                    if (!admissible(x)) x = lo.value ? Scalar((*lo.value + *hi.value) / 2) : Scalar(*hi.value / 2);
                }
                if (!admissible(x)) throw InternalError("scalar choice escaped its interval");
                cons.assign(j, x);
            }
            cons.completed_ = n;
        }
        return cons;
    };

    std::map<std::size_t, Scalar> floors;
    for (unsigned attempt = 0;; ++attempt) {
        try {
            Construction c = build_once(floors);
            c.restarts_ = attempt;
            return c;
        } catch (const RaiseFloor& r) {
            if (attempt >= opts.max_restarts)
                throw ConstructionError(r.msg + " (after " + std::to_string(attempt) + " restarts)");
            Scalar& f = floors[r.j];
            if (r.alpha <= f) throw InternalError("floor raise did not progress at u_" + std::to_string(r.j));
            f = r.alpha;
        }
    }
}

Construction replay_construction(const KotheSpace& space, const ReadParameters& params,
                                 const ConstructionOptions& opts, const std::vector<Scalar>& alpha) {
    Construction cons(space, params, opts);
    if (alpha.size() != cons.dimension())
        throw ConfigError("replay needs " + std::to_string(cons.dimension()) + " scalars, got " +
                          std::to_string(alpha.size()));
    for (const auto& a : alpha)
        if (a == 0) throw ConfigError("replay scalar is zero");
    for (std::size_t j = 0; j < to_index(params.t[1]); ++j)
        if (alpha[j] != cons.basis().alpha[j]) cons.set_alpha(j, alpha[j]);
    for (unsigned n = 1; n <= params.horizon; ++n) {
        cons.op().set_families(build_poly_families(cons, n, opts.family));
        for (const BuildStep& s : cons.order())
            if (s.stage == n) cons.assign(s.j, alpha[s.j]);
        cons.completed_ = n;
    }
    return cons;
}

LedgerReport verify_ledger(const Construction& cons, const LedgerOptions& opts) {
    LedgerReport rep;
    const ReadParameters& p = cons.params();
    rep.set_meta("space", cons.space().describe());
    rep.set_meta("horizon", std::to_string(p.horizon));
    rep.set_meta("dimension", std::to_string(cons.dimension()));
    auto emit = [&](std::string cond, std::vector<long long> idx, Scalar lhs, Rel rel, Scalar rhs) {
        if (!opts.keep_passing && holds(lhs, rel, rhs)) {
            ++rep.elided_pass;
            return;
        }
        rep.add(std::move(cond), std::move(idx), std::move(lhs), rel, std::move(rhs));
    };
    // (4.3): the prefix below t_n uses exactly e_0..e_{t_n-1}.
    for (unsigned n = 1; cons.completed_stages() > 0 && n <= cons.completed_stages() + 1; ++n) {
        std::size_t tn = to_index(p.t[n]);
        std::size_t hits = 0;
        std::vector<bool> seen(tn, false);
        for (std::size_t j = 0; j < tn; ++j) {
            std::size_t e = cons.basis().e_index[j];
            if (e < tn && !seen[e]) seen[e] = true, ++hits;
        }
        emit("4.3", {static_cast<long long>(n)}, Scalar(hits), Rel::EQ, Scalar(tn));
    }
    for (unsigned n = 1; n <= cons.completed_stages(); ++n) {
        const StageFamilies* f = cons.op().families(n);
        std::size_t t = to_index(p.t[n]);
        for (std::size_t l = 0; l < f->Q.size(); ++l) {
            long long nl = static_cast<long long>(l + 1);
            emit("4.11", {n, nl, 0}, Scalar(f->Q[l].degree()), Rel::LE, Scalar(t + n));
            emit("4.11", {n, nl, 1}, f->Q[l].norm(), Rel::LE, Scalar(n) * f->D);
        }
        AtomEvaluator ev(cons);
        for (const LedgerAtom& a : stage_atoms(cons, n)) emit(a.cond, a.idx, ev.item(a.lhs), a.rel, ev.rhs(a));
    }
    rep.sort();
    return rep;
}

Scalar compute_L(const Construction& cons, unsigned N) {
    const ReadParameters& p = cons.params();
    std::size_t limit = cons.dimension() - 1;
    if (N <= p.horizon + 1) limit = std::min(limit, to_index(p.t[N]));
    Scalar L = 1;
    for (std::size_t j = 0; j < limit; ++j) {
        Scalar r = times_pow2(cons.p(N, cons.op().apply(unit(j))), static_cast<long>(j)) / cons.pu(N + 1, j);
        L = std::max(L, r);
    }
    return L;
}

}  // namespace ksp
