#include "ksp/invariant_finder.hpp"

#include <algorithm>
#include <sstream>

namespace ksp {

namespace {

constexpr std::size_t npos = static_cast<std::size_t>(-1);

Scalar l1(const CoordVector& x) {
    Scalar s = 0;
    for (const auto& kv : x) s += abs(kv.second);
    return s;
}

}  // namespace

OmegaOperator::OmegaOperator(std::size_t dim, std::vector<Row> rows, std::vector<std::size_t> kernel)
    : dim_(dim), rows_(std::move(rows)), kernel_(std::move(kernel)) {
    if (dim_ == 0) throw ConfigError("omega operator needs a positive dimension");
    if (rows_.size() > dim_) throw ConfigError("more rows than the dimension");
    rows_.resize(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
        Row clean;
        for (auto [c, v] : rows_[i]) {
            if (c >= dim_) throw ConfigError("row " + std::to_string(i) + " reads column " + std::to_string(c) +
                                             " outside the truncation");
            v.canonicalize();
            if (v != 0) clean.emplace_back(c, v);
        }
        std::sort(clean.begin(), clean.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t k = 1; k < clean.size(); ++k)
            if (clean[k].first == clean[k - 1].first)
                throw ConfigError("row " + std::to_string(i) + " repeats column " + std::to_string(clean[k].first));
        rows_[i] = std::move(clean);
    }
    for (std::size_t k = 1; k < kernel_.size(); ++k)
        if (kernel_[k] < kernel_[k - 1]) throw ConfigError("kernel profile must be non-decreasing");
}

OmegaOperator OmegaOperator::forward_shift(std::size_t dim) {
    std::vector<Row> rows(dim);
    for (std::size_t i = 1; i < dim; ++i) rows[i] = {{i - 1, Scalar(1)}};
    return OmegaOperator(dim, std::move(rows));
}

OmegaOperator OmegaOperator::backward_shift(std::size_t dim) {
    std::vector<Row> rows(dim);
    for (std::size_t i = 0; i + 1 < dim; ++i) rows[i] = {{i + 1, Scalar(1)}};
    return OmegaOperator(dim, std::move(rows));
}

OmegaOperator OmegaOperator::zero(std::size_t dim) { return OmegaOperator(dim, {}); }

std::size_t OmegaOperator::kernel_size(unsigned j) const {
    if (j == 0) return 0;
    if (kernel_.empty()) return j;
    if (j <= kernel_.size()) return kernel_[j - 1];
    // Past the listed profile each level sees one more coordinate.
    const std::size_t last = kernel_.back();
    return last == npos ? npos : last + (j - kernel_.size());
}

CoordVector OmegaOperator::apply(const CoordVector& x) const {
    CoordVector y;
    for (std::size_t i = 0; i < dim_; ++i) {
        Scalar s = 0;
        for (const auto& [c, v] : rows_[i]) {
            auto it = x.find(c);
            if (it != x.end()) s += v * it->second;
        }
        if (s != 0) y.emplace(i, s);
    }
    return y;
}

std::size_t KernelChain::reach(std::size_t v) const {
    std::size_t r = 0;
    while (r < row_bound.size() && row_bound[r] <= v) ++r;
    return r;
}

OmegaOperator parse_omega_operator(const std::string& text, std::size_t dim) {
    std::vector<OmegaOperator::Row> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t max_col = 0;
    while (std::getline(in, line)) {
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        std::istringstream ls(line);
        OmegaOperator::Row row;
        std::string tok;
        while (ls >> tok) {
            auto colon = tok.find(':');
            if (colon == std::string::npos || colon == 0)
                throw ConfigError("row " + std::to_string(rows.size()) + ": entry '" + tok + "' is not col:num/den");
            std::size_t c;
            try {
                std::size_t used = 0;
                c = std::stoul(tok.substr(0, colon), &used);
                if (used != colon) throw std::invalid_argument(tok);
            } catch (const std::logic_error&) {
                throw ConfigError("row " + std::to_string(rows.size()) + ": bad column in '" + tok + "'");
            }
            row.emplace_back(c, parse_rational(tok.substr(colon + 1)));
            max_col = std::max(max_col, c + 1);
        }
        rows.push_back(std::move(row));
    }
    while (!rows.empty() && rows.back().empty() && rows.size() > max_col) rows.pop_back();
    if (dim == 0) dim = std::max(rows.size(), max_col);
    return OmegaOperator(dim, std::move(rows));
}

CoordVector KernelChain::project(const CoordVector& x) const {
    CoordVector out;
    if (M.empty()) return out;
    for (std::size_t i = 0; i < M[0].size(); ++i) {
        auto it = x.find(M[0][i]);
        if (it != x.end() && it->second != 0) out.emplace(i, it->second);
    }
    return out;
}

KernelChain build_chain(const OmegaOperator& op, unsigned depth) {
    if (depth == 0) throw ConfigError("chain depth must be at least 1");
    const std::size_t dim = op.dimension();
    auto k = [&](unsigned g, unsigned j) { return op.kernel_size(g * j); };
    KernelChain ch;
    unsigned g = 0;
    for (unsigned cand = 1; cand <= dim + 1 && g == 0; ++cand) {
        bool norm = false;
        for (unsigned j = 1; j <= depth + 1; ++j) norm = norm || k(cand, j) == npos;
        if (norm) break;
        bool ok = k(cand, 2) >= k(cand, 1) + 2;
        for (unsigned j = 2; j <= depth && ok; ++j) ok = k(cand, j + 1) >= k(cand, j) + 1;
        if (ok) g = cand;
    }
    if (g == 0)
        throw ConfigError("no grouping of the seminorms gives non-trivial kernels with codim(ker q_2 in ker q_1) >= 2");
    ch.group = g;
    ch.depth = depth;
    if (k(g, 2) > dim) {
        ch.trivial = true;
        return ch;
    }
    for (unsigned j = 1; j <= depth; ++j) {
        std::vector<std::size_t> m;
        for (std::size_t c = k(g, j); c < std::min(k(g, j + 1), dim); ++c) m.push_back(c);
        ch.M.push_back(std::move(m));
    }
    for (std::size_t c = k(g, 1); c < dim; ++c) ch.u.push_back(c);
    // Level of a coordinate: the first q_j that sees it.
    auto level = [&](std::size_t c) {
        unsigned j = 1;
        while (k(g, j) <= c) ++j;
        return j;
    };
    for (std::size_t i = 0; i < dim; ++i) ch.row_bound.push_back(k(g, level(i) + 1));
    for (std::size_t i = 0; i < dim; ++i)
        for (const auto& [c, v] : op.rows()[i])
            if (level(c) > level(i) + 1)
                throw ConfigError("row " + std::to_string(i) + " reads column " + std::to_string(c) +
                                  ", which q_" + std::to_string(level(i) + 1) + " does not see");
    return ch;
}

namespace {

void require_exact(const KernelChain& ch, const OmegaOperator& op, unsigned steps) {
    const std::size_t need = ch.M[0].back() + 1;
    std::size_t v = op.dimension();
    for (unsigned l = 1; l <= steps; ++l) {
        v = ch.reach(v);
        if (v < need)
            throw TruncationExit("after " + std::to_string(l) + " applications only coordinates below " +
                                 std::to_string(v) + " are exact; M_1 needs " + std::to_string(need));
    }
}

void require_nontrivial(const KernelChain& ch) {
    if (ch.trivial || ch.M.empty() || ch.m1_size() < 2) throw ConfigError("kernel chain is trivial on this truncation");
}

}  // namespace

std::vector<std::vector<std::size_t>> compute_Al(const KernelChain& chain, const OmegaOperator& op,
                                                 unsigned L_max) {
    require_nontrivial(chain);
    require_exact(chain, op, L_max);
    const std::size_t below = chain.M[0].front();
    std::vector<std::vector<std::size_t>> A(L_max + 1);
    for (std::size_t n = 0; n < chain.u.size(); ++n) {
        CoordVector x = unit(chain.u[n]);
        for (unsigned l = 0; l <= L_max; ++l) {
            for (const auto& kv : x)
                if (kv.first < below) throw InternalError("iterate left ker q_1 before reaching M_1");
            if (!chain.project(x).empty()) {
                A[l].push_back(n);
                break;
            }
            if (l < L_max) x = op.apply(x);
        }
    }
    return A;
}

const char* case_name(OmegaCase c) {
    switch (c) {
        case OmegaCase::One: return "case-1";
        case OmegaCase::Two: return "case-2";
        case OmegaCase::Insufficient: return "insufficient";
    }
    return "?";
}

OmegaCase classify(const std::vector<std::vector<std::size_t>>& A) {
    if (A.size() < 2) return OmegaCase::Insufficient;
    const std::size_t H = A.size() - 1;
    if (!A[H].empty()) return OmegaCase::Two;
    for (std::size_t l = H / 2 + 1; l <= H; ++l)
        if (!A[l].empty()) return OmegaCase::Insufficient;
    return OmegaCase::One;
}

std::optional<Case1Witness> case1_witness(const KernelChain& chain, const OmegaOperator& op, unsigned horizon) {
    auto A = compute_Al(chain, op, horizon);
    if (classify(A) != OmegaCase::One) return std::nullopt;
    std::vector<bool> hit(chain.u.size(), false);
    for (const auto& a : A)
        for (std::size_t n : a) hit[n] = true;
    auto it = std::find(hit.begin(), hit.end(), false);
    if (it == hit.end()) return std::nullopt;
    Case1Witness w;
    w.n = static_cast<std::size_t>(it - hit.begin());
    CoordVector x = unit(chain.u[w.n]);
    for (unsigned l = 0; l <= horizon; ++l) {
        w.report.add("proj", {static_cast<long long>(w.n), l}, l1(chain.project(x)), Rel::EQ, Scalar(0));
        w.orbit.push_back(x);
        if (l < horizon) x = op.apply(x);
    }
    return w;
}

Case2Functional case2_functional(const KernelChain& chain, const OmegaOperator& op, unsigned horizon) {
    if (horizon == 0) throw ConfigError("case 2 needs a horizon of at least 1");
    auto A = compute_Al(chain, op, horizon);
    if (A[horizon].empty())
        throw ConfigError("A_" + std::to_string(horizon) + " is empty: no increasing l_m within the horizon, try case 1");
    const unsigned H = horizon;
    const std::size_t m1 = chain.m1_size();
    Case2Functional r;

    // x^{(l)} = T^{l_m - l} u_n with l_m the first non-empty A at or above l.
    unsigned longest = 0;
    for (unsigned l = 1; l <= H; ++l) {
        unsigned lm = l;
        while (A[lm].empty()) ++lm;
        r.l_m.push_back(lm);
        longest = std::max(longest, lm - l);
        CoordVector x = unit(chain.u[A[lm].front()]);
        for (unsigned s = 0; s < lm - l; ++s) x = op.apply(x);
        r.family.push_back(std::move(x));
    }
    require_exact(chain, op, longest + H);

    // Cancellation sweep on coordinates past M_1: each coordinate is cleared
    // from every x^{(l)} below the last one that carries it.
    const std::size_t past = chain.M[0].back() + 1;
    auto& fam = r.family;
    bool changed = true;
    while (changed && r.sweep_passes <= H) {
        changed = false;
        ++r.sweep_passes;
        for (std::size_t c = past; c < op.dimension(); ++c) {
            std::vector<unsigned> S;
            for (unsigned l = 0; l < H; ++l)
                if (fam[l].count(c)) S.push_back(l);
            if (S.size() < 2) continue;
            const unsigned m = S.back();
            const Scalar pivot = fam[m].at(c);
            for (unsigned l : S) {
                if (l == m) continue;
                axpy(fam[l], -fam[l].at(c) / pivot, fam[m]);
                prune(fam[l]);
                changed = true;
            }
        }
    }
    r.sweep_stabilized = !changed;

    // Projections of T^l v for l = 0..H.
    auto proj_orbit = [&](CoordVector x) {
        std::vector<CoordVector> out;
        for (unsigned l = 0; l <= H; ++l) {
            out.push_back(chain.project(x));
            if (l < H) x = op.apply(x);
        }
        return out;
    };
    std::vector<std::vector<CoordVector>> fam_proj;
    for (const auto& x : fam) fam_proj.push_back(proj_orbit(x));

    r.alpha.assign(m1, Scalar(0));
    r.alpha[0] = 1;
    auto phi = [&](const CoordVector& p) {
        Scalar s = 0;
        for (const auto& [i, v] : p) s += r.alpha[i] * v;
        return s;
    };
    // Bump alpha on a coordinate the offending projection sees until every
    // phi(T^l x^{(l)}) is non-zero.
    for (std::size_t guard = 0;; ++guard) {
        if (guard > H * m1 + 1) throw InternalError("no admissible alpha found");
        unsigned bad = 0;
        for (unsigned l = 1; l <= H && bad == 0; ++l)
            if (phi(fam_proj[l - 1][l]) == 0) bad = l;
        if (bad == 0) break;
        const CoordVector& p = fam_proj[bad - 1][bad];
        std::size_t i = p.begin()->first;
        for (const auto& kv : p)
            if (kv.first != 0) {
                i = kv.first;
                break;
            }
        r.alpha[i] += pow2(-static_cast<long>(bad));
    }

    CoordVector base = unit(chain.u[0], r.alpha[1] / r.alpha[0]);
    base[chain.u[1]] = -1;
    prune(base);
    auto base_proj = proj_orbit(base);
    for (unsigned l = 1; l <= H; ++l) {
        Scalar s = phi(base_proj[l]);
        for (unsigned j = 1; j < l; ++j) s += r.beta[j - 1] * phi(fam_proj[j - 1][l]);
        r.beta.push_back(-s / phi(fam_proj[l - 1][l]));
    }
    r.x = base;
    for (unsigned j = 1; j <= H; ++j) axpy(r.x, r.beta[j - 1], fam[j - 1]);
    prune(r.x);

    r.report.add("alpha0", {}, abs(r.alpha[0]), Rel::GT, Scalar(0));
    r.report.add("x.nonzero", {}, l1(r.x), Rel::GT, Scalar(0));
    for (unsigned l = 1; l <= H; ++l)
        r.report.add("phi.family", {l}, abs(phi(fam_proj[l - 1][l])), Rel::GT, Scalar(0));
    auto xs = proj_orbit(r.x);
    for (unsigned l = 0; l <= H; ++l) r.report.add("phi", {l}, phi(xs[l]), Rel::EQ, Scalar(0));
    return r;
}

}  // namespace ksp
