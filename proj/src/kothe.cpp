#include "ksp/kothe.hpp"

#include <algorithm>
#include <mutex>
#include <random>
#include <sstream>

namespace ksp {

CoordVector unit(std::size_t n, const Scalar& c) {
    CoordVector v;
    if (c != 0) v.emplace(n, c);
    return v;
}

void axpy(CoordVector& y, const Scalar& a, const CoordVector& x) {
    if (a == 0) return;
    for (const auto& [k, v] : x) {
        auto it = y.find(k);
        if (it == y.end()) {
            y.emplace(k, a * v);
        } else {
            it->second += a * v;
            if (it->second == 0) y.erase(it);
        }
    }
}

CoordVector scaled(const CoordVector& x, const Scalar& a) {
    CoordVector r;
    if (a == 0) return r;
    for (const auto& [k, v] : x) r.emplace_hint(r.end(), k, a * v);
    return r;
}

CoordVector sum(const CoordVector& x, const CoordVector& y) {
    CoordVector r = x;
    axpy(r, Scalar(1), y);
    return r;
}

CoordVector diff(const CoordVector& x, const CoordVector& y) {
    CoordVector r = x;
    axpy(r, Scalar(-1), y);
    return r;
}

void prune(CoordVector& x) {
    for (auto it = x.begin(); it != x.end();) it = it->second == 0 ? x.erase(it) : std::next(it);
}

std::vector<std::pair<unsigned long, unsigned>> factorize(unsigned long m) {
    std::vector<std::pair<unsigned long, unsigned>> out;
    for (unsigned long q = 2; q * q <= m; ++q) {
        unsigned k = 0;
        while (m % q == 0) {
            m /= q;
            ++k;
        }
        if (k) out.emplace_back(q, k);
    }
    if (m > 1) out.emplace_back(m, 1);
    return out;
}

namespace {

// Index (1-based) of prime q among the primes; memoized sieve.
class PrimeIndex {
public:
    unsigned long index_of(unsigned long q) {
        std::lock_guard<std::mutex> lock(mu_);
        grow(q);
        return static_cast<unsigned long>(std::lower_bound(primes_.begin(), primes_.end(), q) -
                                          primes_.begin()) + 1;
    }

private:
    void grow(unsigned long q) {
        if (limit_ >= q) return;
        unsigned long lim = std::max<unsigned long>(q, 2 * limit_ + 16);
        std::vector<bool> comp(lim + 1, false);
        primes_.clear();
        for (unsigned long i = 2; i <= lim; ++i) {
            if (comp[i]) continue;
            primes_.push_back(i);
            for (unsigned long k = i * i; k <= lim; k += i) comp[k] = true;
        }
        limit_ = lim;
    }
    std::mutex mu_;
    std::vector<unsigned long> primes_;
    unsigned long limit_ = 0;
};

PrimeIndex& prime_index() {
    static PrimeIndex idx;
    return idx;
}

struct PrimePower {
    unsigned long q;
    unsigned long ordinal;  // q is the ordinal-th prime
    unsigned k;
};

}  // namespace

struct KotheSpace::Cache {
    std::mutex mu;
    std::map<std::pair<unsigned, std::size_t>, Scalar> entries;
    std::map<std::size_t, std::vector<PrimePower>> factors;
};

KotheSpace::KotheSpace(SpaceSpec spec) : spec_(std::move(spec)), cache_(std::make_shared<Cache>()) {
    if (spec_.matrix.stride == 0) throw ConfigError("stride must be >= 1");
    if (spec_.kind == SpaceKind::LambdaP && spec_.p < 1) throw ConfigError("lambda^p needs p >= 1");
    if (spec_.matrix.kind == MatrixKind::PowerSeries && spec_.matrix.base <= 1)
        throw ConfigError("power-series base must exceed 1");
}

std::string KotheSpace::describe() const {
    std::ostringstream os;
    static const char* names[] = {"table", "s", "entire", "prime", "power-series"};
    os << names[static_cast<int>(spec_.matrix.kind)];
    if (spec_.matrix.stride != 1) os << "[stride " << spec_.matrix.stride << "]";
    if (spec_.kind == SpaceKind::C0) os << " c0";
    else os << " lambda^" << to_string(spec_.p);
    return os.str();
}

bool KotheSpace::is_lambda1() const { return spec_.kind == SpaceKind::LambdaP && spec_.p == 1; }

Scalar KotheSpace::raw_entry(unsigned level, std::size_t n) const {
    const MatrixRule& m = spec_.matrix;
    switch (m.kind) {
        case MatrixKind::Table: {
            if (level > m.table.size() || n >= m.table[level - 1].size())
                throw ConfigError("table entry (" + std::to_string(level) + "," + std::to_string(n) +
                                  ") outside the supplied matrix");
            return m.table[level - 1][n];
        }
        case MatrixKind::S:
            return Scalar(ipow(Integer(static_cast<unsigned long>(n + 1)), level));
        case MatrixKind::Entire: {
            Integer r;
            mpz_ui_pow_ui(r.get_mpz_t(), 2, static_cast<unsigned long>(level) * n);
            return Scalar(r);
        }
        case MatrixKind::Prime: {
            std::vector<PrimePower> f;
            bool hit = false;
            {
                std::lock_guard<std::mutex> lock(cache_->mu);
                auto it = cache_->factors.find(n);
                if (it != cache_->factors.end()) f = it->second, hit = true;
            }
            if (!hit) {
                for (auto [q, k] : factorize(n + 1)) f.push_back({q, prime_index().index_of(q), k});
                std::lock_guard<std::mutex> lock(cache_->mu);
                cache_->factors.emplace(n, f);
            }
            Integer r = 1;
            for (const auto& pp : f)
                if (pp.ordinal <= level) r *= ipow(Integer(pp.q), pp.k);
            return Scalar(r);
        }
        case MatrixKind::PowerSeries:
            return pow(m.base, m.t_step * level * m.alpha_step * n);
    }
    throw InternalError("unknown matrix kind");
}

Scalar KotheSpace::entry(unsigned j, std::size_t n) const {
    if (j == 0) throw ConfigError("seminorm levels start at 1");
    unsigned level = j * spec_.matrix.stride;
    bool cacheable = spec_.matrix.kind == MatrixKind::PowerSeries ||
                     (spec_.matrix.kind == MatrixKind::S && level > 16);
    if (!cacheable) return raw_entry(level, n);
    {
        std::lock_guard<std::mutex> lock(cache_->mu);
        auto it = cache_->entries.find({level, n});
        if (it != cache_->entries.end()) return it->second;
    }
    Scalar v = raw_entry(level, n);
    std::lock_guard<std::mutex> lock(cache_->mu);
    cache_->entries.emplace(std::make_pair(level, n), v);
    return v;
}

SeminormValue KotheSpace::seminorm_value(unsigned j, const CoordVector& x) const {
    if (x.empty()) return {Scalar(0), false};
    if (x.size() == 1) return {abs(x.begin()->second) * entry(j, x.begin()->first), false};
    if (spec_.kind == SpaceKind::C0) {
        Scalar best = 0;
        for (const auto& [k, v] : x) best = std::max(best, Scalar(abs(v) * entry(j, k)));
        return {best, false};
    }
    if (spec_.p.get_den() != 1)
        throw ConfigError("lambda^p with non-integer p: only single-term seminorms are exact");
    unsigned long p = spec_.p.get_num().get_ui();
    Scalar s = 0;
    for (const auto& [k, v] : x) s += pow(Scalar(abs(v) * entry(j, k)), p);
    return {s, p != 1};
}

Scalar KotheSpace::seminorm_power(unsigned j, const CoordVector& x) const {
    SeminormValue v = seminorm_value(j, x);
    if (v.is_pth_power || spec_.kind == SpaceKind::C0 || spec_.p == 1) return v.value;
    if (spec_.p.get_den() != 1) throw ConfigError("p-th power needs an integer p");
    return pow(v.value, spec_.p.get_num().get_ui());
}

Scalar KotheSpace::seminorm(unsigned j, const CoordVector& x) const {
    SeminormValue v = seminorm_value(j, x);
    if (v.is_pth_power)
        throw ConfigError("seminorm of a multi-term vector in " + describe() +
                          " is only exact as a p-th power");
    return v.value;
}

Scalar KotheSpace::ratio_R(unsigned j, std::size_t n) const {
    Scalar d = entry(j, n);
    if (d == 0)
        throw ConfigError("R_{" + std::to_string(j) + "," + std::to_string(n) + "}: p_j(e_n) = 0");
    return entry(j + 1, n) / d;
}

void KotheSpace::validate(unsigned j_max, std::size_t n_max) const {
    if (spec_.matrix.kind == MatrixKind::Table) {
        const auto& t = spec_.matrix.table;
        if (t.empty()) throw ConfigError("empty matrix table");
        j_max = std::min<unsigned>(j_max, static_cast<unsigned>(t.size() / spec_.matrix.stride));
        for (const auto& row : t)
            if (row.empty()) throw ConfigError("empty matrix row");
        std::size_t cols = t[0].size();
        for (const auto& row : t) cols = std::min(cols, row.size());
        n_max = std::min(n_max, cols - 1);
        // Zero columns are judged on the whole table, not just the stride rows.
        for (std::size_t n = 0; n <= n_max; ++n) {
            bool pos = false;
            for (const auto& row : t) pos = pos || row[n] > 0;
            if (!pos) throw ConfigError("column " + std::to_string(n) + " of the matrix is all zero");
        }
    }
    for (std::size_t n = 0; n <= n_max; ++n) {
        bool positive = false;
        Scalar prev = -1;
        for (unsigned j = 1; j <= j_max; ++j) {
            Scalar a = entry(j, n);
            if (a < 0) throw ConfigError("negative matrix entry at (" + std::to_string(j) + "," +
                                         std::to_string(n) + ")");
            if (a < prev)
                throw ConfigError("column " + std::to_string(n) + " decreases at level " +
                                  std::to_string(j) + " (window j<=" + std::to_string(j_max) +
                                  ", n<=" + std::to_string(n_max) + ")");
            prev = a;
            positive = positive || a > 0;
        }
        if (!positive && spec_.matrix.kind != MatrixKind::Table)
            throw ConfigError("column " + std::to_string(n) + " is zero on the validation window");
    }
}

KotheSpace make_space(const SpaceSpec& spec, unsigned validate_levels, std::size_t validate_window) {
    KotheSpace s(spec);
    s.validate(validate_levels, validate_window);
    return s;
}

NormScanResult continuous_norm_scan(const KotheSpace& space, unsigned j_max, std::size_t n_max) {
    NormScanResult r{std::nullopt, j_max, n_max};
    for (unsigned j = 1; j <= j_max; ++j) {
        bool ok = true;
        for (std::size_t n = 0; n <= n_max && ok; ++n) ok = space.entry(j, n) > 0;
        if (ok) {
            r.level = j;
            break;
        }
    }
    return r;
}

namespace {

std::vector<std::vector<Scalar>> coefficient_patterns(std::size_t len) {
    std::vector<std::vector<Scalar>> pats;
    std::vector<Scalar> ones(len, Scalar(1)), alt(len), rnd(len);
    for (std::size_t i = 0; i < len; ++i) alt[i] = (i % 2) ? -1 : 1;
    std::mt19937_64 gen(12345);
    std::uniform_int_distribution<int> d(-9, 9);
    pats.push_back(ones);
    pats.push_back(alt);
    for (int rep = 0; rep < 3; ++rep) {
        for (std::size_t i = 0; i < len; ++i) rnd[i] = Scalar(d(gen), 1 + (d(gen) + 9) % 7);
        pats.push_back(rnd);
    }
    return pats;
}

}  // namespace

Scalar basis_constant_scan(const KotheSpace& space, unsigned j, const std::vector<CoordVector>& basis) {
    Scalar best = 0;
    for (const auto& pat : coefficient_patterns(basis.size())) {
        std::vector<Scalar> low, high;
        CoordVector s;
        for (std::size_t i = 0; i < basis.size(); ++i) {
            axpy(s, pat[i], basis[i]);
            low.push_back(space.seminorm_value(j, s).value);
            high.push_back(space.seminorm_value(j + 1, s).value);
        }
        // max over M <= N of low[M]/high[N] = max_M low[M] / min_{N>=M} high[N].
        std::optional<Scalar> suffix_min;
        for (std::size_t m = basis.size(); m-- > 0;) {
            if (high[m] > 0 && (!suffix_min || high[m] < *suffix_min)) suffix_min = high[m];
            if (suffix_min) best = std::max(best, Scalar(low[m] / *suffix_min));
        }
    }
    return best;
}

Scalar basis_constant_scan(const KotheSpace& space, unsigned j, std::size_t n_max) {
    std::vector<CoordVector> basis;
    for (std::size_t n = 0; n <= n_max; ++n) basis.push_back(unit(n));
    return basis_constant_scan(space, j, basis);
}

}  // namespace ksp
