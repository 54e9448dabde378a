#include "ksp/rational.hpp"

#include <cctype>
#include <cmath>

namespace ksp {

namespace {

bool valid_integer_text(const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

std::string strip_plus(const std::string& s) {
    return (!s.empty() && s[0] == '+') ? s.substr(1) : s;
}

}  // namespace

Scalar parse_rational(const std::string& text) {
    auto slash = text.find('/');
    std::string num = text.substr(0, slash);
    std::string den = slash == std::string::npos ? "1" : text.substr(slash + 1);
    if (!valid_integer_text(num) || !valid_integer_text(den) || den[0] == '-' || den[0] == '+')
        throw ConfigError("malformed rational \"" + text + "\" (expected num/den)");
    Integer n(strip_plus(num), 10), d(den, 10);
    if (d == 0) throw ConfigError("zero denominator in \"" + text + "\"");
    Scalar q(n, d);
    q.canonicalize();
    return q;
}

std::string to_string(const Scalar& q) {
    return q.get_num().get_str() + "/" + q.get_den().get_str();
}

std::string to_string(const Integer& z) { return z.get_str(); }

Scalar abs(const Scalar& q) { return q < 0 ? Scalar(-q) : q; }

Integer ipow(const Integer& base, unsigned long exp) {
    Integer r;
    mpz_pow_ui(r.get_mpz_t(), base.get_mpz_t(), exp);
    return r;
}

Scalar pow(const Scalar& base, unsigned long exp) {
    Scalar r(ipow(base.get_num(), exp), ipow(base.get_den(), exp));
    r.canonicalize();
    return r;
}

Scalar pow2(long e) {
    Integer p;
    mpz_ui_pow_ui(p.get_mpz_t(), 2, static_cast<unsigned long>(e < 0 ? -e : e));
    return e < 0 ? Scalar(Integer(1), p) : Scalar(p);
}

long floor_log2(const Scalar& q) {
    if (q == 0) throw InternalError("floor_log2 of zero");
    Scalar a = abs(q);
    long nb = static_cast<long>(mpz_sizeinbase(a.get_num_mpz_t(), 2));
    long db = static_cast<long>(mpz_sizeinbase(a.get_den_mpz_t(), 2));
    long e = nb - db;  // a in [2^{e-1}, 2^{e+1})
    if (pow2(e) <= a) {
        while (pow2(e + 1) <= a) ++e;
    } else {
        while (pow2(e) > a) --e;
    }
    return e;
}

Scalar pow2_floor(const Scalar& q) { return pow2(floor_log2(q)); }

Scalar pow2_ceil(const Scalar& q) {
    long e = floor_log2(q);
    Scalar p = pow2(e);
    return p == q ? p : pow2(e + 1);
}

double approx_log2(const Scalar& q) {
    if (q == 0) return -INFINITY;
    long e;
    double mn = std::fabs(mpz_get_d_2exp(&e, q.get_num_mpz_t()));
    long f;
    double md = mpz_get_d_2exp(&f, q.get_den_mpz_t());
    return std::log2(mn / md) + static_cast<double>(e - f);
}

}  // namespace ksp
