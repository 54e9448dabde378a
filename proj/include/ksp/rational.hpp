#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ksp {

using Scalar = mpq_class;
using Integer = mpz_class;

// Thrown for malformed user input (bad rational strings, bad configs).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when an internal invariant is breached; never expected in practice.
struct InternalError : std::logic_error {
    using std::logic_error::logic_error;
};

// Parses "num/den" or "num" (decimal digits, optional sign) into canonical form.
Scalar parse_rational(const std::string& text);

// Canonical "num/den" string; integers keep the "/1" so the format is uniform.
std::string to_string(const Scalar& q);
std::string to_string(const Integer& z);

Scalar abs(const Scalar& q);
Scalar pow(const Scalar& base, unsigned long exp);
Integer ipow(const Integer& base, unsigned long exp);

// 2^e for any signed e.
Scalar pow2(long e);

// floor(log2 |q|) for q != 0; used only for display annotations and search seeds.
long floor_log2(const Scalar& q);

// Largest power of two <= q (q > 0).
Scalar pow2_floor(const Scalar& q);
// Smallest power of two >= q (q > 0).
Scalar pow2_ceil(const Scalar& q);

// Approximate log2 |q| for display-only annotations.
double approx_log2(const Scalar& q);

}  // namespace ksp
