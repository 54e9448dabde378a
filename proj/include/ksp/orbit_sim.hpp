#pragma once

#include "ksp/read_operator.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace ksp {

struct OrbitStep {
    std::size_t i = 0;
    CoordVector x;              // u-coordinates of T^i x
    std::vector<Scalar> values; // p_l(T^i x - z) for each requested level
};

// Exact iterates T^0 x .. T^steps x. Throws TruncationExit naming the step.
std::vector<OrbitStep> orbit(const Construction& cons, const CoordVector& x, std::size_t steps,
                             const std::vector<unsigned>& levels = {}, const CoordVector& z = {});

// Random finitely supported vector in u-coordinates on [lo, hi) with up to
// `terms` non-zero entries (small rationals).
CoordVector random_support(std::mt19937_64& rng, std::size_t lo, std::size_t hi, std::size_t terms);

// p_N(T u_j) <= 2^{-j} p_{N+1}(u_j) for t_N <= j in [lo, hi), plus the global
// bound p_N(Tx) <= 4 C_{N+1} L_N p_{N+2}(x) on x = 0, x = u_0 and `samples`
// random vectors.
LedgerReport continuity_check(const Construction& cons, unsigned N, std::size_t lo, std::size_t hi,
                              std::size_t samples, std::uint64_t seed);

struct CaptureRow {
    unsigned n = 0;
    bool available = false;
    Scalar p1_y, p1_tau;  // p_1(pi_{t_n} x), p_1(tau_n pi_{t_n} x)
    bool member = false;
};

// Requires p_1(x) = 1 exactly.
std::vector<CaptureRow> capture_check(const Construction& cons, const CoordVector& x,
                                      const std::vector<unsigned>& stages);

// p_{N_n}(T^{c_n^k} x) <= p_{N_n+3}(x) for x supported in [t_n, dimension).
Record tail_check(const Construction& cons, unsigned n, unsigned k, const CoordVector& x);

// tail_check on `samples` random vectors with support size 5 for every (n, k)
// whose power keeps the support inside the truncation.
LedgerReport tail_battery(const Construction& cons, std::size_t samples, std::uint64_t seed);

// Synthesizes P for each y (each y is its own cover cell) and checks
// p_{N_n}(P(T)y - u_0) <= 2 p_{N_n}(u_{a_n}) + D max_{t_n <= j <= 2t_n} p_{N_n}(u_j)
// with the best P of the family and D the largest synthesis bound.
LedgerReport cor47_check(const Construction& cons, unsigned n, const std::vector<CoordVector>& ys);

// Vectors of K_n near u_0 / p_1(u_0): random rescalings plus small low-index noise.
std::vector<CoordVector> sample_kn(const Construction& cons, unsigned n, std::size_t count, std::uint64_t seed);

// For random S with deg <= R_n and |S| <= R_n, the rounded net element is a
// lattice point of the stage's net within its mesh.
LedgerReport net_check(const Construction& cons, unsigned n, std::size_t samples, std::uint64_t seed);

struct WitnessCertificate {
    unsigned stage = 0;
    unsigned level = 0;  // N_n
    std::size_t k = 0, l = 0, w = 0;
    Integer power;       // c_n^k
    Polynomial S;
    // p_{N_n} of: T^i(x-y), T^i y - Q(T)y, S_w(T)(P(T)y - u_0), S_w(T)u_0 - S(T)u_0, S(T)u_0 - z.
    std::array<Scalar, 5> terms;
    bool tail_bounded = false;  // first term is the bound p_{N_n+3}(x-y), not the exact value
    Scalar total;
    Scalar exact_top;  // p_{N_n}(T^i x - z)
    Scalar exact_N;    // p_N(T^i x - z)
    Scalar scale;      // x was multiplied by this to reach p_1 = 1
};

struct WitnessResult {
    std::optional<WitnessCertificate> cert;
    std::vector<std::string> diagnostics;
};

// Scans stages 2..horizon in order for N_n = N + 2 R_n. S defaults to the first
// net element with p_{N_n}(S(T)u_0 - z) <= 1.
WitnessResult witness(const Construction& cons, const CoordVector& x, const CoordVector& z, unsigned N,
                      const std::optional<Polynomial>& S = std::nullopt);

}  // namespace ksp
