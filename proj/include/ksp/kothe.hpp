#pragma once

#include "ksp/rational.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ksp {

// Finitely supported coordinate vector; zero entries are never stored.
using CoordVector = std::map<std::size_t, Scalar>;

CoordVector unit(std::size_t n, const Scalar& c = Scalar(1));
void axpy(CoordVector& y, const Scalar& a, const CoordVector& x);  // y += a x
CoordVector scaled(const CoordVector& x, const Scalar& a);
CoordVector sum(const CoordVector& x, const CoordVector& y);
CoordVector diff(const CoordVector& x, const CoordVector& y);
void prune(CoordVector& x);

enum class MatrixKind { Table, S, Entire, Prime, PowerSeries };

struct MatrixRule {
    MatrixKind kind = MatrixKind::S;
    // Level stride L: level j of the space reads row L*j of the base rule.
    // Regrouping seminorms this way keeps the topology and the basis.
    unsigned stride = 1;
    // Table rows: table[j-1][n] = a_{j,n}.
    std::vector<std::vector<Scalar>> table;
    // Power-series surrogate: a_{j,n} = base^{(t_step*j)*(alpha_step*n)}.
    Scalar base = Scalar(2);
    unsigned long t_step = 1;
    unsigned long alpha_step = 1;
};

enum class SpaceKind { LambdaP, C0 };

struct SpaceSpec {
    MatrixRule matrix;
    SpaceKind kind = SpaceKind::LambdaP;
    Scalar p = Scalar(1);
};

// A seminorm value. For lambda^p with p != 1 and more than one non-zero
// term the p-th root is generally irrational; `value` then holds p_j(x)^p
// and `is_pth_power` is set.
struct SeminormValue {
    Scalar value;
    bool is_pth_power = false;
};

class KotheSpace {
public:
    explicit KotheSpace(SpaceSpec spec);

    const SpaceSpec& spec() const { return spec_; }
    std::string describe() const;

    // a_{j,n} for level j >= 1.
    Scalar entry(unsigned j, std::size_t n) const;

    // p_j(e_n) = a_{j,n}.
    Scalar unit_norm(unsigned j, std::size_t n) const { return entry(j, n); }

    // Exact seminorm when representable; see SeminormValue.
    SeminormValue seminorm_value(unsigned j, const CoordVector& x) const;

    // p_j(x)^p for lambda^p (integer p), p_j(x) for c0.
    Scalar seminorm_power(unsigned j, const CoordVector& x) const;

    // Exact seminorm; throws ConfigError when only the p-th power is exact.
    Scalar seminorm(unsigned j, const CoordVector& x) const;

    // R_{j,n} = p_{j+1}(e_n) / p_j(e_n).
    Scalar ratio_R(unsigned j, std::size_t n) const;

    bool is_lambda1() const;

    // Checks the matrix axioms on levels 1..j_max and indices 0..n_max.
    void validate(unsigned j_max, std::size_t n_max) const;

private:
    Scalar raw_entry(unsigned level, std::size_t n) const;

    SpaceSpec spec_;
    struct Cache;
    std::shared_ptr<Cache> cache_;
};

KotheSpace make_space(const SpaceSpec& spec, unsigned validate_levels = 4,
                      std::size_t validate_window = 64);

// Prime factor exponents of m: k_l for the l-th prime, l = 1, 2, ...
std::vector<std::pair<unsigned long, unsigned>> factorize(unsigned long m);

struct NormScanResult {
    std::optional<unsigned> level;  // smallest j with p_j(e_n) > 0 on the window
    unsigned j_max = 0;
    std::size_t n_max = 0;
};

NormScanResult continuous_norm_scan(const KotheSpace& space, unsigned j_max, std::size_t n_max);

// Empirical basis constant: max over M <= N <= n_max and a fixed battery of
// coefficient patterns of p_j(S_M) / p_{j+1}(S_N), S_M the M-th partial sum.
Scalar basis_constant_scan(const KotheSpace& space, unsigned j, std::size_t n_max);
Scalar basis_constant_scan(const KotheSpace& space, unsigned j,
                           const std::vector<CoordVector>& basis);

}  // namespace ksp
