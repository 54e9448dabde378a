#pragma once

#include "ksp/read_operator.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ksp {

// Operator on the truncation of an ω-type space to coordinates 0..dim-1.
// Seminorm p_j(x) = max_{n < kernel[j-1]} |x_n|; the default profile is
// kernel[j-1] = j (plain ω). Coordinates of T x at or beyond dim are dropped.
class OmegaOperator {
public:
    using Row = std::vector<std::pair<std::size_t, Scalar>>;

    OmegaOperator(std::size_t dim, std::vector<Row> rows, std::vector<std::size_t> kernel = {});

    static OmegaOperator forward_shift(std::size_t dim);   // e_n -> e_{n+1}
    static OmegaOperator backward_shift(std::size_t dim);  // e_n -> e_{n-1}, e_0 -> 0
    static OmegaOperator zero(std::size_t dim);

    std::size_t dimension() const { return dim_; }
    const std::vector<Row>& rows() const { return rows_; }
    // Number of coordinates p_j looks at.
    std::size_t kernel_size(unsigned j) const;

    CoordVector apply(const CoordVector& x) const;

private:
    std::size_t dim_;
    std::vector<Row> rows_;
    std::vector<std::size_t> kernel_;
};

// Parses one row per line, entries "col:num/den" separated by spaces. Blank
// lines are zero rows; '#' starts a comment.
OmegaOperator parse_omega_operator(const std::string& text, std::size_t dim = 0);

// Regrouped seminorms q_j = p_{g j}; M_j = coordinates [k(gj), k(g(j+1))).
struct KernelChain {
    unsigned group = 1;
    unsigned depth = 0;
    bool trivial = false;                   // the truncation cannot hold M_1
    std::vector<std::vector<std::size_t>> M;  // M[j-1] lists the e-indices spanning M_j
    std::vector<std::size_t> u;              // u_n = e_{u[n]}, flattened M_1, M_2, ...
    // Row i of T reads only columns below row_bound[i] (the coordinates q_{j+1}
    // sees, j the level of i); the truncation does not show entries past dim.
    std::vector<std::size_t> row_bound;

    std::size_t m1_size() const { return M.empty() ? 0 : M[0].size(); }
    // P_{M_1} x in u-coordinates 0..m1_size()-1 (zeros dropped).
    CoordVector project(const CoordVector& x) const;
    // If coordinates below v of x are exact, those below reach(v) of T x are.
    std::size_t reach(std::size_t v) const;
};

// Smallest grouping with codim(ker q_2 in ker q_1) >= 2 and every later step
// of codimension >= 1 up to `depth`. Checks that each row of T at level j only
// reads columns seen by q_{j+1}.
KernelChain build_chain(const OmegaOperator& op, unsigned depth);

// A[l] = {n : P T^l u_n != 0 and P T^{l'} u_n = 0 for l' < l}, l = 0..L_max.
// Throws TruncationExit when L_max applications lose exactness on M_1.
std::vector<std::vector<std::size_t>> compute_Al(const KernelChain& chain, const OmegaOperator& op,
                                                 unsigned L_max);

enum class OmegaCase { One, Two, Insufficient };
const char* case_name(OmegaCase c);

// Case 2 when A_H is non-empty, case 1 when A_l is empty on (H/2, H],
// insufficient otherwise.
OmegaCase classify(const std::vector<std::vector<std::size_t>>& A);

struct Case1Witness {
    std::size_t n = 0;               // u_n
    std::vector<CoordVector> orbit;  // T^l u_n in e-coordinates, l = 0..H
    LedgerReport report;             // P T^l u_n = 0 for l <= H
};

std::optional<Case1Witness> case1_witness(const KernelChain& chain, const OmegaOperator& op, unsigned horizon);

struct Case2Functional {
    std::vector<Scalar> alpha;            // phi on M_1 in u-coordinates; alpha[0] != 0
    std::vector<std::size_t> l_m;         // l_m chosen for each l = 1..H
    std::vector<CoordVector> family;      // x^{(l)}, l = 1..H, e-coordinates (index l-1)
    std::vector<Scalar> beta;             // beta_l, l = 1..H (index l-1)
    CoordVector x;                        // e-coordinates
    bool sweep_stabilized = false;        // every swept coordinate ends in at most one x^{(l)}
    std::size_t sweep_passes = 0;
    LedgerReport report;                  // phi(T^l x) = 0, phi(T^l x^{(l)}) != 0, x != 0
};

// Throws ConfigError when A_H is empty (the case-1 route applies).
Case2Functional case2_functional(const KernelChain& chain, const OmegaOperator& op, unsigned horizon);

}  // namespace ksp
