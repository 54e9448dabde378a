#pragma once

#include "ksp/kothe.hpp"
#include "ksp/report.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ksp {

// Raised when a scan runs past its window without meeting its target.
struct WindowExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a space fails a precondition (e.g. a zero seminorm on e_n).
struct HypothesisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SelectionParams {
    Scalar eps = Scalar(1, 2);
    Scalar C = Scalar(1);
    unsigned M = 1;
    std::size_t N = 1;
    unsigned K = 2;
    unsigned J = 2;
    // Gamma = max C_j over j <= K, used by the kernel-gap route only.
    Scalar basis_bound = Scalar(1);

    void validate() const;
};

struct FamilyEntry {
    std::size_t n = 0;
    Scalar alpha;
};

struct SelectionFamily {
    SelectionParams params;
    // entries[(j-1)*M + (m-1)] holds (n_{j,m}, alpha_{j,m}).
    std::vector<FamilyEntry> entries;
    std::string method;
    std::vector<std::pair<std::string, std::string>> notes;

    const FamilyEntry& at(unsigned j, unsigned m) const;
    FamilyEntry& at(unsigned j, unsigned m);
};

// l-th lexicographic successor of (j, m) in {1..J} x {1..M}.
std::optional<std::pair<unsigned, unsigned>> lex_next(unsigned j, unsigned m, unsigned J, unsigned M,
                                                      unsigned l = 1);

// Smallest n in (N, window] with p_j(e_n) <= C_j p_1(e_n) and p_{j+1}(e_n) >= L p_j(e_n).
std::optional<std::size_t> check_cor34(const KotheSpace& space, unsigned j, const Scalar& Cj,
                                       const Scalar& L, std::size_t N, std::size_t window);

// Window checks of the ratio hypotheses: monotonicity of R in j and n, the
// interlacing R_{j+1,n} <= R_{j,n+1}, the growth proxy R_{j,n_max} >= threshold,
// and the extremes of p_j(e_n)/p_j(e_{n+1}).
LedgerReport check_cor37(const KotheSpace& space, unsigned j_max, std::size_t n_max,
                         const Scalar& growth_threshold);

// All n <= window with a_{j+1,n} > C a_{j,n}.
std::vector<std::size_t> check_cor314(const KotheSpace& space, unsigned j, const Scalar& C,
                                      std::size_t window);

SelectionFamily select_family_cor34(const KotheSpace& space, const SelectionParams& params,
                                    std::size_t window);

struct Cor37Options {
    // Hypotheses are pre-checked on n <= min(window, precheck_window).
    std::size_t precheck_window = 1000;
};

SelectionFamily select_family_cor37(const KotheSpace& space, const SelectionParams& params,
                                    std::size_t window, const Cor37Options& opts = {});

LedgerReport verify_theorem33(const KotheSpace& space, const SelectionFamily& family);

}  // namespace ksp
