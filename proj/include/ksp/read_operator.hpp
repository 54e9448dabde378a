#pragma once

#include "ksp/kothe.hpp"
#include "ksp/report.hpp"

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ksp {

// A parameter inequality failed; the message names it and the stage.
struct ParameterError : ConfigError {
    using ConfigError::ConfigError;
};

// An image or iterate would leave span{u_j : j < dimension}.
struct TruncationExit : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A block could not meet its target inequalities.
struct ConstructionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-stage vectors are indexed by n (entry 0 unused). mu, c, R cover
// 1..horizon; delta, a, t, N cover 1..horizon+1.
struct ReadParameters {
    unsigned horizon = 1;
    bool relaxed_schedule = false;
    std::vector<unsigned> mu;
    std::vector<Integer> delta, a, t, c;
    std::vector<unsigned> N, R;

    // c_n^k as an integer power.
    Integer c_pow(unsigned n, unsigned k) const;
    // c_n^{mu_n}; zero for n = 0.
    Integer c_top(unsigned n) const;
    // Truncation dimension t_{horizon+1}.
    std::size_t dimension() const;
};

// Throws ParameterError naming the first violated inequality.
void validate_parameters(const ReadParameters& p);

struct ScheduleSpec {
    std::vector<unsigned> mu;  // per stage 1..horizon; missing entries default to 1
    std::vector<unsigned> N;   // per stage 1..horizon+1; default 1
    std::vector<unsigned> R;   // per stage 1..horizon; default 1
    bool relaxed = false;      // drop max{N_n, R_n} <= n
};

ReadParameters make_parameters(unsigned horizon, const ScheduleSpec& schedule, const Integer& t1 = 6,
                               const Integer& a1 = 3);

// Narrowing with an overflow check.
std::size_t to_index(const Integer& z);

struct BasisAssignment {
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    std::vector<std::size_t> e_index;  // n(j)
    std::vector<Scalar> alpha;         // alpha(j)
    std::vector<std::size_t> sigma;    // e_m = lambda_m u_{sigma(m)}

    explicit BasisAssignment(std::size_t dimension = 0);
    std::size_t size() const { return e_index.size(); }
    bool assigned(std::size_t j) const { return j < size() && e_index[j] != npos; }
    void assign(std::size_t j, std::size_t e, const Scalar& a);
    // lambda_{sigma(m)} with e_m = lambda u_{sigma(m)}, i.e. 1/alpha.
    Scalar lambda_of_e(std::size_t m) const;
    // x in u-coordinates to e-coordinates.
    CoordVector to_e(const CoordVector& x) const;
    CoordVector from_e(const CoordVector& x) const;
};

struct Polynomial {
    std::vector<Scalar> coef;  // coef[i] multiplies X^i; no trailing zeros

    Polynomial() = default;
    explicit Polynomial(std::vector<Scalar> c);
    static Polynomial monomial(std::size_t deg, const Scalar& c = Scalar(1));

    bool is_zero() const { return coef.empty(); }
    std::size_t degree() const;  // 0 for the zero polynomial
    Scalar norm() const;         // sum of |coefficients|
    Polynomial operator*(const Polynomial& o) const;
    Polynomial operator-(const Polynomial& o) const;
    bool operator==(const Polynomial& o) const { return coef == o.coef; }
    std::string str() const;
};

struct StageFamilies {
    unsigned n = 0;
    Scalar D = Scalar(1);
    std::vector<Polynomial> P;  // P_{n,k}
    std::vector<Polynomial> S;  // S_{n,w}
    std::vector<Polynomial> Q;  // Q_{n,l}, l = (k-1) W + w
    std::vector<std::pair<std::size_t, std::size_t>> back;  // l -> (k, w), 1-based
    Scalar mesh;                // net mesh bound
    std::size_t full_net_size = 0;
    std::size_t cover_cells = 0;
};

enum class WindowKind { None, A, C };

struct WindowInfo {
    WindowKind kind = WindowKind::None;
    unsigned n = 0;
    unsigned k = 0;
    std::size_t start = 0;
};

// T restricted to span{u_j : j < dimension}, described by its iterates on u_0.
// Not thread-safe: the iterate memo grows on demand.
class ReadOperator {
public:
    explicit ReadOperator(ReadParameters params);

    const ReadParameters& params() const { return params_; }
    std::size_t dimension() const { return dim_; }

    // Fixes Q_{n,k}; must precede any iterate inside a stage-n Q-window.
    void set_families(const StageFamilies& f);
    const StageFamilies* families(unsigned n) const;

    WindowInfo window(std::size_t j) const;

    // u-coordinates of T^j u_0.
    const CoordVector& gamma(std::size_t j) const;
    CoordVector apply(const CoordVector& x) const;
    CoordVector apply_power(const CoordVector& x, std::size_t k) const;
    CoordVector to_gamma(const CoordVector& x) const;
    CoordVector from_gamma(const CoordVector& g) const;
    // P(T) x.
    CoordVector poly_apply(const Polynomial& P, const CoordVector& x) const;
    // Keeps the gamma-coordinates below t_{n-1}; y must lie below t_n.
    CoordVector tau(unsigned n, const CoordVector& y) const;

private:
    void check_support(const CoordVector& x, const char* what) const;

    ReadParameters params_;
    std::size_t dim_;
    std::vector<WindowInfo> windows_;
    std::vector<std::optional<StageFamilies>> fam_;
    mutable std::vector<std::optional<CoordVector>> memo_;  // sized once; references stay valid
};

// Net of polynomials of degree <= R with |S| <= R on the lattice (h/(R+1)) Z,
// h the largest 1/m <= mesh. The constant 1 comes first, then lexicographic
// order on coefficient numerators. Stops after `cap` entries (0 = no cap).
std::vector<Polynomial> build_net(unsigned R, const Scalar& mesh, std::size_t cap = 0);
std::size_t net_size(unsigned R, const Scalar& mesh);
// Net element obtained by rounding coefficients toward zero.
Polynomial net_round(const Polynomial& S, unsigned R, const Scalar& mesh);

struct PSynthesis {
    Polynomial P;
    CoordVector y_gamma;   // gamma-coordinates of y
    CoordVector residual;  // gamma-coordinates of P(T)y - gamma_{a_n}, all >= t_n
    Scalar D;              // max{1, |P|, sum |y_j|, sum |residual|}
};

// Triangular solve for P with gamma-coordinates of P(T)y equal to delta_{a_n}
// below t_n. Requires y below t_n with gamma-valuation <= a_n.
PSynthesis synthesize_P(const ReadOperator& op, unsigned n, const CoordVector& y);

struct FamilyPolicy {
    std::size_t cover_cap = 1;
    std::vector<CoordVector> cover;  // u-coordinates; empty means {u_0 / p_1(u_0)}
};

struct ConstructionOptions {
    FamilyPolicy family;
    Scalar basis_constant = Scalar(1);  // C_j in the tail and continuity conditions
    unsigned max_restarts = 512;        // floor raises before giving up
};

// Position of an index within the staged build order.
struct BuildStep {
    std::size_t j = 0;
    unsigned stage = 0;  // 0 for the initial block
    unsigned block = 0;  // 1..6 for blocks (i)..(vi) of the stage
};

class Construction {
public:
    Construction(KotheSpace space, ReadParameters params, ConstructionOptions opts);

    const KotheSpace& space() const { return space_; }
    const ReadParameters& params() const { return op_.params(); }
    const ConstructionOptions& options() const { return opts_; }
    const ReadOperator& op() const { return op_; }
    ReadOperator& op() { return op_; }
    const BasisAssignment& basis() const { return basis_; }
    std::size_t dimension() const { return op_.dimension(); }
    std::size_t built() const { return built_; }
    const std::vector<BuildStep>& order() const { return order_; }
    std::size_t position(std::size_t j) const { return pos_[j]; }
    unsigned completed_stages() const { return completed_; }
    unsigned restarts() const { return restarts_; }

    // p_l(u_j) and p_l(T^m u_0); all involved u's must be assigned.
    const Scalar& pu(unsigned l, std::size_t j) const;
    const Scalar& pg(unsigned l, std::size_t m) const;
    // p_l of a u-coordinate vector (lambda^1: sum of |x_j| p_l(u_j)).
    Scalar p(unsigned l, const CoordVector& x) const;

    void assign(std::size_t j, const Scalar& alpha);
    // Overwrites alpha(j) and drops dependent caches (mutation tests).
    void set_alpha(std::size_t j, const Scalar& alpha);

private:
    friend Construction build_construction(const KotheSpace&, const ReadParameters&,
                                           const ConstructionOptions&);
    friend Construction replay_construction(const KotheSpace&, const ReadParameters&,
                                            const ConstructionOptions&, const std::vector<Scalar>&);
    void plan_order();

    KotheSpace space_;
    ConstructionOptions opts_;
    ReadOperator op_;
    BasisAssignment basis_;
    std::vector<BuildStep> order_;
    std::vector<std::size_t> pos_;
    std::size_t next_e_ = 0;
    std::size_t built_ = 0;
    unsigned completed_ = 0;
    unsigned restarts_ = 0;
    mutable std::vector<std::vector<Scalar>> pu_;
    mutable std::vector<std::vector<std::optional<Scalar>>> pg_;
};

struct KnMembership {
    bool member = false;
    Scalar p1, p1_tau;  // p_1(y), p_1(tau_n y)
};

// y in K_n iff p_1(y) <= 3/2 and p_1(tau_n y) >= 1/2.
KnMembership kn_membership(const Construction& cons, unsigned n, const CoordVector& y);

StageFamilies build_poly_families(const Construction& cons, unsigned n, const FamilyPolicy& policy);

// Runs the staged build through the parameters' horizon. Every scalar is the
// choice closest to p_1(u_j) = 1 inside the interval cut out by the ledger
// inequalities whose last-built index is j. When an upper bound from an earlier
// u_{j'} leaves no room, |alpha_{j'}| gets a floor and the build restarts.
Construction build_construction(const KotheSpace& space, const ReadParameters& params,
                                const ConstructionOptions& opts = {});

// Re-runs the staged build with the given alpha(j) instead of solving for
// them; families are rebuilt at the same points as in build_construction.
Construction replay_construction(const KotheSpace& space, const ReadParameters& params,
                                 const ConstructionOptions& opts, const std::vector<Scalar>& alpha);

// One ledger inequality: lhs = p_level(u_j), rhs = factor * 2^exp2 * agg(set)
// (agg = max for >=, min for <=) or factor * 2^exp2 when the set is empty.
struct LedgerItem {
    unsigned level = 1;
    bool gamma = false;  // T^idx u_0 rather than u_idx
    std::size_t idx = 0;
};

struct LedgerAtom {
    std::string cond;
    std::vector<long long> idx;
    LedgerItem lhs;
    Rel rel = Rel::GE;
    Scalar factor = Scalar(1);
    long exp2 = 0;
    std::shared_ptr<const std::vector<LedgerItem>> set;

    bool references(const Construction& cons, std::size_t j) const;
};

// Atoms of the conditions attached to stage n (indices in [t_n, t_{n+1})).
std::vector<LedgerAtom> stage_atoms(const Construction& cons, unsigned n);

struct LedgerOptions {
    bool keep_passing = true;
};

LedgerReport verify_ledger(const Construction& cons, const LedgerOptions& opts = {});

// Smallest L >= 1 with 2^{-j} L p_{N+1}(u_j) >= p_N(T u_j) for j < t_N.
Scalar compute_L(const Construction& cons, unsigned N);

}  // namespace ksp
