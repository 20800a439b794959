#pragma once

#include "mpt/solver.hpp"
#include "mpt/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mpt {

/// Absolute/relative suboptimality targets plus the solver and geometric
/// tolerances shared by the offline phases and the online evaluators.
struct ToleranceConfig {
    double eps_a = 0.0;
    double eps_r = 0.0;
    double solver_tol = 1e-8;
    double geom_tol = 1e-9;
    double min_cell_volume = 0.0; ///< <= 0 disables the volume safeguard
    int max_depth = 64;
    double rel_denominator_floor = 1e-9;

    void validate_for_refine() const;
    SolverSettings solver_settings() const;
};

/// The candidate commutation set: an ordered, duplicate-free list of binary
/// vectors of length m. The ordering is fixed and defines all tie-breaking.
class CommutationSpace {
public:
    CommutationSpace() = default;
    CommutationSpace(Index m, std::vector<Delta> admissible);

    /// All 2^m binary vectors in lexicographic order (bit 0 most significant).
    static CommutationSpace full_hypercube(Index m);

    Index bit_length() const { return m_; }
    Index size() const { return static_cast<Index>(admissible_.size()); }
    const Delta &at(Index i) const { return admissible_[static_cast<std::size_t>(i)]; }
    const std::vector<Delta> &all() const { return admissible_; }

    /// Index of delta in the admissible list, or nullopt.
    std::optional<Index> index_of(const Delta &delta) const;

private:
    Index m_ = 0;
    std::vector<Delta> admissible_;
};

/// Fixed-commutation conic program, affine in (theta, x):
///
///   minimize    c_x'x + c_theta'theta + c0
///   subject to  A_x x + A_theta theta = b
///               H_x x + H_theta theta + h in K
///
/// The objective is linear in canonical form; convex costs must have been
/// epigraph-lifted into conic rows by the template author.
struct FixedCommutationProgram {
    Index n_bar = 0; ///< decision dimension after lifting
    Index p = 0;     ///< parameter dimension

    Vec c_x;
    Vec c_theta;
    double c0 = 0.0;

    Mat A_x;
    Mat A_theta;
    Vec b;

    Mat H_x;
    Mat H_theta;
    Vec h;
    ConeSpec cone;

    void validate() const;
};

/// Vertex-representation polytope (the parameter domain Theta).
struct PolytopeV {
    Index p = 0;
    std::vector<Vec> vertices;

    void validate() const;
};

/// Outcome of one conic solve; carries V*_delta(theta) when Optimal.
struct SolveResult {
    SolveStatus status = SolveStatus::Numerical;
    double value = 0.0;
    Vec x;
    Residuals residuals;
};

/// The multiparametric MINLP (all admissible commutations plus the oracle
/// producing a conic program per commutation). Immutable once built;
/// programs for every admissible commutation are instantiated eagerly so the
/// template is safe to share between threads.
class ProblemTemplate {
public:
    Index p = 0;
    Index n = 0; ///< lifted decision dimension n_bar
    Index m = 0;
    CommutationSpace commutations;
    PolytopeV parameter_domain;
    std::string label;
    /// Decision components needed online (e.g. the first-stage input).
    std::vector<Index> output_indices;
    /// Optional closed-loop propagation hook used by the simulator:
    /// (state, controller outputs) -> next nominal state.
    std::function<Vec(const Vec &, const Vec &)> plant;

    const FixedCommutationProgram &program(Index delta_index) const;

    Index num_admissible() const { return commutations.size(); }

private:
    friend class ProblemTemplateBuilder;
    std::vector<FixedCommutationProgram> programs_;
};

class ProblemTemplateBuilder {
public:
    ProblemTemplateBuilder &label(std::string s);
    ProblemTemplateBuilder &parameter_domain(PolytopeV domain);
    ProblemTemplateBuilder &commutations(CommutationSpace cs);
    ProblemTemplateBuilder &output_indices(std::vector<Index> idx);
    ProblemTemplateBuilder &
    instantiator(std::function<FixedCommutationProgram(const Delta &)> fn);
    ProblemTemplateBuilder &plant(std::function<Vec(const Vec &, const Vec &)> fn);

    /// Validates and eagerly instantiates every admissible commutation.
    std::shared_ptr<const ProblemTemplate> build();

private:
    ProblemTemplate tmpl_;
    std::function<FixedCommutationProgram(const Delta &)> instantiator_;
};

using ProblemPtr = std::shared_ptr<const ProblemTemplate>;

/// Returns the conic program for the given commutation.
/// Throws UnknownCommutationError if delta is not admissible.
const FixedCommutationProgram &instantiate(const ProblemTemplate &tmpl,
                                           const Delta &delta);

/// Solves the fixed-commutation program at the given parameter.
SolveResult solve_conic(const FixedCommutationProgram &prog, const Vec &theta,
                        const ToleranceConfig &cfg);

/// Feasibility-only variant (zero cost).
SolveResult solve_feasibility(const FixedCommutationProgram &prog,
                              const Vec &theta, const ToleranceConfig &cfg);

struct MinlpResult {
    SolveStatus status = SolveStatus::Infeasible;
    double value = 0.0;
    Index delta_index = -1;
    Delta delta;
    Vec x;
};

/// Brute-force solve of the MINLP by enumeration over the admissible set.
/// Ties are broken by commutation order. Serves as the correctness oracle
/// for all epsilon-suboptimality tests.
/// Throws NumericalError if any fixed-commutation solve stalls.
MinlpResult solve_minlp(const ProblemTemplate &tmpl, const Vec &theta,
                        const ToleranceConfig &cfg);

/// True iff the fixed-commutation program is feasible at theta.
bool feasible_at(const ProblemTemplate &tmpl, const Delta &delta,
                 const Vec &theta, const ToleranceConfig &cfg);
bool feasible_at(const ProblemTemplate &tmpl, Index delta_index,
                 const Vec &theta, const ToleranceConfig &cfg);

/// Throws NumericalError carrying the serialized subproblem.
[[noreturn]] void throw_numerical(const char *what, const ConicProgram &prog);

} // namespace mpt
