#pragma once

#include "mpt/problem.hpp"
#include "mpt/tree.hpp"

#include <memory>
#include <optional>
#include <variant>

namespace mpt {

enum class RefineMode { SemiExplicit, Explicit };

struct RefineConfig {
    RefineMode mode = RefineMode::SemiExplicit;
    ToleranceConfig tolerances;
    int parallel_workers = 1;
    /// Experimental switch: evaluate the variability test on the candidate
    /// commutation instead of the cell's current one.
    bool variability_on_candidate = false;
};

/// Affine over-approximator of V*_delta over a cell: the interpolation of
/// the vertex optimal costs. Upper-bounds V*_delta by convexity, with
/// equality at the vertices.
struct OverApprox {
    Index delta_index = -1;
    Vec vertex_values; ///< aligned with the cell's canonical vertex order

    double eval(const Simplex &cell, const Vec &theta) const {
        return cell.barycentric(theta).alpha.dot(vertex_values);
    }
};

/// Per-cell evaluation context. Memoizes the commutation-independent
/// subproblems (per-commutation feasibility on the cell and minima over the
/// cell) so that the error bound, the commutation selection and the
/// variability check share solves.
class CellContext {
public:
    CellContext(const ProblemTemplate &tmpl, Simplex cell,
                const ToleranceConfig &cfg, VertexSolutionCache &cache);

    const Simplex &cell() const { return cell_; }
    const ProblemTemplate &tmpl() const { return tmpl_; }
    const ToleranceConfig &cfg() const { return cfg_; }

    /// V*_delta at the cell vertices (through the shared cache).
    const SolveResult &vertex_solution(Index delta_index, Index vertex_pos);
    bool feasible_everywhere(Index delta_index);

    /// min over theta in the cell of V*_delta(theta); nullopt if the cell
    /// does not intersect the feasible set of delta.
    std::optional<double> min_over_cell(Index delta_index);

    /// max over theta in the cell, x' feasible for delta', of
    /// Vbar_delta(theta) - f(theta, x', delta'); nullopt when infeasible
    /// (the cell misses Theta*_{delta'}). Also reports the maximizing theta.
    struct MaxGap {
        double value;
        Vec theta;
    };
    std::optional<MaxGap> max_gap(const OverApprox &bar, Index delta_prime);

    std::uint64_t solve_count() const { return solves_; }

private:
    const ProblemTemplate &tmpl_;
    Simplex cell_;
    const ToleranceConfig &cfg_;
    VertexSolutionCache &cache_;
    std::vector<std::optional<bool>> feas_;
    std::vector<std::optional<std::optional<double>>> min_;
    std::vector<std::optional<std::optional<MaxGap>>> gap_;
    Index gap_tag_ = -1;
    std::uint64_t solves_ = 0;
};

OverApprox build_over_approx(CellContext &ctx, Index delta_index);

struct AbsErrorBound {
    double e_bar_a = 0.0;
    Vec witness_theta;
    Index witness_delta = -1;
};
struct AllOthersInfeasible {};

/// Tractable absolute error bound over the cell: enumerates the comparison
/// set (all other commutations in semi-explicit mode; every commutation
/// including delta itself in explicit mode) and maximizes the gap between
/// the over-approximator and the competitor cost.
std::variant<AbsErrorBound, AllOthersInfeasible>
abs_error_bound(CellContext &ctx, const OverApprox &bar, RefineMode mode);

/// Denominator of the relative error bound; nullopt when undefined (no
/// qualifying competitor, or the minimum is at or below the configured
/// floor).
std::optional<double> rel_error_denominator(CellContext &ctx,
                                            Index delta_index,
                                            RefineMode mode);

struct CheckClose {
    double e_bar_a = 0.0;
    bool only_feasible = false;
};
struct CheckNeedsWork {
    double e_bar_a = 0.0;
    std::optional<double> d_min;
};
using CheckOutcome = std::variant<CheckClose, CheckNeedsWork>;

CheckOutcome check_cell(CellContext &ctx, const OverApprox &bar,
                        RefineMode mode);

/// Commutation improvement: among commutations feasible on the whole cell,
/// returns the one against which the current choice is most suboptimal,
/// provided that gap clears the epsilon threshold.
std::optional<Index> better_delta(CellContext &ctx, const OverApprox &bar);

/// Variability test (the curvature check): true when V*_delta varies over
/// the cell by less than the suboptimality threshold.
bool variability_holds(CellContext &ctx, Index delta_index);

/// Diagnostic from the depth analysis: ceil(p(p+1) log2(l0/psi) / 2).
int depth_prediction(double l0, double psi, int p);

/// Algorithm core: refines the Phase I tree until every leaf carries an
/// epsilon-suboptimal commutation (and, in explicit mode, the vertex
/// decision vectors). Throws NonConvergenceError when the depth or volume
/// safeguard trips, which indicates a zero overlap or tolerances that are
/// too tight.
void run_phase2(PartitionTree &tree, const ProblemPtr &tmpl,
                const RefineConfig &cfg, VertexSolutionCache &cache);

} // namespace mpt
