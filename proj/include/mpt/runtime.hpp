#pragma once

#include "mpt/problem.hpp"
#include "mpt/tree.hpp"

namespace mpt {

struct EvalTimings {
    double query_s = 0.0; ///< tree descent (and convex combination)
    double solve_s = 0.0; ///< online conic solve, when one happens
    double total_s() const { return query_s + solve_s; }
};

struct SemiExplicitResult {
    Index delta_index = -1;
    Delta delta;
    Vec x;
    double value = 0.0;
    EvalTimings timings;
};

/// Semi-explicit evaluation: one tree query for the commutation followed by
/// one conic solve. Throws OutOfDomainError / NumericalError.
SemiExplicitResult eval_semi_explicit(const PartitionTree &tree,
                                      const ProblemTemplate &tmpl,
                                      const Vec &theta,
                                      const ToleranceConfig &cfg);

struct ExplicitResult {
    Delta delta;
    Vec x; ///< convex combination of the stored vertex solutions
    EvalTimings timings;
};

/// Explicit evaluation: tree query plus a convex combination of the stored
/// vertex decision vectors; no optimization happens online. Throws
/// ModeMismatchError when the tree carries no vertex solutions.
ExplicitResult eval_explicit(const PartitionTree &tree, const Vec &theta);

struct ImplicitResult {
    SolveStatus status = SolveStatus::Infeasible;
    double value = 0.0;
    Index delta_index = -1;
    Delta delta;
    Vec x;
    EvalTimings timings;
};

/// Implicit baseline: wall-clock timed brute-force enumeration.
ImplicitResult eval_implicit(const ProblemTemplate &tmpl, const Vec &theta,
                             const ToleranceConfig &cfg);

} // namespace mpt
