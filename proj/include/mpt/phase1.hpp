#pragma once

#include "mpt/problem.hpp"
#include "mpt/tree.hpp"

#include <memory>
#include <optional>

namespace mpt {

/// Maximum feasible travel along the ray from the centroid of D toward its
/// i-th vertex: one conic program over (x, alpha) with theta eliminated by
/// substitution. Returns nullopt when the program is infeasible (the
/// centroid itself is infeasible for this commutation).
std::optional<double> shoot(const ProblemTemplate &tmpl, Index delta_index,
                            const Simplex &domain, Index vertex_index,
                            const ToleranceConfig &cfg);

/// Max-volume commutation heuristic: sums the shooting travel over all
/// centroid-vertex rays and returns the best commutation (ties broken by
/// commutation order). Returns nullopt iff every commutation has an
/// infeasible centroid.
std::optional<Index> maxvol(const ProblemTemplate &tmpl, const Simplex &domain,
                            const ToleranceConfig &cfg,
                            std::uint64_t *shoot_count = nullptr);

/// Vertex containment test: true iff the fixed-commutation program is
/// feasible at all p+1 vertices, which certifies R subset of Theta*_delta
/// by convexity of the feasible parameter set.
bool feasible_everywhere(const ProblemTemplate &tmpl, Index delta_index,
                         const Simplex &cell, const ToleranceConfig &cfg,
                         VertexSolutionCache &cache);

/// Phase I: computes the feasible map as a coarse partition. Every leaf of
/// the returned tree is ClosedFeasible with a commutation feasible on the
/// whole cell. Throws DomainNotCoveredError when some cell's centroid is
/// infeasible for every admissible commutation, and DepthExceededError when
/// the depth or volume safeguard trips.
std::unique_ptr<PartitionTree> run_phase1(const ProblemPtr &tmpl,
                                          const ToleranceConfig &cfg,
                                          VertexSolutionCache &cache);

} // namespace mpt
