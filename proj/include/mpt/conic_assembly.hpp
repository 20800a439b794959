#pragma once

#include "mpt/problem.hpp"
#include "mpt/solver.hpp"

namespace mpt {

/// Builders translating fixed-commutation data into solver canonical form.
/// Zero-cone rows are folded into the equality block; NonNeg rows are
/// gathered in front of the SOC blocks as the solver requires.

/// theta substituted by a constant. The returned program's optimal value
/// excludes the affine cost offset c_theta'theta + c0.
ConicProgram assemble_fixed_theta(const FixedCommutationProgram &prog,
                                  const Vec &theta, bool zero_cost);

/// Variables (x, alpha) with theta = V*alpha restricted to the simplex
/// co{columns of V}: sum(alpha) = 1, alpha >= 0. The objective is
/// c_x'x + (V'c_theta + alpha_cost_extra)'alpha; the constant c0 is again
/// excluded.
ConicProgram assemble_over_simplex(const FixedCommutationProgram &prog,
                                   const Mat &V, const Vec &alpha_cost_extra);

/// Shooting program: variables (x, a), theta = center + a*dir, a in [0,1],
/// objective max a (encoded as min -a).
ConicProgram assemble_shooting(const FixedCommutationProgram &prog,
                               const Vec &center, const Vec &dir);

} // namespace mpt
