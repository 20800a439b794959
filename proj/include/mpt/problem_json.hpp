#pragma once

#include "mpt/problem.hpp"

#include <string>

namespace mpt {

/// Loads a problem whose per-commutation conic data is purely numeric from
/// a JSON file. Schema (all matrices row-major nested arrays):
///
/// {
///   "label": "name",
///   "p": 2, "n": 3, "m": 2,
///   "domain_vertices": [[...], ...],
///   "admissible": [[0,1], [1,0], ...],        // or "01" bit strings
///   "output_indices": [0],                    // optional, default all
///   "programs": [                             // aligned with admissible
///     {
///       "c_x": [...], "c_theta": [...], "c0": 0.0,
///       "A_x": [[...]], "A_theta": [[...]], "b": [...],   // optional
///       "H_x": [[...]], "H_theta": [[...]], "h": [...],
///       "cones": [{"type": "zero"|"nonneg"|"soc", "dim": k}, ...]
///     }, ...
///   ]
/// }
ProblemPtr load_problem_json(const std::string &path);

} // namespace mpt
