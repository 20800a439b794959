#pragma once

#include "mpt/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mpt {

enum class ConeKind { Zero, NonNeg, SecondOrder };

struct ConeBlock {
    ConeKind kind;
    Index dim;
};

/// Cartesian product of cones, in block order. Total dimension is the sum
/// of the block dimensions.
struct ConeSpec {
    std::vector<ConeBlock> blocks;

    Index dim() const;
    void validate() const;
};

/// Conic program in solver canonical form:
///
///   minimize    c'v
///   subject to  A v = b
///               G v + s = h,  s in K
///
/// where K = NonNeg(nonneg) x SOC(soc[0]) x ... x SOC(soc.back()).
/// Zero-cone rows must already have been folded into (A, b).
struct ConicProgram {
    Vec c;
    Mat A;
    Vec b;
    Mat G;
    Vec h;
    Index nonneg = 0;
    std::vector<Index> soc;

    Index num_vars() const { return c.size(); }
    Index num_eq() const { return b.size(); }
    Index cone_dim() const { return h.size(); }
    void validate() const;
    std::string to_json() const;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, Numerical };

const char *to_string(SolveStatus s);

struct Residuals {
    double primal_eq = 0.0;
    double cone_dist = 0.0;
    double duality_gap = 0.0;
};

struct SolverSolution {
    SolveStatus status = SolveStatus::Numerical;
    double value = 0.0; ///< c'x when Optimal
    Vec x;
    Vec y; ///< equality duals
    Vec z; ///< cone duals
    Residuals residuals;
    int iterations = 0;
};

struct SolverSettings {
    double tol = 1e-9;       ///< feasibility tolerance (relative)
    double tol_gap = 1e-9;   ///< absolute complementarity gap tolerance
    double tol_relgap = 1e-10;
    int max_iters = 100;
    double min_step = 1e-10; ///< stall threshold on the step length
    double static_reg = 1e-10;
    int refine_steps = 2;
};

/// Primal-dual interior-point solver on the homogeneous self-dual
/// embedding, with Nesterov-Todd scaling and Mehrotra correction.
/// A solver instance owns its workspace: it is cheap to construct and
/// single-threaded; use one instance per thread for concurrent solves.
class ConicSolver {
public:
    explicit ConicSolver(SolverSettings settings = {});

    SolverSolution solve(const ConicProgram &prog);

    const SolverSettings &settings() const { return settings_; }

private:
    SolverSettings settings_;
};

} // namespace mpt
