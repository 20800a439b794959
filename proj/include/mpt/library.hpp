#pragma once

#include "mpt/phase2.hpp"
#include "mpt/problem.hpp"
#include "mpt/runtime.hpp"
#include "mpt/tree.hpp"

#include "mpt/treefile.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mpt {

/// Hand-verifiable one-parameter problems.
///
/// toy_a: V*_delta(theta) = (theta - c_delta)^2 with c_0 = -0.5, c_1 = +0.5
///        on Theta = [-1, 1]; both commutations feasible everywhere.
/// toy_b: toy_a plus the cuts theta <= 0.25 (delta = 0) and theta >= -0.25
///        (delta = 1); the feasible sets overlap on [-0.25, 0.25].
ProblemPtr make_toy_a();
ProblemPtr make_toy_b();

/// toy_b on an enlarged domain [-2, 2] with both commutations additionally
/// restricted to |theta| <= 1.25, so part of the domain is infeasible and
/// Phase I must stop with DomainNotCovered.
ProblemPtr make_toy_b_wide();

/// toy_b with disjoint cuts theta <= -0.1 / theta >= 0.1: the gap
/// (-0.1, 0.1) is infeasible for both commutations, another
/// DomainNotCovered witness.
ProblemPtr make_toy_b_gap();

/// Zero-overlap construction: V*_0 = (theta + 0.5)^2 + 1 feasible
/// everywhere, V*_1 = (theta - 0.5)^2 only for theta >= -0.05. The optimal
/// cost jumps by ~0.9 at the feasibility boundary, so for tolerances below
/// the jump no single commutation is suboptimal on any neighborhood of it
/// and Phase II must split forever (NonConvergence).
ProblemPtr make_toy_c();

struct CwhParams {
    double omega0 = 0.00113; ///< orbital rate [rad/s]
    double t_sample = 100.0; ///< impulse period [s]
    int horizon = 3;
    double dv_min = 2e-5; ///< impulse-bit lower bound [m/s]
    double dv_max = 2e-3; ///< thruster upper bound [m/s]
    double terminal_weight = 1e-2;
    double domain_scale = 1.0; ///< shrinks Theta about the origin
};

/// Out-of-plane spacecraft position keeping: impulsive thrust with a
/// minimum impulse bit, handled by a per-step one-hot choice among
/// {negative band, coast, positive band}. Parameter is the state (z, zdot),
/// p = 2, m = 9, 27 admissible commutations.
ProblemPtr make_cwh(const CwhParams &params = {});

/// Zero-order hold free dynamics over one sample period:
/// x+ = A (x + (0, dv)).
std::pair<Mat, Vec> cwh_discretize(double omega0, double t_sample);

/// Builtin registry: toy_a, toy_b, toy_b_wide, toy_b_gap, toy_c, cwh.
/// Unknown names are treated as a JSON problem file path.
ProblemPtr make_builtin(const std::string &name);

/// Analytic Toy-A optimal costs (test oracles).
inline double toy_a_vstar_delta(double theta, int delta) {
    const double c = delta == 0 ? -0.5 : 0.5;
    return (theta - c) * (theta - c);
}
inline double toy_a_vstar(double theta) {
    return std::min(toy_a_vstar_delta(theta, 0), toy_a_vstar_delta(theta, 1));
}

// --------------------------------------------------------------------------
// Closed-loop simulation
// --------------------------------------------------------------------------

enum class ControllerKind { Implicit, SemiExplicit, Explicit };

struct SimulatorOptions {
    int steps = 100;
    std::uint64_t seed = 0;
    /// Uniform disturbance amplitude as a fraction of the domain half-width
    /// per axis; 0 disables the disturbance.
    double disturbance = 0.0;
    /// Per-step trajectory sink: (step, state, dv, fuel_so_far, projected).
    std::function<void(int, const Vec &, double, double, bool)> trace;
};

struct SimResult {
    double fuel = 0.0;
    int steps_run = 0;
    bool exited_domain = false; ///< some state needed projection onto Theta
    std::vector<double> dv_history;
};

/// Simulates the closed loop from x0: at each step evaluates the controller
/// at theta = state, applies the first declared output component as the
/// impulse, and propagates the dynamics with an optional bounded
/// disturbance. States that leave the domain are projected back and
/// flagged; the run continues.
SimResult simulate_closed_loop(const ProblemTemplate &tmpl,
                               const PartitionTree *tree, ControllerKind kind,
                               const Vec &x0, const ToleranceConfig &cfg,
                               const SimulatorOptions &opts);

// --------------------------------------------------------------------------
// Benchmark harness
// --------------------------------------------------------------------------

struct BenchSetting {
    double scale = 0.5; ///< s in eps_a = max V* over vertices of s*Theta
    double eps_r = 2.0;
};

struct BenchRow {
    std::string mode;
    double eps_a = 0.0;
    double eps_r = 0.0;
    int tau = 0;
    std::uint64_t lambda = 0;
    double t_solve_s = 0.0;
    double t_query_median_us = 0.0;
    double t_query_min_us = 0.0;
    double t_query_max_us = 0.0;
    std::uint64_t bytes = 0;
};

struct BenchOptions {
    std::vector<BenchSetting> settings;
    int queries = 200;
    std::uint64_t seed = 0;
    int workers = 1;
    int max_depth = 40;
    /// Shrink factor applied to the domain every time Phase I reports
    /// DomainNotCovered (recorded in the row label); 0 disables retries.
    double shrink_on_uncovered = 0.0;
    std::function<ProblemPtr(double domain_scale)> problem_factory;
    std::string progress_csv_prefix; ///< when set, per-run CSVs are written
};

/// The per-epsilon sweep: for each setting computes eps_a by the scaled
/// vertex rule, partitions in both modes, and measures query times against
/// the implicit baseline.
std::vector<BenchRow> bench_sweep(const BenchOptions &opts);

/// eps_a = max over the vertices of s*Theta of V*(theta).
double eps_a_from_scaled_domain(const ProblemTemplate &tmpl, double s,
                                const ToleranceConfig &cfg);

/// Phase I + Phase II with an optional progress CSV (written during the
/// refinement phase).
std::unique_ptr<PartitionTree> run_partition(const ProblemPtr &tmpl,
                                             const RefineConfig &cfg,
                                             const std::string &progress_csv = "");

/// Serialization metadata for a tree built against this template.
TreeFileMeta make_meta(const PartitionTree &tree, const ProblemTemplate &tmpl);

} // namespace mpt
