#include "mpt/runtime.hpp"

#include "mpt/conic_assembly.hpp"

#include <chrono>

namespace mpt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Index leaf_delta(const PartitionTree &tree, NodeId leaf,
                 const ProblemTemplate &tmpl) {
    const auto &payload = tree.node(leaf).payload;
    if (!payload || !payload->closed())
        throw ModeMismatchError("located leaf is not closed");
    if (payload->delta_index) return *payload->delta_index;
    auto idx = tmpl.commutations.index_of(payload->delta_bits);
    if (!idx)
        throw UnknownCommutationError(
            "tree leaf commutation is not admissible for this problem");
    return *idx;
}

} // namespace

SemiExplicitResult eval_semi_explicit(const PartitionTree &tree,
                                      const ProblemTemplate &tmpl,
                                      const Vec &theta,
                                      const ToleranceConfig &cfg) {
    SemiExplicitResult out;
    auto t0 = Clock::now();
    const NodeId leaf = tree.locate(theta);
    out.delta_index = leaf_delta(tree, leaf, tmpl);
    out.delta = tmpl.commutations.at(out.delta_index);
    out.timings.query_s = seconds_since(t0);

    t0 = Clock::now();
    const auto &prog = tmpl.program(out.delta_index);
    SolveResult r = solve_conic(prog, theta, cfg);
    out.timings.solve_s = seconds_since(t0);
    if (r.status == SolveStatus::Numerical)
        throw_numerical("semi-explicit online solve",
                        assemble_fixed_theta(prog, theta, false));
    if (r.status != SolveStatus::Optimal)
        throw NumericalError(
            "semi-explicit online solve infeasible inside its cell; the "
            "partition guarantees feasibility, so this indicates numerical "
            "trouble");
    out.x = r.x;
    out.value = r.value;
    return out;
}

ExplicitResult eval_explicit(const PartitionTree &tree, const Vec &theta) {
    ExplicitResult out;
    auto t0 = Clock::now();
    const NodeId leaf = tree.locate(theta);
    const TreeNode &n = tree.node(leaf);
    if (!n.payload || n.payload->kind != LeafKind::ClosedExplicit)
        throw ModeMismatchError(
            "tree was not built in explicit mode (no vertex solutions stored)");
    out.delta = n.payload->delta_bits;
    Vec alpha;
    if (n.stored_bary) {
        const Mat &B = *n.stored_bary;
        const Index p = B.rows();
        alpha.resize(p + 1);
        double sum = 0.0;
        for (Index i = 0; i < p; ++i) {
            alpha[i] = B.row(i).head(p).dot(theta) + B(i, p);
            sum += alpha[i];
        }
        alpha[p] = 1.0 - sum;
    } else {
        alpha = n.simplex->barycentric(theta).alpha;
    }
    out.x = n.payload->vertex_solutions * alpha;
    out.timings.query_s = seconds_since(t0);
    return out;
}

ImplicitResult eval_implicit(const ProblemTemplate &tmpl, const Vec &theta,
                             const ToleranceConfig &cfg) {
    ImplicitResult out;
    auto t0 = Clock::now();
    MinlpResult r = solve_minlp(tmpl, theta, cfg);
    out.timings.solve_s = seconds_since(t0);
    out.status = r.status;
    out.value = r.value;
    out.delta_index = r.delta_index;
    out.delta = r.delta;
    out.x = r.x;
    return out;
}

} // namespace mpt
