#include "mpt/phase1.hpp"

#include "mpt/conic_assembly.hpp"

#include <sstream>

namespace mpt {

std::optional<double> shoot(const ProblemTemplate &tmpl, Index delta_index,
                            const Simplex &domain, Index vertex_index,
                            const ToleranceConfig &cfg) {
    const auto &prog = tmpl.program(delta_index);
    const Vec center = domain.centroid();
    const Vec dir = domain.vertices().col(vertex_index) - center;
    ConicProgram sp = assemble_shooting(prog, center, dir);
    ConicSolver solver(cfg.solver_settings());
    SolverSolution sol = solver.solve(sp);
    switch (sol.status) {
    case SolveStatus::Optimal:
        return -sol.value; // objective was min -alpha
    case SolveStatus::Infeasible:
        return std::nullopt;
    case SolveStatus::Unbounded: // alpha is bounded; cannot happen cleanly
    case SolveStatus::Numerical:
        throw_numerical("shooting problem", sp);
    }
    return std::nullopt;
}

std::optional<Index> maxvol(const ProblemTemplate &tmpl, const Simplex &domain,
                            const ToleranceConfig &cfg,
                            std::uint64_t *shoot_count) {
    std::optional<Index> best;
    double best_score = 0.0;
    for (Index d = 0; d < tmpl.num_admissible(); ++d) {
        double score = 0.0;
        bool any_feasible = false;
        for (Index i = 0; i <= domain.p(); ++i) {
            auto a = shoot(tmpl, d, domain, i, cfg);
            if (shoot_count) ++*shoot_count;
            if (a) {
                any_feasible = true;
                score += *a;
            }
            // A single infeasible ray while others are feasible can only be
            // a marginal centroid; it contributes zero travel.
        }
        if (!any_feasible) continue; // centroid infeasible for this delta
        const double tie = std::max(1e-7, 10.0 * cfg.solver_tol) *
                           (1.0 + std::abs(best_score));
        if (!best || score > best_score + tie) {
            best = d;
            best_score = score;
        }
    }
    return best;
}

bool feasible_everywhere(const ProblemTemplate &tmpl, Index delta_index,
                         const Simplex &cell, const ToleranceConfig &cfg,
                         VertexSolutionCache &cache) {
    const auto &ids = cell.vertex_ids();
    for (std::size_t j = 0; j < ids.size(); ++j) {
        const SolveResult &r = cache.get_or_solve(
            tmpl, delta_index, ids[j], cell.vertices().col(static_cast<Index>(j)),
            cfg);
        if (r.status != SolveStatus::Optimal) return false;
    }
    return true;
}

std::unique_ptr<PartitionTree> run_phase1(const ProblemPtr &tmpl,
                                          const ToleranceConfig &cfg,
                                          VertexSolutionCache &cache) {
    auto tree = std::make_unique<PartitionTree>(tmpl->parameter_domain,
                                                cfg.geom_tol);
    tree->start_clock();
    std::uint64_t shoots = 0;

    while (tree->has_open()) {
        const NodeId id = tree->pop_open();
        const Simplex cell = *tree->node(id).simplex;

        auto delta_hat = maxvol(*tmpl, cell, cfg, &shoots);
        if (!delta_hat) {
            std::ostringstream msg;
            msg << "parameter domain not covered: centroid of cell " << id
                << " is infeasible for every admissible commutation";
            throw DomainNotCoveredError(msg.str(), cell.centroid());
        }

        if (feasible_everywhere(*tmpl, *delta_hat, cell, cfg, cache)) {
            tree->close(id, LeafPayload{LeafKind::ClosedFeasible, *delta_hat,
                                        tmpl->commutations.at(*delta_hat),
                                        Mat()});
            continue;
        }

        if (tree->node(id).depth >= cfg.max_depth)
            throw DepthExceededError("phase 1 exceeded max_depth", id,
                                     tree->node(id).depth);
        try {
            SplitResult sr = split_longest_edge(cell, tree->pool_mut(),
                                                cfg.min_cell_volume);
            tree->push_children(id, {sr.first, sr.second}, std::nullopt);
        } catch (const DegenerateChildError &e) {
            throw DepthExceededError(
                std::string("phase 1 hit the minimum cell volume: ") + e.what(),
                id, tree->node(id).depth);
        }
    }

    tree->set_mode(TreeMode::FeasibleMap);
    tree->wall_time_s = tree->elapsed_s();
    tree->solve_counts["shoot"] += shoots;
    tree->solve_counts["vertex_solve"] = cache.solve_count();
    return tree;
}

} // namespace mpt
