#include "mpt/phase2.hpp"

#include "mpt/conic_assembly.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <future>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace mpt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// --------------------------------------------------------------------------
// CellContext
// --------------------------------------------------------------------------

CellContext::CellContext(const ProblemTemplate &tmpl, Simplex cell,
                         const ToleranceConfig &cfg, VertexSolutionCache &cache)
    : tmpl_(tmpl), cell_(std::move(cell)), cfg_(cfg), cache_(cache) {
    feas_.resize(static_cast<std::size_t>(tmpl.num_admissible()));
    min_.resize(static_cast<std::size_t>(tmpl.num_admissible()));
    gap_.resize(static_cast<std::size_t>(tmpl.num_admissible()));
}

const SolveResult &CellContext::vertex_solution(Index delta_index,
                                                Index vertex_pos) {
    const VertexId id =
        cell_.vertex_ids()[static_cast<std::size_t>(vertex_pos)];
    return cache_.get_or_solve(tmpl_, delta_index, id,
                               cell_.vertices().col(vertex_pos), cfg_);
}

bool CellContext::feasible_everywhere(Index delta_index) {
    auto &memo = feas_[static_cast<std::size_t>(delta_index)];
    if (!memo) {
        bool ok = true;
        for (Index j = 0; j <= cell_.p(); ++j)
            if (vertex_solution(delta_index, j).status != SolveStatus::Optimal) {
                ok = false;
                break;
            }
        memo = ok;
    }
    return *memo;
}

std::optional<double> CellContext::min_over_cell(Index delta_index) {
    auto &memo = min_[static_cast<std::size_t>(delta_index)];
    if (!memo) {
        const auto &prog = tmpl_.program(delta_index);
        ConicProgram sp =
            assemble_over_simplex(prog, cell_.vertices(), Vec::Zero(cell_.p() + 1));
        ConicSolver solver(cfg_.solver_settings());
        SolverSolution sol = solver.solve(sp);
        ++solves_;
        switch (sol.status) {
        case SolveStatus::Optimal:
            memo = std::optional<double>(sol.value + prog.c0);
            break;
        case SolveStatus::Infeasible:
            memo = std::optional<double>(std::nullopt);
            break;
        case SolveStatus::Unbounded:
        case SolveStatus::Numerical:
            throw_numerical("cell minimum", sp);
        }
    }
    return *memo;
}

std::optional<CellContext::MaxGap> CellContext::max_gap(const OverApprox &bar,
                                                        Index delta_prime) {
    if (gap_tag_ != bar.delta_index) {
        gap_.assign(gap_.size(), std::nullopt);
        gap_tag_ = bar.delta_index;
    }
    auto &memo = gap_[static_cast<std::size_t>(delta_prime)];
    if (!memo) {
        const auto &prog = tmpl_.program(delta_prime);
        // max Vbar(theta) - f(theta, x', delta')
        //   = -min [ c_x'x' + (V'c_theta - w)'alpha ] - c0
        ConicProgram sp =
            assemble_over_simplex(prog, cell_.vertices(), -bar.vertex_values);
        ConicSolver solver(cfg_.solver_settings());
        SolverSolution sol = solver.solve(sp);
        ++solves_;
        switch (sol.status) {
        case SolveStatus::Optimal: {
            MaxGap g;
            g.value = -sol.value - prog.c0;
            const Index p1 = cell_.p() + 1;
            g.theta = cell_.vertices() * sol.x.tail(p1);
            memo = std::optional<MaxGap>(std::move(g));
            break;
        }
        case SolveStatus::Infeasible:
            memo = std::optional<MaxGap>(std::nullopt);
            break;
        case SolveStatus::Unbounded:
        case SolveStatus::Numerical:
            throw_numerical("error bound subproblem", sp);
        }
    }
    return *memo;
}

// --------------------------------------------------------------------------
// Operations
// --------------------------------------------------------------------------

OverApprox build_over_approx(CellContext &ctx, Index delta_index) {
    const Index p1 = ctx.cell().p() + 1;
    OverApprox bar;
    bar.delta_index = delta_index;
    bar.vertex_values.resize(p1);
    for (Index j = 0; j < p1; ++j) {
        const SolveResult &r = ctx.vertex_solution(delta_index, j);
        if (r.status != SolveStatus::Optimal)
            throw VertexInfeasibleError(
                "over-approximator requires feasibility at every cell vertex");
        bar.vertex_values[j] = r.value;
    }
    return bar;
}

std::variant<AbsErrorBound, AllOthersInfeasible>
abs_error_bound(CellContext &ctx, const OverApprox &bar, RefineMode mode) {
    AbsErrorBound out;
    out.e_bar_a = -kInf;
    bool any = false;
    for (Index dp = 0; dp < ctx.tmpl().num_admissible(); ++dp) {
        if (mode == RefineMode::SemiExplicit && dp == bar.delta_index) continue;
        auto g = ctx.max_gap(bar, dp);
        if (!g) continue;
        any = true;
        if (g->value > out.e_bar_a) {
            out.e_bar_a = g->value;
            out.witness_theta = g->theta;
            out.witness_delta = dp;
        }
    }
    if (!any) {
        if (mode == RefineMode::Explicit)
            throw Error("cell has no feasible commutation in its comparison set");
        return AllOthersInfeasible{};
    }
    return out;
}

std::optional<double> rel_error_denominator(CellContext &ctx,
                                            Index delta_index,
                                            RefineMode mode) {
    double best = kInf;
    bool any = false;
    for (Index dp = 0; dp < ctx.tmpl().num_admissible(); ++dp) {
        if (mode == RefineMode::SemiExplicit && dp == delta_index) continue;
        auto m = ctx.min_over_cell(dp);
        if (!m) continue;
        any = true;
        best = std::min(best, *m);
    }
    if (!any || best <= ctx.cfg().rel_denominator_floor) return std::nullopt;
    return best;
}

CheckOutcome check_cell(CellContext &ctx, const OverApprox &bar,
                        RefineMode mode) {
    const ToleranceConfig &tol = ctx.cfg();
    auto ab = abs_error_bound(ctx, bar, mode);
    if (std::holds_alternative<AllOthersInfeasible>(ab))
        return CheckClose{0.0, true};
    const double e = std::get<AbsErrorBound>(ab).e_bar_a;
    if (e <= tol.eps_a) return CheckClose{e, false};
    std::optional<double> dmin;
    if (tol.eps_r > 0.0) {
        dmin = rel_error_denominator(ctx, bar.delta_index, mode);
        if (dmin && e <= tol.eps_r * *dmin) return CheckClose{e, false};
    }
    return CheckNeedsWork{e, dmin};
}

std::optional<Index> better_delta(CellContext &ctx, const OverApprox &bar) {
    const ToleranceConfig &tol = ctx.cfg();
    double threshold = tol.eps_a;
    if (tol.eps_r > 0.0) {
        auto dmin =
            rel_error_denominator(ctx, bar.delta_index, RefineMode::SemiExplicit);
        if (dmin) threshold = std::max(threshold, tol.eps_r * *dmin);
    }
    std::optional<Index> best;
    double best_gap = -kInf;
    for (Index dp = 0; dp < ctx.tmpl().num_admissible(); ++dp) {
        if (dp == bar.delta_index) continue;
        if (!ctx.feasible_everywhere(dp)) continue;
        auto g = ctx.max_gap(bar, dp);
        if (!g) continue;
        if (g->value > best_gap) {
            best = dp;
            best_gap = g->value;
        }
    }
    if (best && best_gap >= threshold) return best;
    return std::nullopt;
}

bool variability_holds(CellContext &ctx, Index delta_index) {
    const ToleranceConfig &tol = ctx.cfg();
    double vmax = -kInf;
    for (Index j = 0; j <= ctx.cell().p(); ++j) {
        const SolveResult &r = ctx.vertex_solution(delta_index, j);
        if (r.status != SolveStatus::Optimal)
            throw VertexInfeasibleError(
                "variability check requires feasibility on the whole cell");
        vmax = std::max(vmax, r.value);
    }
    auto vmin = ctx.min_over_cell(delta_index);
    if (!vmin)
        throw VertexInfeasibleError(
            "variability check on a commutation infeasible in the cell");
    double rhs = tol.eps_a;
    if (tol.eps_r > 0.0) {
        double vstar = kInf;
        bool any = false;
        for (Index dp = 0; dp < ctx.tmpl().num_admissible(); ++dp) {
            auto m = ctx.min_over_cell(dp);
            if (!m) continue;
            any = true;
            vstar = std::min(vstar, *m);
        }
        if (any) rhs = std::max(rhs, tol.eps_r * vstar);
    }
    return (vmax - *vmin) < rhs;
}

int depth_prediction(double l0, double psi, int p) {
    if (l0 <= 0.0 || psi <= 0.0)
        throw InvalidArgumentError("depth_prediction requires l0, psi > 0");
    const double v = 0.5 * p * (p + 1) * std::log2(l0 / psi);
    return static_cast<int>(std::ceil(v - 1e-12));
}

// --------------------------------------------------------------------------
// Algorithm driver
// --------------------------------------------------------------------------

namespace {

struct CellAction {
    enum class Kind : std::uint8_t { Close, Reassign, Split } kind;
    Index delta = -1; ///< close: closing commutation; reassign: new
                      ///< commutation; split: commutation for both children
    double e_bar_a = 0.0;
    bool only_feasible = false;
    std::uint64_t solves = 0;
};

CellAction evaluate_cell(const ProblemTemplate &tmpl, const Simplex &cell,
                         Index delta, const RefineConfig &rcfg,
                         VertexSolutionCache &cache) {
    CellContext ctx(tmpl, cell, rcfg.tolerances, cache);
    OverApprox bar = build_over_approx(ctx, delta);
    CheckOutcome outcome = check_cell(ctx, bar, rcfg.mode);
    CellAction act;
    act.solves = ctx.solve_count();
    if (const auto *cl = std::get_if<CheckClose>(&outcome)) {
        act.kind = CellAction::Kind::Close;
        act.delta = delta;
        act.e_bar_a = cl->e_bar_a;
        act.only_feasible = cl->only_feasible;
        act.solves = ctx.solve_count();
        return act;
    }
    act.e_bar_a = std::get<CheckNeedsWork>(outcome).e_bar_a;
    auto dstar = better_delta(ctx, bar);
    if (dstar) {
        const Index vdelta = rcfg.variability_on_candidate ? *dstar : delta;
        if (variability_holds(ctx, vdelta)) {
            act.kind = CellAction::Kind::Reassign;
            act.delta = *dstar;
        } else {
            act.kind = CellAction::Kind::Split;
            act.delta = *dstar;
        }
    } else {
        act.kind = CellAction::Kind::Split;
        act.delta = delta;
    }
    act.solves = ctx.solve_count();
    return act;
}

class ThreadPool {
public:
    explicit ThreadPool(int n) {
        for (int i = 0; i < n; ++i)
            workers_.emplace_back([this] { run(); });
    }
    ~ThreadPool() {
        {
            std::lock_guard lock(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto &t : workers_) t.join();
    }
    void submit(std::function<void()> task) {
        {
            std::lock_guard lock(mu_);
            queue_.push_back(std::move(task));
        }
        cv_.notify_one();
    }

private:
    void run() {
        for (;;) {
            std::function<void()> task;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
                if (stop_ && queue_.empty()) return;
                task = std::move(queue_.front());
                queue_.pop_front();
            }
            task();
        }
    }
    std::vector<std::thread> workers_;
    std::deque<std::function<void()>> queue_;
    std::mutex mu_;
    std::condition_variable cv_;
    bool stop_ = false;
};

LeafPayload make_close_payload(const PartitionTree &tree, NodeId id,
                               Index delta, const ProblemTemplate &tmpl,
                               const RefineConfig &rcfg,
                               VertexSolutionCache &cache) {
    const Simplex &cell = *tree.node(id).simplex;
    const Delta &bits = tmpl.commutations.at(delta);
    if (rcfg.mode == RefineMode::SemiExplicit)
        return LeafPayload{LeafKind::ClosedSubopt, delta, bits, Mat()};
    const Index p1 = cell.p() + 1;
    Mat xs(tmpl.n, p1);
    for (Index j = 0; j < p1; ++j) {
        const SolveResult &r =
            cache.get_or_solve(tmpl, delta, cell.vertex_ids()[static_cast<std::size_t>(j)],
                               cell.vertices().col(j), rcfg.tolerances);
        if (r.status != SolveStatus::Optimal || r.x.size() != tmpl.n)
            throw VertexInfeasibleError(
                "explicit payload requires optimal vertex solutions");
        xs.col(j) = r.x;
    }
    return LeafPayload{LeafKind::ClosedExplicit, delta, bits, std::move(xs)};
}

} // namespace

void run_phase2(PartitionTree &tree, const ProblemPtr &tmpl,
                const RefineConfig &rcfg, VertexSolutionCache &cache) {
    rcfg.tolerances.validate_for_refine();
    const ToleranceConfig &tol = rcfg.tolerances;

    tree.reopen_all_leaves();
    tree.start_clock();
    std::uint64_t cell_solves = 0;

    auto commit = [&](NodeId id, const CellAction &act) {
        cell_solves += act.solves;
        switch (act.kind) {
        case CellAction::Kind::Close:
            tree.close(id, make_close_payload(tree, id, act.delta, *tmpl, rcfg,
                                              cache));
            break;
        case CellAction::Kind::Reassign:
            tree.reassign(id, act.delta);
            break;
        case CellAction::Kind::Split: {
            const TreeNode &n = tree.node(id);
            if (n.depth >= tol.max_depth) {
                std::ostringstream msg;
                msg << "phase 2 did not converge: cell " << id << " at depth "
                    << n.depth << " (diameter " << n.simplex->diameter()
                    << ") still needs subdivision; the cost overlap is likely "
                       "zero or the tolerances too tight";
                throw NonConvergenceError(msg.str(), id, n.depth,
                                          n.simplex->diameter());
            }
            try {
                SplitResult sr = split_longest_edge(*n.simplex, tree.pool_mut(),
                                                    tol.min_cell_volume);
                tree.push_children(id, {sr.first, sr.second}, act.delta);
            } catch (const DegenerateChildError &e) {
                throw NonConvergenceError(
                    std::string("phase 2 hit the minimum cell volume: ") +
                        e.what(),
                    id, n.depth, n.simplex->diameter());
            }
            break;
        }
        }
    };

    auto current_delta = [&](NodeId id) {
        const auto &payload = tree.node(id).payload;
        if (!payload || !payload->delta_index)
            throw Error("phase 2 popped a leaf without a working commutation");
        return *payload->delta_index;
    };

    if (rcfg.parallel_workers <= 1) {
        while (tree.has_open()) {
            const NodeId id = tree.pop_open();
            const Index delta = current_delta(id);
            CellAction act =
                evaluate_cell(*tmpl, *tree.node(id).simplex, delta, rcfg, cache);
            commit(id, act);
        }
    } else {
        // Speculative parallel map over open leaves. Actions depend only on
        // the leaf snapshot, so evaluating deeper stack entries early cannot
        // change the result; commits happen in strict LIFO order, which makes
        // the final tree identical to the serial one.
        ThreadPool pool(rcfg.parallel_workers);
        struct KeyHash {
            std::size_t operator()(const std::pair<NodeId, Index> &k) const {
                return std::hash<std::uint64_t>()(
                    (static_cast<std::uint64_t>(k.first) << 20) ^
                    static_cast<std::uint64_t>(k.second));
            }
        };
        std::unordered_map<std::pair<NodeId, Index>,
                           std::shared_future<CellAction>, KeyHash>
            scheduled;

        auto schedule = [&](NodeId id, Index delta) {
            const auto key = std::make_pair(id, delta);
            if (scheduled.count(key)) return;
            Simplex cell = *tree.node(id).simplex;
            auto task = std::make_shared<std::packaged_task<CellAction()>>(
                [cell = std::move(cell), delta, &tmpl, &rcfg, &cache] {
                    return evaluate_cell(*tmpl, cell, delta, rcfg, cache);
                });
            scheduled.emplace(key, task->get_future().share());
            pool.submit([task] { (*task)(); });
        };

        const std::size_t lookahead =
            static_cast<std::size_t>(rcfg.parallel_workers) * 2;
        while (tree.has_open()) {
            for (NodeId pid : tree.peek_open(lookahead))
                schedule(pid, current_delta(pid));
            const NodeId id = tree.pop_open();
            const Index delta = current_delta(id);
            const auto key = std::make_pair(id, delta);
            auto it = scheduled.find(key);
            CellAction act;
            if (it != scheduled.end()) {
                act = it->second.get();
                scheduled.erase(it);
            } else {
                act = evaluate_cell(*tmpl, *tree.node(id).simplex, delta, rcfg,
                                    cache);
            }
            commit(id, act);
        }
    }

    tree.set_mode(rcfg.mode == RefineMode::Explicit ? TreeMode::Explicit
                                                    : TreeMode::SemiExplicit);
    tree.wall_time_s = tree.elapsed_s();
    tree.solve_counts["cell_subproblem"] += cell_solves;
    tree.solve_counts["vertex_solve"] = cache.solve_count();
}

} // namespace mpt
