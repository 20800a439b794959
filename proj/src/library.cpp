#include "mpt/library.hpp"

#include "mpt/phase1.hpp"
#include "mpt/problem_json.hpp"

#include <array>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

namespace mpt {

namespace {

struct Cut {
    double sign; ///< sign * theta <= rhs
    double rhs;
};

// min t s.t. t >= (theta - center)^2 + c0, optional linear cuts on theta.
// The square is lifted through the rotated-cone identity
// (t+1, 2(theta-c), t-1) in SOC(3).
FixedCommutationProgram parabola_program(double center, double c0,
                                         const std::vector<Cut> &cuts) {
    FixedCommutationProgram prog;
    prog.n_bar = 1;
    prog.p = 1;
    prog.c_x = Vec::Ones(1);
    prog.c_theta = Vec::Zero(1);
    prog.c0 = c0;
    prog.A_x = Mat::Zero(0, 1);
    prog.A_theta = Mat::Zero(0, 1);
    prog.b = Vec::Zero(0);
    const Index rows = static_cast<Index>(cuts.size()) + 3;
    prog.H_x = Mat::Zero(rows, 1);
    prog.H_theta = Mat::Zero(rows, 1);
    prog.h = Vec::Zero(rows);
    Index at = 0;
    for (const Cut &cut : cuts) {
        prog.H_theta(at, 0) = -cut.sign;
        prog.h[at] = cut.rhs;
        ++at;
    }
    if (!cuts.empty())
        prog.cone.blocks.push_back(
            {ConeKind::NonNeg, static_cast<Index>(cuts.size())});
    prog.H_x(at, 0) = 1.0;
    prog.h[at] = 1.0;
    prog.H_theta(at + 1, 0) = 2.0;
    prog.h[at + 1] = -2.0 * center;
    prog.H_x(at + 2, 0) = 1.0;
    prog.h[at + 2] = -1.0;
    prog.cone.blocks.push_back({ConeKind::SecondOrder, 3});
    return prog;
}

PolytopeV segment(double lo, double hi) {
    PolytopeV d;
    d.p = 1;
    d.vertices = {Vec::Constant(1, lo), Vec::Constant(1, hi)};
    return d;
}

ProblemPtr build_two_parabola(const std::string &label, double lo, double hi,
                              std::vector<Cut> cuts0, std::vector<Cut> cuts1,
                              double c0_0 = 0.0, double c0_1 = 0.0) {
    ProblemTemplateBuilder b;
    b.label(label)
        .parameter_domain(segment(lo, hi))
        .commutations(CommutationSpace(1, {{0}, {1}}))
        .output_indices({0})
        .instantiator([=](const Delta &d) {
            if (d[0] == 0) return parabola_program(-0.5, c0_0, cuts0);
            return parabola_program(0.5, c0_1, cuts1);
        });
    return b.build();
}

} // namespace

ProblemPtr make_toy_a() {
    return build_two_parabola("toy_a", -1.0, 1.0, {}, {});
}

ProblemPtr make_toy_b() {
    return build_two_parabola("toy_b", -1.0, 1.0, {{+1.0, 0.25}},
                              {{-1.0, 0.25}});
}

ProblemPtr make_toy_b_wide() {
    return build_two_parabola("toy_b_wide", -2.0, 2.0,
                              {{+1.0, 0.25}, {+1.0, 1.25}, {-1.0, 1.25}},
                              {{-1.0, 0.25}, {+1.0, 1.25}, {-1.0, 1.25}});
}

ProblemPtr make_toy_b_gap() {
    return build_two_parabola("toy_b_gap", -1.0, 1.0, {{+1.0, -0.1}},
                              {{-1.0, -0.1}});
}

ProblemPtr make_toy_c() {
    return build_two_parabola("toy_c", -1.0, 1.0, {}, {{-1.0, 0.05}}, 1.0, 0.0);
}

std::pair<Mat, Vec> cwh_discretize(double omega0, double t_sample) {
    if (omega0 <= 0.0 || t_sample <= 0.0)
        throw InvalidArgumentError("cwh_discretize requires positive rates");
    const double wt = omega0 * t_sample;
    Mat A(2, 2);
    A << std::cos(wt), std::sin(wt) / omega0, -omega0 * std::sin(wt),
        std::cos(wt);
    Vec b = A.col(1); // impulse adds dv to the velocity before the coast
    return {A, b};
}

ProblemPtr make_cwh(const CwhParams &params) {
    const int N = params.horizon;
    if (N < 1) throw InvalidArgumentError("cwh horizon must be >= 1");
    const auto [A, aB] = cwh_discretize(params.omega0, params.t_sample);
    const double zmax = 0.10 * params.domain_scale;
    const double vmax = 0.001 * params.domain_scale;

    // One-hot per-step choice among {negative band, coast, positive band}.
    std::vector<Delta> admissible;
    const int m = 3 * N;
    std::vector<int> digits(static_cast<std::size_t>(N), 0);
    for (;;) {
        Delta d(static_cast<std::size_t>(m), 0);
        for (int k = 0; k < N; ++k)
            d[static_cast<std::size_t>(3 * k + digits[static_cast<std::size_t>(k)])] = 1;
        admissible.push_back(d);
        int k = N - 1;
        while (k >= 0 && digits[static_cast<std::size_t>(k)] == 2) {
            digits[static_cast<std::size_t>(k)] = 0;
            --k;
        }
        if (k < 0) break;
        ++digits[static_cast<std::size_t>(k)];
    }

    PolytopeV domain;
    domain.p = 2;
    for (double z : {-zmax, zmax})
        for (double v : {-vmax, vmax}) {
            Vec c(2);
            c << z, v;
            domain.vertices.push_back(c);
        }

    // Variable layout: dv_k (N), states x_1..x_N (2N), |dv| slacks (N),
    // terminal norm epigraph (1).
    const Index n = 4 * N + 1;
    auto dv_at = [](int k) { return static_cast<Index>(k); };
    auto state_at = [N](int k) { return static_cast<Index>(N + 2 * k); };
    auto slack_at = [N](int k) { return static_cast<Index>(3 * N + k); };
    const Index t_at = static_cast<Index>(4 * N);

    const double dv_lo = params.dv_min, dv_hi = params.dv_max;
    const double eta = params.terminal_weight;

    auto instantiate_cwh = [=](const Delta &delta) {
        FixedCommutationProgram prog;
        prog.n_bar = n;
        prog.p = 2;
        prog.c_x = Vec::Zero(n);
        for (int k = 0; k < N; ++k) prog.c_x[slack_at(k)] = 1.0;
        prog.c_x[t_at] = eta;
        prog.c_theta = Vec::Zero(2);
        prog.c0 = 0.0;

        // Dynamics: x_{k+1} = A (x_k + (0, dv_k)), x_0 = theta.
        prog.A_x = Mat::Zero(2 * N, n);
        prog.A_theta = Mat::Zero(2 * N, 2);
        prog.b = Vec::Zero(2 * N);
        for (int k = 0; k < N; ++k) {
            prog.A_x.block(2 * k, state_at(k), 2, 2) = Mat::Identity(2, 2);
            prog.A_x.block(2 * k, dv_at(k), 2, 1) = -aB;
            if (k == 0)
                prog.A_theta.topRows(2) = -A;
            else
                prog.A_x.block(2 * k, state_at(k - 1), 2, 2) = -A;
        }

        // Cone rows: per-step input choice, state boxes, |dv| epigraph,
        // terminal SOC.
        struct Row {
            Index var;
            double coef;
            double cst;
        };
        std::vector<Row> nn_rows;
        Index zero_rows = 0;
        std::vector<Row> zero_list;
        for (int k = 0; k < N; ++k) {
            const bool neg = delta[static_cast<std::size_t>(3 * k)] == 1;
            const bool coast = delta[static_cast<std::size_t>(3 * k + 1)] == 1;
            const bool pos = delta[static_cast<std::size_t>(3 * k + 2)] == 1;
            if (static_cast<int>(neg) + static_cast<int>(coast) +
                    static_cast<int>(pos) !=
                1)
                throw UnknownCommutationError(
                    "cwh commutation is not one-hot per step");
            if (coast) {
                zero_list.push_back({dv_at(k), 1.0, 0.0});
                ++zero_rows;
            } else if (neg) {
                nn_rows.push_back({dv_at(k), -1.0, -dv_lo}); // -dv - lo >= 0
                nn_rows.push_back({dv_at(k), 1.0, dv_hi});   // dv + hi >= 0
            } else {
                nn_rows.push_back({dv_at(k), 1.0, -dv_lo}); // dv - lo >= 0
                nn_rows.push_back({dv_at(k), -1.0, dv_hi}); // hi - dv >= 0
            }
        }
        std::vector<Row> box_rows;
        for (int k = 0; k < N; ++k) {
            box_rows.push_back({state_at(k), 1.0, zmax});
            box_rows.push_back({state_at(k), -1.0, zmax});
            box_rows.push_back({static_cast<Index>(state_at(k) + 1), 1.0, vmax});
            box_rows.push_back({static_cast<Index>(state_at(k) + 1), -1.0, vmax});
        }
        std::vector<Row> abs_rows;
        for (int k = 0; k < N; ++k) {
            abs_rows.push_back({slack_at(k), 1.0, 0.0}); // s - dv >= 0 (pair)
            abs_rows.push_back({slack_at(k), 1.0, 0.0}); // s + dv >= 0
        }

        const Index nn_count = static_cast<Index>(nn_rows.size() +
                                                  box_rows.size() +
                                                  abs_rows.size());
        const Index d_total = zero_rows + nn_count + 3;
        prog.H_x = Mat::Zero(d_total, n);
        prog.H_theta = Mat::Zero(d_total, 2);
        prog.h = Vec::Zero(d_total);
        Index at = 0;
        if (zero_rows > 0) {
            for (const Row &row : zero_list) {
                prog.H_x(at, row.var) = row.coef;
                prog.h[at] = row.cst;
                ++at;
            }
            prog.cone.blocks.push_back({ConeKind::Zero, zero_rows});
        }
        for (const Row &row : nn_rows) {
            prog.H_x(at, row.var) = row.coef;
            prog.h[at] = row.cst;
            ++at;
        }
        for (const Row &row : box_rows) {
            prog.H_x(at, row.var) = row.coef;
            prog.h[at] = row.cst;
            ++at;
        }
        // |dv_k| <= s_k as two inequalities.
        for (int k = 0; k < N; ++k) {
            prog.H_x(at, slack_at(k)) = 1.0;
            prog.H_x(at, dv_at(k)) = -1.0;
            ++at;
            prog.H_x(at, slack_at(k)) = 1.0;
            prog.H_x(at, dv_at(k)) = 1.0;
            ++at;
        }
        prog.cone.blocks.push_back({ConeKind::NonNeg, nn_count});
        // Terminal: t >= || x_N ||_2.
        prog.H_x(at, t_at) = 1.0;
        prog.H_x(at + 1, state_at(N - 1)) = 1.0;
        prog.H_x(at + 2, state_at(N - 1) + 1) = 1.0;
        prog.cone.blocks.push_back({ConeKind::SecondOrder, 3});
        return prog;
    };

    ProblemTemplateBuilder b;
    b.label("cwh")
        .parameter_domain(domain)
        .commutations(CommutationSpace(m, admissible))
        .output_indices({dv_at(0)})
        .instantiator(instantiate_cwh)
        .plant([A2 = A, aB2 = aB](const Vec &state, const Vec &out) {
            Vec impulse(2);
            impulse << 0.0, out[0];
            return Vec(A2 * (state + impulse));
        });
    return b.build();
}

ProblemPtr make_builtin(const std::string &name) {
    if (name == "toy_a") return make_toy_a();
    if (name == "toy_b") return make_toy_b();
    if (name == "toy_b_wide") return make_toy_b_wide();
    if (name == "toy_b_gap") return make_toy_b_gap();
    if (name == "toy_c") return make_toy_c();
    if (name == "cwh") return make_cwh();
    return load_problem_json(name);
}

// --------------------------------------------------------------------------
// Closed-loop simulation
// --------------------------------------------------------------------------

namespace {

Vec extract_outputs(const ProblemTemplate &tmpl, const Vec &x) {
    if (x.size() == static_cast<Index>(tmpl.output_indices.size())) return x;
    Vec out(static_cast<Index>(tmpl.output_indices.size()));
    for (std::size_t i = 0; i < tmpl.output_indices.size(); ++i)
        out[static_cast<Index>(i)] = x[tmpl.output_indices[i]];
    return out;
}

struct DomainBox {
    Vec lo, hi, center;
};

DomainBox domain_box(const PolytopeV &domain) {
    DomainBox b;
    b.lo = domain.vertices[0];
    b.hi = domain.vertices[0];
    for (const auto &v : domain.vertices) {
        b.lo = b.lo.cwiseMin(v);
        b.hi = b.hi.cwiseMax(v);
    }
    b.center = 0.5 * (b.lo + b.hi);
    return b;
}

} // namespace

SimResult simulate_closed_loop(const ProblemTemplate &tmpl,
                               const PartitionTree *tree, ControllerKind kind,
                               const Vec &x0, const ToleranceConfig &cfg,
                               const SimulatorOptions &opts) {
    if (!tmpl.plant)
        throw InvalidArgumentError(
            "problem template declares no plant model; cannot simulate");
    if (kind != ControllerKind::Implicit && tree == nullptr)
        throw InvalidArgumentError("tree controller requires a tree");

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const DomainBox box = domain_box(tmpl.parameter_domain);
    const Vec half = 0.5 * (box.hi - box.lo);

    SimResult result;
    Vec state = x0;

    auto evaluate = [&](const Vec &theta) -> Vec {
        switch (kind) {
        case ControllerKind::Implicit: {
            ImplicitResult r = eval_implicit(tmpl, theta, cfg);
            if (r.status != SolveStatus::Optimal)
                throw OutOfDomainError("implicit controller infeasible");
            return extract_outputs(tmpl, r.x);
        }
        case ControllerKind::SemiExplicit: {
            SemiExplicitResult r = eval_semi_explicit(*tree, tmpl, theta, cfg);
            return extract_outputs(tmpl, r.x);
        }
        case ControllerKind::Explicit: {
            ExplicitResult r = eval_explicit(*tree, theta);
            return extract_outputs(tmpl, r.x);
        }
        }
        throw Error("unreachable");
    };

    for (int step = 0; step < opts.steps; ++step) {
        bool projected = false;
        Vec theta = state;
        // Nominal runs have no invariance guarantee; disturbed states may
        // exit Theta. Project back and continue, flagging the run.
        for (int guard = 0; guard < 80; ++guard) {
            try {
                Vec u = evaluate(theta);
                const double dv = u[0];
                result.fuel += std::abs(dv);
                result.dv_history.push_back(dv);
                if (opts.trace)
                    opts.trace(step, theta, dv, result.fuel, projected);
                Vec next = tmpl.plant(theta, u);
                if (opts.disturbance > 0.0) {
                    for (Index i = 0; i < next.size(); ++i)
                        next[i] += opts.disturbance * half[i] * unif(rng);
                }
                state = next;
                break;
            } catch (const OutOfDomainError &) {
                projected = true;
                result.exited_domain = true;
                if (guard == 0)
                    theta = theta.cwiseMax(box.lo).cwiseMin(box.hi);
                else
                    theta = box.center + 0.5 * (theta - box.center);
                if (guard == 79) throw;
            }
        }
        ++result.steps_run;
    }
    return result;
}

// --------------------------------------------------------------------------
// Benchmark harness
// --------------------------------------------------------------------------

double eps_a_from_scaled_domain(const ProblemTemplate &tmpl, double s,
                                const ToleranceConfig &cfg) {
    double best = 0.0;
    bool any = false;
    for (const auto &v : tmpl.parameter_domain.vertices) {
        MinlpResult r = solve_minlp(tmpl, s * v, cfg);
        if (r.status != SolveStatus::Optimal) continue;
        any = true;
        best = std::max(best, r.value);
    }
    if (!any)
        throw DomainNotCoveredError(
            "eps_a rule: every scaled-domain vertex is infeasible",
            s * tmpl.parameter_domain.vertices[0]);
    return best;
}

std::unique_ptr<PartitionTree> run_partition(const ProblemPtr &tmpl,
                                             const RefineConfig &cfg,
                                             const std::string &progress_csv) {
    cfg.tolerances.validate_for_refine();
    VertexSolutionCache cache(cfg.mode == RefineMode::Explicit);
    const auto t0 = std::chrono::steady_clock::now();
    auto tree = run_phase1(tmpl, cfg.tolerances, cache);
    if (!progress_csv.empty())
        tree->set_progress_sink(make_progress_csv_sink(progress_csv));
    run_phase2(*tree, tmpl, cfg, cache);
    tree->set_progress_sink(nullptr);
    tree->wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return tree;
}

TreeFileMeta make_meta(const PartitionTree &tree, const ProblemTemplate &tmpl) {
    TreeFileMeta meta;
    meta.mode = tree.mode();
    meta.p = tmpl.p;
    meta.n_out = static_cast<Index>(tmpl.output_indices.size());
    meta.m = tmpl.m;
    meta.label = tmpl.label;
    meta.output_indices = tmpl.output_indices;
    return meta;
}

std::vector<BenchRow> bench_sweep(const BenchOptions &opts) {
    if (!opts.problem_factory)
        throw InvalidArgumentError("bench_sweep requires a problem factory");
    std::vector<BenchRow> rows;

    for (std::size_t si = 0; si < opts.settings.size(); ++si) {
        const BenchSetting &setting = opts.settings[si];
        double domain_scale = 1.0;
        ProblemPtr tmpl = opts.problem_factory(domain_scale);
        ToleranceConfig base;
        base.max_depth = opts.max_depth;
        const double eps_a = eps_a_from_scaled_domain(*tmpl, setting.scale, base);

        std::mt19937_64 rng(opts.seed + si);
        const DomainBox box = domain_box(tmpl->parameter_domain);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        auto sample_theta = [&] {
            Vec t(box.lo.size());
            for (Index i = 0; i < t.size(); ++i)
                t[i] = box.lo[i] + unif(rng) * (box.hi[i] - box.lo[i]);
            return t;
        };
        std::vector<Vec> thetas;
        for (int q = 0; q < opts.queries; ++q) thetas.push_back(sample_theta());

        auto quantiles = [](std::vector<double> &v) {
            std::sort(v.begin(), v.end());
            const double med = v[v.size() / 2];
            return std::array<double, 3>{med, v.front(), v.back()};
        };

        for (RefineMode mode :
             {RefineMode::SemiExplicit, RefineMode::Explicit}) {
            RefineConfig rc;
            rc.mode = mode;
            rc.tolerances = base;
            rc.tolerances.eps_a = eps_a;
            rc.tolerances.eps_r = setting.eps_r;
            rc.parallel_workers = opts.workers;

            std::string csv;
            if (!opts.progress_csv_prefix.empty())
                csv = opts.progress_csv_prefix + "_s" +
                      std::to_string(setting.scale) + "_" +
                      (mode == RefineMode::Explicit ? "explicit" : "semi") +
                      ".csv";

            std::unique_ptr<PartitionTree> tree;
            for (int attempt = 0;; ++attempt) {
                try {
                    tree = run_partition(tmpl, rc, csv);
                    break;
                } catch (const DomainNotCoveredError &) {
                    if (opts.shrink_on_uncovered <= 0.0 || attempt >= 8)
                        throw;
                    domain_scale *= opts.shrink_on_uncovered;
                    tmpl = opts.problem_factory(domain_scale);
                }
            }

            BenchRow row;
            row.mode = mode == RefineMode::Explicit ? "explicit" : "semi-explicit";
            if (domain_scale != 1.0)
                row.mode += " (domain x" + std::to_string(domain_scale) + ")";
            row.eps_a = eps_a;
            row.eps_r = setting.eps_r;
            TreeStats st = tree->stats();
            row.tau = st.tau;
            row.lambda = st.lambda;
            row.t_solve_s = tree->wall_time_s;

            const std::string tmp = "/tmp/mpt_bench_tree_" +
                                    std::to_string(si) + "_" +
                                    row.mode.substr(0, 4) + ".bin";
            row.bytes = save_tree(*tree, make_meta(*tree, *tmpl), tmp,
                                  StorageModel::M1);
            std::remove(tmp.c_str());

            std::vector<double> times;
            for (const Vec &theta : thetas) {
                if (mode == RefineMode::Explicit) {
                    ExplicitResult r = eval_explicit(*tree, theta);
                    times.push_back(r.timings.total_s() * 1e6);
                } else {
                    SemiExplicitResult r =
                        eval_semi_explicit(*tree, *tmpl, theta, rc.tolerances);
                    times.push_back(r.timings.total_s() * 1e6);
                }
            }
            auto [med, mn, mx] = quantiles(times);
            row.t_query_median_us = med;
            row.t_query_min_us = mn;
            row.t_query_max_us = mx;
            rows.push_back(std::move(row));
        }

        // Implicit baseline row for the same parameter samples.
        {
            BenchRow row;
            row.mode = "implicit";
            row.eps_a = eps_a;
            row.eps_r = setting.eps_r;
            std::vector<double> times;
            for (const Vec &theta : thetas) {
                ImplicitResult r = eval_implicit(*tmpl, theta, base);
                times.push_back(r.timings.total_s() * 1e6);
            }
            auto [med, mn, mx] = quantiles(times);
            row.t_query_median_us = med;
            row.t_query_min_us = mn;
            row.t_query_max_us = mx;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

} // namespace mpt
