// mpt — command-line front end over the shared-library C API.
//
// Subcommands: partition, eval, simulate, bench, inspect, export-plot-data.
// Exit codes: 0 success, 2 domain not covered, 3 nonconvergence, 4 I/O
// error, 5 numerical failure, 1 anything else.

#include "mpt.h"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

int exit_code_for(mpt_status st) {
    switch (st) {
    case MPT_OK: return 0;
    case MPT_ERR_DOMAIN_NOT_COVERED: return 2;
    case MPT_ERR_NONCONVERGENCE: return 3;
    case MPT_ERR_IO: return 4;
    case MPT_ERR_NUMERICAL: return 5;
    default: return 1;
    }
}

[[noreturn]] void fail(mpt_status st, const std::string &context) {
    std::cerr << "error: " << context << ": " << mpt_status_name(st) << " ("
              << mpt_last_error() << ")\n";
    std::exit(exit_code_for(st));
}

struct ProblemHandle {
    mpt_problem *p = nullptr;
    ~ProblemHandle() { mpt_problem_free(p); }
};

struct TreeHandle {
    mpt_tree *t = nullptr;
    ~TreeHandle() { mpt_tree_free(t); }
};

void open_problem(const std::string &name, ProblemHandle &h) {
    const mpt_status st = mpt_problem_create(name.c_str(), &h.p);
    if (st != MPT_OK) fail(st, "loading problem '" + name + "'");
}

void open_tree(const std::string &path, TreeHandle &h) {
    const mpt_status st = mpt_tree_load(path.c_str(), &h.t);
    if (st != MPT_OK) fail(st, "loading tree '" + path + "'");
}

std::vector<double> parse_theta(const std::string &csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

std::string delta_string(const uint8_t *bits, int m) {
    std::string s;
    for (int i = 0; i < m; ++i) s.push_back(bits[i] ? '1' : '0');
    return s;
}

struct DomainBox {
    std::vector<double> lo, hi;
};

DomainBox domain_box(mpt_problem *p, int pdim) {
    int32_t count = 0;
    mpt_problem_domain(p, nullptr, &count);
    std::vector<double> verts(static_cast<std::size_t>(count) * pdim);
    mpt_problem_domain(p, verts.data(), &count);
    DomainBox b;
    b.lo.assign(pdim, 1e300);
    b.hi.assign(pdim, -1e300);
    for (int32_t k = 0; k < count; ++k)
        for (int i = 0; i < pdim; ++i) {
            b.lo[i] = std::min(b.lo[i], verts[k * pdim + i]);
            b.hi[i] = std::max(b.hi[i], verts[k * pdim + i]);
        }
    return b;
}

// ------------------------------------------------------------------
// partition
// ------------------------------------------------------------------

struct PartitionArgs {
    std::string problem, out = "tree.bin", progress_csv, mode = "semi",
                storage = "m1";
    double eps_a = 0.0, eps_r = 0.0;
    int workers = 1, max_depth = 64;
    std::uint64_t seed = 0;
};

int cmd_partition(const PartitionArgs &a) {
    ProblemHandle prob;
    open_problem(a.problem, prob);

    mpt_partition_options opts;
    mpt_partition_options_init(&opts);
    opts.eps_a = a.eps_a;
    opts.eps_r = a.eps_r;
    opts.mode = a.mode == "explicit" ? MPT_MODE_EXPLICIT : MPT_MODE_SEMI_EXPLICIT;
    opts.workers = a.workers;
    opts.max_depth = a.max_depth;
    opts.progress_csv = a.progress_csv.empty() ? nullptr : a.progress_csv.c_str();

    TreeHandle tree;
    const auto t0 = std::chrono::steady_clock::now();
    mpt_status st = mpt_partition(prob.p, &opts, &tree.t);
    if (st != MPT_OK) fail(st, "partitioning");
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();

    uint64_t bytes = 0;
    st = mpt_tree_save(tree.t, prob.p, a.out.c_str(),
                       a.storage == "m2" ? MPT_STORAGE_M2 : MPT_STORAGE_M1,
                       &bytes);
    if (st != MPT_OK) fail(st, "saving tree");

    mpt_tree_stats stats;
    mpt_tree_get_stats(tree.t, &stats);
    std::printf("partitioned '%s': depth=%d leaves=%llu nodes=%llu "
                "vertices=%llu solves=%llu wall=%.2fs -> %s (%llu bytes)\n",
                a.problem.c_str(), stats.depth,
                (unsigned long long)stats.leaves,
                (unsigned long long)stats.nodes,
                (unsigned long long)stats.vertices,
                (unsigned long long)stats.solves_total, dt, a.out.c_str(),
                (unsigned long long)bytes);
    return 0;
}

// ------------------------------------------------------------------
// eval
// ------------------------------------------------------------------

struct EvalArgs {
    std::string tree, problem, theta, theta_file;
};

int cmd_eval(const EvalArgs &a) {
    TreeHandle tree;
    open_tree(a.tree, tree);
    mpt_tree_stats stats;
    mpt_tree_get_stats(tree.t, &stats);

    ProblemHandle prob;
    const bool explicit_tree = stats.mode == MPT_MODE_EXPLICIT;
    if (!a.problem.empty()) open_problem(a.problem, prob);
    if (!explicit_tree && a.problem.empty())
        fail(MPT_ERR_INVALID_ARG,
             "semi-explicit trees need --problem for the online solve");

    std::vector<std::vector<double>> queries;
    if (!a.theta.empty()) queries.push_back(parse_theta(a.theta));
    if (!a.theta_file.empty()) {
        std::ifstream in(a.theta_file);
        if (!in) fail(MPT_ERR_IO, "opening " + a.theta_file);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            queries.push_back(parse_theta(line));
        }
    }
    if (queries.empty())
        fail(MPT_ERR_INVALID_ARG, "need --theta or --theta-file");

    std::vector<uint8_t> delta(static_cast<std::size_t>(stats.m));
    for (const auto &q : queries) {
        if (static_cast<int32_t>(q.size()) != stats.p)
            fail(MPT_ERR_INVALID_ARG, "theta dimension mismatch");
        if (explicit_tree) {
            std::vector<double> x(static_cast<std::size_t>(stats.n_out));
            int32_t len = 0;
            double tq = 0;
            mpt_status st =
                mpt_eval_explicit(tree.t, q.data(), delta.data(), x.data(),
                                  stats.n_out, &len, &tq);
            if (st != MPT_OK) fail(st, "explicit eval");
            std::printf("delta=%s x=[", delta_string(delta.data(), stats.m).c_str());
            for (int32_t i = 0; i < len; ++i)
                std::printf("%s%.9g", i ? "," : "", x[i]);
            std::printf("] t_query=%.1fus\n", tq * 1e6);
        } else {
            int32_t n = 0;
            mpt_problem_info(prob.p, nullptr, &n, nullptr, nullptr, nullptr);
            std::vector<double> x(static_cast<std::size_t>(n));
            double value = 0, tq = 0, ts = 0;
            mpt_status st = mpt_eval_semi_explicit(
                tree.t, prob.p, q.data(), delta.data(), x.data(), &value, &tq,
                &ts);
            if (st != MPT_OK) fail(st, "semi-explicit eval");
            std::printf("delta=%s value=%.9g t_query=%.1fus t_solve=%.1fus\n",
                        delta_string(delta.data(), stats.m).c_str(), value,
                        tq * 1e6, ts * 1e6);
        }
    }
    return 0;
}

// ------------------------------------------------------------------
// simulate
// ------------------------------------------------------------------

struct SimArgs {
    std::string problem, tree, x0, out;
    std::string controller = "auto";
    int steps = 100;
    std::uint64_t seed = 0;
    double disturbance = 0.0;
};

int cmd_simulate(const SimArgs &a) {
    ProblemHandle prob;
    open_problem(a.problem, prob);
    TreeHandle tree;
    int controller = 0;
    if (!a.tree.empty()) {
        open_tree(a.tree, tree);
        mpt_tree_stats stats;
        mpt_tree_get_stats(tree.t, &stats);
        controller = stats.mode == MPT_MODE_EXPLICIT ? 2 : 1;
    }
    if (a.controller == "implicit") controller = 0;
    else if (a.controller == "semi") controller = 1;
    else if (a.controller == "explicit") controller = 2;

    auto x0 = parse_theta(a.x0);
    mpt_sim_options so;
    mpt_sim_options_init(&so);
    so.steps = a.steps;
    so.seed = a.seed;
    so.disturbance = a.disturbance;
    so.trajectory_csv = a.out.empty() ? nullptr : a.out.c_str();

    double fuel = 0;
    int32_t exited = 0;
    mpt_status st = mpt_simulate(prob.p, tree.t, controller, x0.data(), &so,
                                 &fuel, &exited);
    if (st != MPT_OK) fail(st, "simulating");
    std::printf("simulated %d steps: fuel=%.6e exited_domain=%d\n", a.steps,
                fuel, exited);
    return 0;
}

// ------------------------------------------------------------------
// bench
// ------------------------------------------------------------------

struct BenchArgs {
    std::string problem = "cwh", out = "bench.csv", eps_list = "2";
    int queries = 200, workers = 1, max_depth = 40;
    std::uint64_t seed = 0;
};

// eps_a rule from the scaled-domain vertices, through the C API.
double eps_a_rule(mpt_problem *p, int pdim, double s) {
    int32_t count = 0;
    mpt_problem_domain(p, nullptr, &count);
    std::vector<double> verts(static_cast<std::size_t>(count) * pdim);
    mpt_problem_domain(p, verts.data(), &count);
    double best = 0.0;
    bool any = false;
    for (int32_t k = 0; k < count; ++k) {
        std::vector<double> theta(static_cast<std::size_t>(pdim));
        for (int i = 0; i < pdim; ++i) theta[i] = s * verts[k * pdim + i];
        double value = 0, tt = 0;
        mpt_status st = mpt_eval_implicit(p, theta.data(), nullptr, nullptr,
                                          &value, &tt);
        if (st == MPT_ERR_INFEASIBLE) continue;
        if (st != MPT_OK) fail(st, "eps_a rule solve");
        any = true;
        best = std::max(best, value);
    }
    if (!any) fail(MPT_ERR_DOMAIN_NOT_COVERED, "eps_a rule");
    return best;
}

int cmd_bench(const BenchArgs &a) {
    ProblemHandle prob;
    open_problem(a.problem, prob);
    int32_t pdim = 0, n = 0, m = 0;
    mpt_problem_info(prob.p, &pdim, &n, &m, nullptr, nullptr);

    // The paper's schedule, coarsest first: s scales Theta for the eps_a
    // rule, eps_r is the relative error.
    const std::vector<std::pair<double, double>> schedule = {
        {0.5, 2.0}, {0.25, 1.0}, {0.1, 0.1}, {0.03, 0.05}};
    std::vector<std::pair<double, double>> settings;
    if (a.eps_list.find(':') == std::string::npos) {
        const int k = std::max(1, std::min(4, std::atoi(a.eps_list.c_str())));
        settings.assign(schedule.begin(), schedule.begin() + k);
    } else {
        std::stringstream ss(a.eps_list);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto colon = item.find(':');
            settings.emplace_back(std::stod(item.substr(0, colon)),
                                  std::stod(item.substr(colon + 1)));
        }
    }

    std::ofstream out(a.out, std::ios::trunc);
    if (!out) fail(MPT_ERR_IO, "opening " + a.out);
    out << "mode,eps_a,eps_r,tau,lambda,t_solve_s,t_query_median_us,"
           "t_query_min_us,t_query_max_us,bytes\n";

    DomainBox box = domain_box(prob.p, pdim);
    std::mt19937_64 rng(a.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    for (const auto &[s, eps_r] : settings) {
        const double eps_a = eps_a_rule(prob.p, pdim, s);
        std::vector<std::vector<double>> thetas;
        for (int q = 0; q < a.queries; ++q) {
            std::vector<double> t(static_cast<std::size_t>(pdim));
            for (int i = 0; i < pdim; ++i)
                t[i] = box.lo[i] + unif(rng) * (box.hi[i] - box.lo[i]);
            thetas.push_back(std::move(t));
        }
        auto emit = [&](const std::string &mode, int tau, uint64_t lambda,
                        double tsolve, std::vector<double> &times,
                        uint64_t bytes) {
            std::sort(times.begin(), times.end());
            out << mode << ',' << eps_a << ',' << eps_r << ',' << tau << ','
                << lambda << ',' << tsolve << ',' << times[times.size() / 2]
                << ',' << times.front() << ',' << times.back() << ',' << bytes
                << '\n';
        };

        for (const std::string mode : {"semi", "explicit"}) {
            mpt_partition_options opts;
            mpt_partition_options_init(&opts);
            opts.eps_a = eps_a;
            opts.eps_r = eps_r;
            opts.mode = mode == "explicit" ? MPT_MODE_EXPLICIT
                                           : MPT_MODE_SEMI_EXPLICIT;
            opts.workers = a.workers;
            opts.max_depth = a.max_depth;
            TreeHandle tree;
            const auto t0 = std::chrono::steady_clock::now();
            mpt_status st = mpt_partition(prob.p, &opts, &tree.t);
            if (st != MPT_OK) fail(st, "bench partition");
            const double tsolve = std::chrono::duration<double>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count();
            const std::string tmp = a.out + "." + mode + ".tree";
            uint64_t bytes = 0;
            st = mpt_tree_save(tree.t, prob.p, tmp.c_str(), MPT_STORAGE_M1,
                               &bytes);
            if (st != MPT_OK) fail(st, "bench save");
            std::remove(tmp.c_str());
            mpt_tree_stats stats;
            mpt_tree_get_stats(tree.t, &stats);

            std::vector<uint8_t> delta(static_cast<std::size_t>(m));
            std::vector<double> times;
            for (const auto &q : thetas) {
                if (mode == "explicit") {
                    std::vector<double> x(static_cast<std::size_t>(stats.n_out));
                    int32_t len = 0;
                    double tq = 0;
                    st = mpt_eval_explicit(tree.t, q.data(), delta.data(),
                                           x.data(), stats.n_out, &len, &tq);
                    if (st != MPT_OK) fail(st, "bench explicit eval");
                    times.push_back(tq * 1e6);
                } else {
                    std::vector<double> x(static_cast<std::size_t>(n));
                    double value = 0, tq = 0, ts2 = 0;
                    st = mpt_eval_semi_explicit(tree.t, prob.p, q.data(),
                                                delta.data(), x.data(), &value,
                                                &tq, &ts2);
                    if (st != MPT_OK) fail(st, "bench semi eval");
                    times.push_back((tq + ts2) * 1e6);
                }
            }
            emit(mode == "explicit" ? "explicit" : "semi-explicit", stats.depth,
                 stats.leaves, tsolve, times, bytes);
        }

        std::vector<double> times;
        for (const auto &q : thetas) {
            double value = 0, tt = 0;
            mpt_status st = mpt_eval_implicit(prob.p, q.data(), nullptr,
                                              nullptr, &value, &tt);
            if (st != MPT_OK && st != MPT_ERR_INFEASIBLE)
                fail(st, "bench implicit eval");
            times.push_back(tt * 1e6);
        }
        emit("implicit", 0, 0, 0.0, times, 0);
    }
    std::printf("wrote %s\n", a.out.c_str());
    return 0;
}

// ------------------------------------------------------------------
// inspect
// ------------------------------------------------------------------

int cmd_inspect(const std::string &path) {
    TreeHandle tree;
    open_tree(path, tree);
    mpt_tree_stats st;
    mpt_tree_get_stats(tree.t, &st);
    uint64_t m1 = 0, m2 = 0;
    mpt_tree_predict_size(tree.t, nullptr, MPT_STORAGE_M1, &m1);
    mpt_tree_predict_size(tree.t, nullptr, MPT_STORAGE_M2, &m2);
    const char *mode = st.mode == MPT_MODE_EXPLICIT
                           ? "explicit"
                           : (st.mode == MPT_MODE_SEMI_EXPLICIT
                                  ? "semi-explicit"
                                  : "feasible-map");
    std::printf("tree %s\n", path.c_str());
    std::printf("  mode                   %s\n", mode);
    std::printf("  p / m / n_out          %d / %d / %d\n", st.p, st.m, st.n_out);
    std::printf("  depth (tau)            %d\n", st.depth);
    std::printf("  leaves (lambda)        %llu\n", (unsigned long long)st.leaves);
    std::printf("  nodes                  %llu\n", (unsigned long long)st.nodes);
    std::printf("  vertices               %llu\n",
                (unsigned long long)st.vertices);
    std::printf("  closed volume fraction %.9f\n", st.closed_volume_fraction);
    std::printf("  size if saved as M1    %llu bytes\n", (unsigned long long)m1);
    std::printf("  size if saved as M2    %llu bytes\n", (unsigned long long)m2);
    return 0;
}

// ------------------------------------------------------------------
// export-plot-data
// ------------------------------------------------------------------

struct ExportArgs {
    std::string kind, out = "plot.csv";
    std::vector<std::string> progress;
    std::string tree, problem;
    int queries = 200;
    std::uint64_t seed = 0;
    int steps = 60, seeds = 5;
    std::vector<std::string> trees;
};

int cmd_export(const ExportArgs &a) {
    std::ofstream out(a.out, std::ios::trunc);
    if (!out) fail(MPT_ERR_IO, "opening " + a.out);

    if (a.kind == "convergence") {
        // Normalized Fig.2-style curves from progress CSVs.
        out << "source,t_norm,closed_leaf_norm,closed_volume_fraction\n";
        for (const auto &path : a.progress) {
            std::ifstream in(path);
            if (!in) fail(MPT_ERR_IO, "opening " + path);
            std::string line;
            std::getline(in, line); // header
            std::vector<std::array<double, 3>> rows;
            while (std::getline(in, line)) {
                std::stringstream ss(line);
                std::string cell;
                std::array<double, 5> v{};
                for (int i = 0; i < 5 && std::getline(ss, cell, ','); ++i)
                    v[static_cast<std::size_t>(i)] = std::stod(cell);
                rows.push_back({v[0], v[1], v[2]});
            }
            if (rows.empty()) continue;
            const double tmax = std::max(rows.back()[0], 1e-12);
            const double lmax = std::max(rows.back()[1], 1.0);
            for (const auto &r : rows)
                out << path << ',' << r[0] / tmax << ',' << r[1] / lmax << ','
                    << r[2] << '\n';
        }
    } else if (a.kind == "query-times") {
        // Fig.3-style raw per-query times for each implementation.
        if (a.tree.empty() || a.problem.empty())
            fail(MPT_ERR_INVALID_ARG, "query-times needs --tree and --problem");
        TreeHandle tree;
        open_tree(a.tree, tree);
        ProblemHandle prob;
        open_problem(a.problem, prob);
        mpt_tree_stats st;
        mpt_tree_get_stats(tree.t, &st);
        int32_t pdim = 0, n = 0, m = 0;
        mpt_problem_info(prob.p, &pdim, &n, &m, nullptr, nullptr);
        DomainBox box = domain_box(prob.p, pdim);
        std::mt19937_64 rng(a.seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        out << "implementation,t_us\n";
        std::vector<uint8_t> delta(static_cast<std::size_t>(m));
        for (int q = 0; q < a.queries; ++q) {
            std::vector<double> theta(static_cast<std::size_t>(pdim));
            for (int i = 0; i < pdim; ++i)
                theta[i] = box.lo[i] + unif(rng) * (box.hi[i] - box.lo[i]);
            double value = 0, tq = 0, ts = 0;
            std::vector<double> x(static_cast<std::size_t>(n));
            if (st.mode == MPT_MODE_EXPLICIT) {
                int32_t len = 0;
                mpt_status rc =
                    mpt_eval_explicit(tree.t, theta.data(), delta.data(),
                                      x.data(), n, &len, &tq);
                if (rc != MPT_OK) fail(rc, "explicit eval");
                out << "explicit," << tq * 1e6 << '\n';
            } else {
                mpt_status rc = mpt_eval_semi_explicit(tree.t, prob.p,
                                                       theta.data(), delta.data(),
                                                       x.data(), &value, &tq, &ts);
                if (rc != MPT_OK) fail(rc, "semi eval");
                out << "semi-explicit," << (tq + ts) * 1e6 << '\n';
            }
            double tt = 0;
            mpt_status rc = mpt_eval_implicit(prob.p, theta.data(), nullptr,
                                              nullptr, &value, &tt);
            if (rc != MPT_OK && rc != MPT_ERR_INFEASIBLE)
                fail(rc, "implicit eval");
            out << "implicit," << tt * 1e6 << '\n';
        }
    } else if (a.kind == "fuel") {
        // Fig.4-style relative fuel over-consumption vs the implicit law.
        if (a.problem.empty() || a.trees.empty())
            fail(MPT_ERR_INVALID_ARG, "fuel needs --problem and --trees");
        ProblemHandle prob;
        open_problem(a.problem, prob);
        int32_t pdim = 0;
        mpt_problem_info(prob.p, &pdim, nullptr, nullptr, nullptr, nullptr);
        DomainBox box = domain_box(prob.p, pdim);
        out << "tree,seed,fuel,fuel_implicit,ratio\n";
        for (int sd = 0; sd < a.seeds; ++sd) {
            std::mt19937_64 rng(a.seed + static_cast<std::uint64_t>(sd));
            std::uniform_real_distribution<double> unif(0.25, 0.75);
            std::vector<double> x0(static_cast<std::size_t>(pdim));
            for (int i = 0; i < pdim; ++i)
                x0[i] = box.lo[i] + unif(rng) * (box.hi[i] - box.lo[i]);
            mpt_sim_options so;
            mpt_sim_options_init(&so);
            so.steps = a.steps;
            so.seed = a.seed + static_cast<std::uint64_t>(sd);
            double fuel_impl = 0;
            int32_t exited = 0;
            mpt_status rc = mpt_simulate(prob.p, nullptr, 0, x0.data(), &so,
                                         &fuel_impl, &exited);
            if (rc != MPT_OK) fail(rc, "implicit simulate");
            for (const auto &tp : a.trees) {
                TreeHandle tree;
                open_tree(tp, tree);
                mpt_tree_stats st;
                mpt_tree_get_stats(tree.t, &st);
                double fuel = 0;
                rc = mpt_simulate(prob.p, tree.t,
                                  st.mode == MPT_MODE_EXPLICIT ? 2 : 1,
                                  x0.data(), &so, &fuel, &exited);
                if (rc != MPT_OK) fail(rc, "tree simulate");
                out << tp << ',' << sd << ',' << fuel << ',' << fuel_impl << ','
                    << (fuel_impl > 0 ? fuel / fuel_impl : 1.0) << '\n';
            }
        }
    } else {
        fail(MPT_ERR_INVALID_ARG,
             "unknown --kind (use convergence, query-times or fuel)");
    }
    std::printf("wrote %s\n", a.out.c_str());
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Simplicial partition engine for multiparametric "
                 "mixed-integer conic programs"};
    app.require_subcommand(1);

    PartitionArgs pa;
    auto *partition = app.add_subcommand(
        "partition", "Run both offline phases and save the tree");
    partition->add_option("--problem", pa.problem, "builtin name or JSON path")
        ->required();
    partition->add_option("--eps-a", pa.eps_a, "absolute suboptimality");
    partition->add_option("--eps-r", pa.eps_r, "relative suboptimality");
    partition->add_option("--mode", pa.mode, "semi|explicit");
    partition->add_option("--workers", pa.workers, "parallel workers");
    partition->add_option("--max-depth", pa.max_depth, "depth safeguard");
    partition->add_option("--out", pa.out, "output tree file");
    partition->add_option("--storage", pa.storage, "m1|m2");
    partition->add_option("--progress-csv", pa.progress_csv, "progress log");
    partition->add_option("--seed", pa.seed, "random seed (unused; determinism)");

    EvalArgs ea;
    auto *eval = app.add_subcommand("eval", "Query a stored tree");
    eval->add_option("--tree", ea.tree)->required();
    eval->add_option("--problem", ea.problem,
                     "needed for semi-explicit online solves");
    eval->add_option("--theta", ea.theta, "comma-separated parameter");
    eval->add_option("--theta-file", ea.theta_file, "one theta per line");

    SimArgs sa;
    auto *sim = app.add_subcommand("simulate", "Closed-loop simulation");
    sim->add_option("--problem", sa.problem)->required();
    sim->add_option("--tree", sa.tree, "controller tree (absent = implicit)");
    sim->add_option("--controller", sa.controller,
                    "auto|implicit|semi|explicit");
    sim->add_option("--x0", sa.x0, "initial state")->required();
    sim->add_option("--steps", sa.steps);
    sim->add_option("--seed", sa.seed);
    sim->add_option("--disturbance", sa.disturbance,
                    "uniform disturbance level (fraction of half-width)");
    sim->add_option("--out", sa.out, "trajectory CSV");

    BenchArgs ba;
    auto *bench = app.add_subcommand("bench", "Epsilon sweep with timing");
    bench->add_option("--problem", ba.problem);
    bench->add_option("--eps-list", ba.eps_list,
                      "count into the paper schedule, or s:eps_r pairs");
    bench->add_option("--queries", ba.queries);
    bench->add_option("--workers", ba.workers);
    bench->add_option("--max-depth", ba.max_depth);
    bench->add_option("--seed", ba.seed);
    bench->add_option("--out", ba.out);

    std::string inspect_path;
    auto *inspect = app.add_subcommand("inspect", "Print stats of a tree file");
    inspect->add_option("--tree", inspect_path)->required();

    ExportArgs xa;
    auto *exp = app.add_subcommand("export-plot-data",
                                   "CSV exports for the standard plots");
    exp->add_option("--kind", xa.kind, "convergence|query-times|fuel")
        ->required();
    exp->add_option("--out", xa.out);
    exp->add_option("--progress", xa.progress, "progress CSVs (convergence)");
    exp->add_option("--tree", xa.tree);
    exp->add_option("--trees", xa.trees, "tree files (fuel)");
    exp->add_option("--problem", xa.problem);
    exp->add_option("--queries", xa.queries);
    exp->add_option("--steps", xa.steps);
    exp->add_option("--seeds", xa.seeds);
    exp->add_option("--seed", xa.seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (partition->parsed()) return cmd_partition(pa);
        if (eval->parsed()) return cmd_eval(ea);
        if (sim->parsed()) return cmd_simulate(sa);
        if (bench->parsed()) return cmd_bench(ba);
        if (inspect->parsed()) return cmd_inspect(inspect_path);
        if (exp->parsed()) return cmd_export(xa);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
