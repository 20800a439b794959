#include "mpt.h"

#include "mpt/library.hpp"
#include "mpt/phase1.hpp"
#include "mpt/phase2.hpp"
#include "mpt/problem_json.hpp"
#include "mpt/runtime.hpp"
#include "mpt/treefile.hpp"

#include <cstdio>
#include <cstring>
#include <memory>
#include <fstream>
#include <string>

using namespace mpt;

struct mpt_problem {
    ProblemPtr tmpl;
};

struct mpt_tree {
    std::unique_ptr<PartitionTree> tree;
    TreeFileMeta meta; ///< as stored / as built
};

namespace {

thread_local std::string t_last_error;

void set_error(const std::string &msg) { t_last_error = msg; }

template <typename Fn> mpt_status guarded(Fn &&fn) {
    try {
        fn();
        return MPT_OK;
    } catch (const InvalidArgumentError &e) {
        set_error(e.what());
        return MPT_ERR_INVALID_ARG;
    } catch (const UnknownCommutationError &e) {
        set_error(e.what());
        return MPT_ERR_INVALID_ARG;
    } catch (const DomainNotCoveredError &e) {
        set_error(e.what());
        return MPT_ERR_DOMAIN_NOT_COVERED;
    } catch (const NonConvergenceError &e) {
        set_error(e.what());
        return MPT_ERR_NONCONVERGENCE;
    } catch (const DepthExceededError &e) {
        set_error(e.what());
        return MPT_ERR_NONCONVERGENCE;
    } catch (const OutOfDomainError &e) {
        set_error(e.what());
        return MPT_ERR_OUT_OF_DOMAIN;
    } catch (const ModeMismatchError &e) {
        set_error(e.what());
        return MPT_ERR_MODE_MISMATCH;
    } catch (const NumericalError &e) {
        set_error(e.what());
        return MPT_ERR_NUMERICAL;
    } catch (const IoError &e) {
        set_error(e.what());
        return MPT_ERR_IO;
    } catch (const Error &e) {
        set_error(e.what());
        return MPT_ERR_UNKNOWN;
    } catch (const std::exception &e) {
        set_error(e.what());
        return MPT_ERR_UNKNOWN;
    }
}

ToleranceConfig tolerances_from(const mpt_partition_options &o) {
    ToleranceConfig t;
    t.eps_a = o.eps_a;
    t.eps_r = o.eps_r;
    t.max_depth = o.max_depth;
    t.min_cell_volume = o.min_cell_volume;
    t.solver_tol = o.solver_tol;
    t.geom_tol = o.geom_tol;
    t.rel_denominator_floor = o.rel_denominator_floor;
    return t;
}

void copy_delta(uint8_t *out, const Delta &d) {
    if (!out) return;
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = d[i];
}

} // namespace

extern "C" {

const char *mpt_last_error(void) { return t_last_error.c_str(); }

const char *mpt_status_name(mpt_status status) {
    switch (status) {
    case MPT_OK: return "ok";
    case MPT_ERR_INVALID_ARG: return "invalid argument";
    case MPT_ERR_DOMAIN_NOT_COVERED: return "domain not covered";
    case MPT_ERR_NONCONVERGENCE: return "nonconvergence";
    case MPT_ERR_IO: return "i/o error";
    case MPT_ERR_NUMERICAL: return "numerical failure";
    case MPT_ERR_OUT_OF_DOMAIN: return "theta outside domain";
    case MPT_ERR_INFEASIBLE: return "infeasible";
    case MPT_ERR_MODE_MISMATCH: return "mode mismatch";
    case MPT_ERR_UNKNOWN: return "unknown error";
    }
    return "?";
}

mpt_status mpt_problem_create(const char *name_or_path, mpt_problem **out) {
    if (!name_or_path || !out) {
        set_error("null argument");
        return MPT_ERR_INVALID_ARG;
    }
    return guarded([&] {
        auto p = std::make_unique<mpt_problem>();
        p->tmpl = make_builtin(name_or_path);
        *out = p.release();
    });
}

void mpt_cwh_params_init(mpt_cwh_params *params) {
    if (!params) return;
    CwhParams d;
    params->omega0 = d.omega0;
    params->t_sample = d.t_sample;
    params->horizon = d.horizon;
    params->dv_min = d.dv_min;
    params->dv_max = d.dv_max;
    params->terminal_weight = d.terminal_weight;
    params->domain_scale = d.domain_scale;
}

mpt_status mpt_problem_create_cwh(const mpt_cwh_params *params,
                                  mpt_problem **out) {
    if (!out) {
        set_error("null argument");
        return MPT_ERR_INVALID_ARG;
    }
    return guarded([&] {
        CwhParams cp;
        if (params) {
            cp.omega0 = params->omega0;
            cp.t_sample = params->t_sample;
            cp.horizon = params->horizon;
            cp.dv_min = params->dv_min;
            cp.dv_max = params->dv_max;
            cp.terminal_weight = params->terminal_weight;
            cp.domain_scale = params->domain_scale;
        }
        auto p = std::make_unique<mpt_problem>();
        p->tmpl = make_cwh(cp);
        *out = p.release();
    });
}

void mpt_problem_free(mpt_problem *problem) { delete problem; }

mpt_status mpt_problem_info(const mpt_problem *problem, int32_t *p, int32_t *n,
                            int32_t *m, int32_t *n_admissible, int32_t *n_out) {
    if (!problem) {
        set_error("null problem");
        return MPT_ERR_INVALID_ARG;
    }
    if (p) *p = static_cast<int32_t>(problem->tmpl->p);
    if (n) *n = static_cast<int32_t>(problem->tmpl->n);
    if (m) *m = static_cast<int32_t>(problem->tmpl->m);
    if (n_admissible)
        *n_admissible = static_cast<int32_t>(problem->tmpl->num_admissible());
    if (n_out)
        *n_out = static_cast<int32_t>(problem->tmpl->output_indices.size());
    return MPT_OK;
}

mpt_status mpt_problem_label(const mpt_problem *problem, char *buf,
                             size_t bufsize) {
    if (!problem || !buf || bufsize == 0) {
        set_error("null argument");
        return MPT_ERR_INVALID_ARG;
    }
    std::snprintf(buf, bufsize, "%s", problem->tmpl->label.c_str());
    return MPT_OK;
}

mpt_status mpt_problem_domain(const mpt_problem *problem, double *vertices,
                              int32_t *count) {
    if (!problem || !count) {
        set_error("null argument");
        return MPT_ERR_INVALID_ARG;
    }
    const auto &dom = problem->tmpl->parameter_domain;
    if (!vertices) {
        *count = static_cast<int32_t>(dom.vertices.size());
        return MPT_OK;
    }
    for (std::size_t k = 0; k < dom.vertices.size(); ++k)
        for (Index i = 0; i < dom.p; ++i)
            vertices[k * static_cast<std::size_t>(dom.p) +
                     static_cast<std::size_t>(i)] = dom.vertices[k][i];
    *count = static_cast<int32_t>(dom.vertices.size());
    return MPT_OK;
}

void mpt_partition_options_init(mpt_partition_options *options) {
    if (!options) return;
    ToleranceConfig t;
    options->eps_a = 0.0;
    options->eps_r = 0.0;
    options->mode = MPT_MODE_SEMI_EXPLICIT;
    options->workers = 1;
    options->max_depth = t.max_depth;
    options->min_cell_volume = t.min_cell_volume;
    options->solver_tol = t.solver_tol;
    options->geom_tol = t.geom_tol;
    options->rel_denominator_floor = t.rel_denominator_floor;
    options->progress_csv = nullptr;
}

mpt_status mpt_partition(const mpt_problem *problem,
                         const mpt_partition_options *options, mpt_tree **out) {
    if (!problem || !options || !out) {
        set_error("null argument");
        return MPT_ERR_INVALID_ARG;
    }
    return guarded([&] {
        RefineConfig rc;
        rc.mode = options->mode == MPT_MODE_EXPLICIT ? RefineMode::Explicit
                                                     : RefineMode::SemiExplicit;
        rc.tolerances = tolerances_from(*options);
        rc.parallel_workers = options->workers < 1 ? 1 : options->workers;
        std::string csv =
            options->progress_csv ? options->progress_csv : std::string();
        auto t = std::make_unique<mpt_tree>();
        t->tree = run_partition(problem->tmpl, rc, csv);
        t->meta = make_meta(*t->tree, *problem->tmpl);
        *out = t.release();
    });
}

void mpt_tree_free(mpt_tree *tree) { delete tree; }

mpt_status mpt_tree_save(const mpt_tree *tree, const mpt_problem *problem,
                         const char *path, int storage_model,
                         uint64_t *bytes_written) {
    if (!tree || !path) {
        set_error("null argument");
        return MPT_ERR_INVALID_ARG;
    }
    return guarded([&] {
        if (storage_model != 1 && storage_model != 2)
            throw InvalidArgumentError("storage model must be 1 or 2");
        TreeFileMeta meta = tree->meta;
        if (problem) meta = make_meta(*tree->tree, *problem->tmpl);
        const auto bytes =
            save_tree(*tree->tree, meta, path,
                      static_cast<StorageModel>(storage_model));
        if (bytes_written) *bytes_written = bytes;
    });
}

mpt_status mpt_tree_load(const char *path, mpt_tree **out) {
    if (!path || !out) {
        set_error("null argument");
        return MPT_ERR_INVALID_ARG;
    }
    return guarded([&] {
        auto loaded = load_tree(path);
        auto t = std::make_unique<mpt_tree>();
        t->tree = std::move(loaded.tree);
        t->meta = loaded.meta;
        *out = t.release();
    });
}

mpt_status mpt_tree_get_stats(const mpt_tree *tree, mpt_tree_stats *stats) {
    if (!tree || !stats) {
        set_error("null argument");
        return MPT_ERR_INVALID_ARG;
    }
    return guarded([&] {
        TreeStats st = tree->tree->stats();
        stats->depth = st.tau;
        stats->leaves = st.lambda;
        stats->nodes = st.node_count;
        stats->vertices = st.vertex_count;
        stats->closed_volume_fraction = st.closed_volume_fraction;
        stats->wall_time_s = st.wall_time_s;
        stats->solves_total = 0;
        for (const auto &[k, v] : st.solve_counts) stats->solves_total += v;
        stats->mode = static_cast<int32_t>(tree->tree->mode());
        stats->p = static_cast<int32_t>(tree->meta.p);
        stats->m = static_cast<int32_t>(tree->meta.m);
        stats->n_out = static_cast<int32_t>(tree->meta.n_out);
    });
}

mpt_status mpt_tree_predict_size(const mpt_tree *tree,
                                 const mpt_problem *problem, int storage_model,
                                 uint64_t *bytes) {
    if (!tree || !bytes) {
        set_error("null argument");
        return MPT_ERR_INVALID_ARG;
    }
    return guarded([&] {
        if (storage_model != 1 && storage_model != 2)
            throw InvalidArgumentError("storage model must be 1 or 2");
        TreeFileMeta meta = tree->meta;
        if (problem) meta = make_meta(*tree->tree, *problem->tmpl);
        *bytes = predict_file_size(*tree->tree, meta,
                                   static_cast<StorageModel>(storage_model));
    });
}

mpt_status mpt_locate(const mpt_tree *tree, const double *theta, int32_t p,
                      uint8_t *delta_bits, uint32_t *leaf_id) {
    if (!tree || !theta) {
        set_error("null argument");
        return MPT_ERR_INVALID_ARG;
    }
    return guarded([&] {
        if (p != static_cast<int32_t>(tree->meta.p))
            throw InvalidArgumentError("theta dimension mismatch");
        Vec t(p);
        for (int32_t i = 0; i < p; ++i) t[i] = theta[i];
        const NodeId leaf = tree->tree->locate(t);
        if (leaf_id) *leaf_id = leaf;
        const auto &payload = tree->tree->node(leaf).payload;
        if (payload && delta_bits) copy_delta(delta_bits, payload->delta_bits);
    });
}

mpt_status mpt_eval_semi_explicit(const mpt_tree *tree,
                                  const mpt_problem *problem,
                                  const double *theta, uint8_t *delta_bits,
                                  double *x, double *value, double *t_query_s,
                                  double *t_solve_s) {
    if (!tree || !problem || !theta) {
        set_error("null argument");
        return MPT_ERR_INVALID_ARG;
    }
    return guarded([&] {
        Vec t(problem->tmpl->p);
        for (Index i = 0; i < t.size(); ++i) t[i] = theta[i];
        ToleranceConfig cfg;
        SemiExplicitResult r =
            eval_semi_explicit(*tree->tree, *problem->tmpl, t, cfg);
        copy_delta(delta_bits, r.delta);
        if (x)
            for (Index i = 0; i < r.x.size(); ++i) x[i] = r.x[i];
        if (value) *value = r.value;
        if (t_query_s) *t_query_s = r.timings.query_s;
        if (t_solve_s) *t_solve_s = r.timings.solve_s;
    });
}

mpt_status mpt_eval_explicit(const mpt_tree *tree, const double *theta,
                             uint8_t *delta_bits, double *x_out,
                             int32_t x_out_capacity, int32_t *x_out_len,
                             double *t_query_s) {
    if (!tree || !theta) {
        set_error("null argument");
        return MPT_ERR_INVALID_ARG;
    }
    return guarded([&] {
        Vec t(tree->meta.p);
        for (Index i = 0; i < t.size(); ++i) t[i] = theta[i];
        ExplicitResult r = eval_explicit(*tree->tree, t);
        copy_delta(delta_bits, r.delta);
        if (x_out) {
            if (x_out_capacity < static_cast<int32_t>(r.x.size()))
                throw InvalidArgumentError("x_out buffer too small");
            for (Index i = 0; i < r.x.size(); ++i) x_out[i] = r.x[i];
        }
        if (x_out_len) *x_out_len = static_cast<int32_t>(r.x.size());
        if (t_query_s) *t_query_s = r.timings.query_s;
    });
}

mpt_status mpt_eval_implicit(const mpt_problem *problem, const double *theta,
                             uint8_t *delta_bits, double *x, double *value,
                             double *t_total_s) {
    if (!problem || !theta) {
        set_error("null argument");
        return MPT_ERR_INVALID_ARG;
    }
    mpt_status rc = MPT_OK;
    const mpt_status g = guarded([&] {
        Vec t(problem->tmpl->p);
        for (Index i = 0; i < t.size(); ++i) t[i] = theta[i];
        ToleranceConfig cfg;
        ImplicitResult r = eval_implicit(*problem->tmpl, t, cfg);
        if (t_total_s) *t_total_s = r.timings.total_s();
        if (r.status == SolveStatus::Infeasible) {
            set_error("no admissible commutation is feasible at theta");
            rc = MPT_ERR_INFEASIBLE;
            return;
        }
        if (r.status != SolveStatus::Optimal)
            throw NumericalError("implicit enumeration failed");
        copy_delta(delta_bits, r.delta);
        if (x)
            for (Index i = 0; i < r.x.size(); ++i) x[i] = r.x[i];
        if (value) *value = r.value;
    });
    return g != MPT_OK ? g : rc;
}

void mpt_sim_options_init(mpt_sim_options *options) {
    if (!options) return;
    options->steps = 100;
    options->seed = 0;
    options->disturbance = 0.0;
    options->trajectory_csv = nullptr;
}

mpt_status mpt_simulate(const mpt_problem *problem, const mpt_tree *tree,
                        int controller, const double *x0,
                        const mpt_sim_options *options, double *fuel,
                        int32_t *exited_domain) {
    if (!problem || !x0 || !options) {
        set_error("null argument");
        return MPT_ERR_INVALID_ARG;
    }
    return guarded([&] {
        ControllerKind kind;
        switch (controller) {
        case 0: kind = ControllerKind::Implicit; break;
        case 1: kind = ControllerKind::SemiExplicit; break;
        case 2: kind = ControllerKind::Explicit; break;
        default: throw InvalidArgumentError("controller must be 0, 1 or 2");
        }
        Vec x(problem->tmpl->p);
        for (Index i = 0; i < x.size(); ++i) x[i] = x0[i];
        SimulatorOptions so;
        so.steps = options->steps;
        so.seed = options->seed;
        so.disturbance = options->disturbance;
        std::shared_ptr<std::ofstream> csv;
        if (options->trajectory_csv) {
            csv = std::make_shared<std::ofstream>(options->trajectory_csv,
                                                  std::ios::trunc);
            if (!*csv)
                throw IoError(std::string("cannot open trajectory CSV: ") +
                              options->trajectory_csv);
            (*csv) << "step";
            for (Index i = 0; i < problem->tmpl->p; ++i) (*csv) << ",x" << i;
            (*csv) << ",dv,fuel,projected\n";
            so.trace = [csv](int step, const Vec &state, double dv, double f,
                             bool projected) {
                (*csv) << step;
                for (Index i = 0; i < state.size(); ++i)
                    (*csv) << ',' << state[i];
                (*csv) << ',' << dv << ',' << f << ',' << (projected ? 1 : 0)
                       << '\n';
            };
        }
        ToleranceConfig cfg;
        SimResult r = simulate_closed_loop(
            *problem->tmpl, tree ? tree->tree.get() : nullptr, kind, x, cfg, so);
        if (fuel) *fuel = r.fuel;
        if (exited_domain) *exited_domain = r.exited_domain ? 1 : 0;
    });
}

} // extern "C"
