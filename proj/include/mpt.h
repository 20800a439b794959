/*
 * mpt — multiparametric partition-tree control library.
 *
 * C interface over the partitioning engine and the online evaluators.
 * Handles are opaque; every function returns an mpt_status, with outputs
 * through pointers. All functions are thread-safe for concurrent use on
 * distinct handles; evaluation functions are additionally safe concurrently
 * on a shared tree/problem pair.
 */
#ifndef MPT_H
#define MPT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MPT_API __declspec(dllexport)
#else
#define MPT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mpt_status {
    MPT_OK = 0,
    MPT_ERR_INVALID_ARG = 1,
    MPT_ERR_DOMAIN_NOT_COVERED = 2,
    MPT_ERR_NONCONVERGENCE = 3,
    MPT_ERR_IO = 4,
    MPT_ERR_NUMERICAL = 5,
    MPT_ERR_OUT_OF_DOMAIN = 6,
    MPT_ERR_INFEASIBLE = 7,
    MPT_ERR_MODE_MISMATCH = 8,
    MPT_ERR_UNKNOWN = 9
} mpt_status;

typedef enum mpt_mode {
    MPT_MODE_SEMI_EXPLICIT = 0,
    MPT_MODE_EXPLICIT = 1
} mpt_mode;

typedef enum mpt_storage_model { MPT_STORAGE_M1 = 1, MPT_STORAGE_M2 = 2 } mpt_storage_model;

typedef struct mpt_problem mpt_problem;
typedef struct mpt_tree mpt_tree;

/* Last error message for the calling thread (valid until the next call). */
MPT_API const char *mpt_last_error(void);
MPT_API const char *mpt_status_name(mpt_status status);

/* ------------------------------------------------------------------ */
/* Problems                                                            */
/* ------------------------------------------------------------------ */

/* Builtin names: toy_a, toy_b, toy_b_wide, toy_b_gap, toy_c, cwh.
 * Anything else is treated as a path to a problem JSON file. */
MPT_API mpt_status mpt_problem_create(const char *name_or_path,
                                      mpt_problem **out);

typedef struct mpt_cwh_params {
    double omega0;          /* orbital rate [rad/s], default 0.00113 */
    double t_sample;        /* impulse period [s], default 100 */
    int horizon;            /* prediction steps, default 3 */
    double dv_min;          /* impulse bit [m/s], default 2e-5 */
    double dv_max;          /* thruster bound [m/s], default 2e-3 */
    double terminal_weight; /* terminal norm penalty, default 1e-2 */
    double domain_scale;    /* shrinks Theta about the origin, default 1 */
} mpt_cwh_params;

MPT_API void mpt_cwh_params_init(mpt_cwh_params *params);
MPT_API mpt_status mpt_problem_create_cwh(const mpt_cwh_params *params,
                                          mpt_problem **out);
MPT_API void mpt_problem_free(mpt_problem *problem);

/* p: parameter dim; n: decision dim; m: commutation bits;
 * n_admissible: admissible commutation count; n_out: online output width. */
MPT_API mpt_status mpt_problem_info(const mpt_problem *problem, int32_t *p,
                                    int32_t *n, int32_t *m,
                                    int32_t *n_admissible, int32_t *n_out);
MPT_API mpt_status mpt_problem_label(const mpt_problem *problem, char *buf,
                                     size_t bufsize);
/* Domain vertices, row-major count x p. Query count with vertices == NULL. */
MPT_API mpt_status mpt_problem_domain(const mpt_problem *problem,
                                      double *vertices, int32_t *count);

/* ------------------------------------------------------------------ */
/* Offline partitioning                                                */
/* ------------------------------------------------------------------ */

typedef struct mpt_partition_options {
    double eps_a;
    double eps_r;
    int mode;    /* mpt_mode */
    int workers; /* >= 1 */
    int max_depth;
    double min_cell_volume;
    double solver_tol;
    double geom_tol;
    double rel_denominator_floor;
    const char *progress_csv; /* optional path, may be NULL */
} mpt_partition_options;

MPT_API void mpt_partition_options_init(mpt_partition_options *options);

MPT_API mpt_status mpt_partition(const mpt_problem *problem,
                                 const mpt_partition_options *options,
                                 mpt_tree **out);
MPT_API void mpt_tree_free(mpt_tree *tree);

MPT_API mpt_status mpt_tree_save(const mpt_tree *tree, const mpt_problem *problem,
                                 const char *path, int storage_model,
                                 uint64_t *bytes_written);
MPT_API mpt_status mpt_tree_load(const char *path, mpt_tree **out);

typedef struct mpt_tree_stats {
    int32_t depth;
    uint64_t leaves;
    uint64_t nodes;
    uint64_t vertices;
    double closed_volume_fraction;
    double wall_time_s;
    uint64_t solves_total;
    int32_t mode; /* mpt_mode, or 2 for a Phase-I feasible map */
    int32_t p;
    int32_t m;
    int32_t n_out;
} mpt_tree_stats;

MPT_API mpt_status mpt_tree_get_stats(const mpt_tree *tree,
                                      mpt_tree_stats *stats);

/* Predicted file size from the documented field layout. */
MPT_API mpt_status mpt_tree_predict_size(const mpt_tree *tree,
                                         const mpt_problem *problem,
                                         int storage_model, uint64_t *bytes);

/* ------------------------------------------------------------------ */
/* Online evaluation                                                   */
/* ------------------------------------------------------------------ */

/* Point location only: fills delta_bits[m] and the leaf id. */
MPT_API mpt_status mpt_locate(const mpt_tree *tree, const double *theta,
                              int32_t p, uint8_t *delta_bits,
                              uint32_t *leaf_id);

/* Tree query + one conic solve. x has length n, delta_bits length m. */
MPT_API mpt_status mpt_eval_semi_explicit(const mpt_tree *tree,
                                          const mpt_problem *problem,
                                          const double *theta,
                                          uint8_t *delta_bits, double *x,
                                          double *value, double *t_query_s,
                                          double *t_solve_s);

/* Tree query + convex combination; no optimization. x_out must hold
 * n_out values (stats.n_out for loaded trees, n for in-memory explicit
 * trees built against a problem with full output map). */
MPT_API mpt_status mpt_eval_explicit(const mpt_tree *tree, const double *theta,
                                     uint8_t *delta_bits, double *x_out,
                                     int32_t x_out_capacity, int32_t *x_out_len,
                                     double *t_query_s);

/* Brute-force enumeration baseline. */
MPT_API mpt_status mpt_eval_implicit(const mpt_problem *problem,
                                     const double *theta, uint8_t *delta_bits,
                                     double *x, double *value,
                                     double *t_total_s);

/* ------------------------------------------------------------------ */
/* Closed-loop simulation                                              */
/* ------------------------------------------------------------------ */

typedef struct mpt_sim_options {
    int32_t steps;
    uint64_t seed;
    double disturbance;         /* fraction of domain half-width, 0 = none */
    const char *trajectory_csv; /* optional path, may be NULL */
} mpt_sim_options;

MPT_API void mpt_sim_options_init(mpt_sim_options *options);

/* controller: 0 implicit (tree may be NULL), 1 semi-explicit, 2 explicit. */
MPT_API mpt_status mpt_simulate(const mpt_problem *problem,
                                const mpt_tree *tree, int controller,
                                const double *x0, const mpt_sim_options *options,
                                double *fuel, int32_t *exited_domain);

#ifdef __cplusplus
}
#endif

#endif /* MPT_H */
