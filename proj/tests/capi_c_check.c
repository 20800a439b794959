/* Compile-time check that the public header is consumable from C, plus a
 * couple of smoke calls linked into the C API test binary. */
#include "mpt.h"

#include <string.h>

int mpt_c_linkage_smoke(void) {
    mpt_partition_options opts;
    mpt_partition_options_init(&opts);
    if (opts.workers != 1) return 1;

    mpt_sim_options sim;
    mpt_sim_options_init(&sim);
    if (sim.steps != 100) return 1;

    mpt_cwh_params params;
    mpt_cwh_params_init(&params);
    if (params.horizon != 3) return 1;

    if (strcmp(mpt_status_name(MPT_OK), "ok") != 0) return 1;

    mpt_problem *p = NULL;
    if (mpt_problem_create("toy_a", &p) != MPT_OK) return 1;
    int32_t pdim = 0, n = 0, m = 0;
    if (mpt_problem_info(p, &pdim, &n, &m, NULL, NULL) != MPT_OK) return 1;
    mpt_problem_free(p);
    return (pdim == 1 && n == 1 && m == 1) ? 0 : 1;
}
