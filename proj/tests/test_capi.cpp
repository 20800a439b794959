#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mpt.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

extern "C" int mpt_c_linkage_smoke(void);

namespace {

struct Problem {
    mpt_problem *p = nullptr;
    ~Problem() { mpt_problem_free(p); }
};

struct Tree {
    mpt_tree *t = nullptr;
    ~Tree() { mpt_tree_free(t); }
};

std::string slurp(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("header is consumable from C") { CHECK(mpt_c_linkage_smoke() == 0); }

TEST_CASE("problem creation and info") {
    Problem p;
    REQUIRE(mpt_problem_create("toy_b", &p.p) == MPT_OK);
    int32_t pd = 0, n = 0, m = 0, na = 0, no = 0;
    REQUIRE(mpt_problem_info(p.p, &pd, &n, &m, &na, &no) == MPT_OK);
    CHECK(pd == 1);
    CHECK(na == 2);
    char label[32];
    REQUIRE(mpt_problem_label(p.p, label, sizeof label) == MPT_OK);
    CHECK(std::string(label) == "toy_b");

    int32_t count = 0;
    REQUIRE(mpt_problem_domain(p.p, nullptr, &count) == MPT_OK);
    CHECK(count == 2);
    std::vector<double> verts(2);
    REQUIRE(mpt_problem_domain(p.p, verts.data(), &count) == MPT_OK);
    CHECK(verts[0] == -1.0);
    CHECK(verts[1] == 1.0);

    mpt_problem *bad = nullptr;
    CHECK(mpt_problem_create("/definitely/not/here.json", &bad) == MPT_ERR_IO);
    CHECK(std::string(mpt_last_error()).size() > 0);
}

TEST_CASE("partition, stats, save, load, eval") {
    Problem p;
    REQUIRE(mpt_problem_create("toy_a", &p.p) == MPT_OK);
    mpt_partition_options opts;
    mpt_partition_options_init(&opts);
    opts.eps_a = 0.05;

    Tree t;
    REQUIRE(mpt_partition(p.p, &opts, &t.t) == MPT_OK);
    mpt_tree_stats st;
    REQUIRE(mpt_tree_get_stats(t.t, &st) == MPT_OK);
    CHECK(st.leaves >= 1);
    CHECK(st.closed_volume_fraction == doctest::Approx(1.0));
    CHECK(st.mode == MPT_MODE_SEMI_EXPLICIT);

    uint64_t bytes = 0, predicted = 0;
    REQUIRE(mpt_tree_save(t.t, p.p, "/tmp/mpt_capi.bin", MPT_STORAGE_M1,
                          &bytes) == MPT_OK);
    REQUIRE(mpt_tree_predict_size(t.t, p.p, MPT_STORAGE_M1, &predicted) ==
            MPT_OK);
    CHECK(bytes == predicted);

    Tree loaded;
    REQUIRE(mpt_tree_load("/tmp/mpt_capi.bin", &loaded.t) == MPT_OK);

    const double theta = -0.9;
    uint8_t delta = 9;
    double x = 0, value = 0, tq = 0, ts = 0;
    REQUIRE(mpt_eval_semi_explicit(loaded.t, p.p, &theta, &delta, &x, &value,
                                   &tq, &ts) == MPT_OK);
    CHECK(delta == 0);
    CHECK(value == doctest::Approx(0.16).epsilon(1e-6));

    uint32_t leaf = 0;
    REQUIRE(mpt_locate(loaded.t, &theta, 1, &delta, &leaf) == MPT_OK);

    const double outside = 1.5;
    CHECK(mpt_locate(loaded.t, &outside, 1, &delta, &leaf) ==
          MPT_ERR_OUT_OF_DOMAIN);

    double vi = 0, ti = 0;
    REQUIRE(mpt_eval_implicit(p.p, &theta, &delta, &x, &vi, &ti) == MPT_OK);
    CHECK(vi == doctest::Approx(0.16).epsilon(1e-6));

    std::remove("/tmp/mpt_capi.bin");
}

TEST_CASE("explicit evaluation through the C API") {
    Problem p;
    REQUIRE(mpt_problem_create("toy_a", &p.p) == MPT_OK);
    mpt_partition_options opts;
    mpt_partition_options_init(&opts);
    opts.eps_a = 0.05;
    opts.mode = MPT_MODE_EXPLICIT;
    Tree t;
    REQUIRE(mpt_partition(p.p, &opts, &t.t) == MPT_OK);

    const double theta = 0.4;
    uint8_t delta = 0;
    double x = 0, tq = 0;
    int32_t len = 0;
    REQUIRE(mpt_eval_explicit(t.t, &theta, &delta, &x, 1, &len, &tq) == MPT_OK);
    CHECK(len == 1);
    CHECK(delta == 1);
    CHECK(x >= 0.0);

    // Mode mismatch: semi-explicit tree queried explicitly.
    mpt_partition_options so;
    mpt_partition_options_init(&so);
    so.eps_a = 0.05;
    Tree semi;
    REQUIRE(mpt_partition(p.p, &so, &semi.t) == MPT_OK);
    CHECK(mpt_eval_explicit(semi.t, &theta, &delta, &x, 1, &len, &tq) ==
          MPT_ERR_MODE_MISMATCH);
}

TEST_CASE("error codes for the failure paths") {
    mpt_partition_options opts;
    mpt_partition_options_init(&opts);
    opts.eps_a = 0.05;

    Problem wide;
    REQUIRE(mpt_problem_create("toy_b_wide", &wide.p) == MPT_OK);
    Tree t1;
    CHECK(mpt_partition(wide.p, &opts, &t1.t) == MPT_ERR_DOMAIN_NOT_COVERED);

    Problem gap;
    REQUIRE(mpt_problem_create("toy_c", &gap.p) == MPT_OK);
    opts.max_depth = 10;
    Tree t2;
    CHECK(mpt_partition(gap.p, &opts, &t2.t) == MPT_ERR_NONCONVERGENCE);

    // Invalid tolerance configuration.
    opts.eps_a = 0.0;
    opts.eps_r = 0.0;
    Problem toy;
    REQUIRE(mpt_problem_create("toy_a", &toy.p) == MPT_OK);
    Tree t3;
    CHECK(mpt_partition(toy.p, &opts, &t3.t) == MPT_ERR_INVALID_ARG);

    // Implicit eval outside every feasible set.
    Problem g2;
    REQUIRE(mpt_problem_create("toy_b_gap", &g2.p) == MPT_OK);
    const double theta = 0.0;
    double v = 0, tt = 0;
    CHECK(mpt_eval_implicit(g2.p, &theta, nullptr, nullptr, &v, &tt) ==
          MPT_ERR_INFEASIBLE);
}

TEST_CASE("simulation through the C API") {
    Problem p;
    REQUIRE(mpt_problem_create("cwh", &p.p) == MPT_OK);
    mpt_sim_options so;
    mpt_sim_options_init(&so);
    so.steps = 5;
    const double x0[2] = {0.0, 0.0};
    double fuel = -1;
    int32_t exited = -1;
    REQUIRE(mpt_simulate(p.p, nullptr, 0, x0, &so, &fuel, &exited) == MPT_OK);
    CHECK(fuel <= 1e-9);
    CHECK(exited == 0);
}

TEST_CASE("CLI end-to-end: partition, eval, inspect, determinism, exit codes") {
    const char *cli = std::getenv("MPT_CLI");
    REQUIRE_MESSAGE(cli != nullptr, "MPT_CLI must point at the CLI binary");
    const std::string exe(cli);
    auto run = [&](const std::string &args) {
        const std::string cmd = exe + " " + args + " >/dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        return WEXITSTATUS(rc);
    };

    CHECK(run("partition --problem toy_a --eps-a 0.05 --mode semi --out "
              "/tmp/mpt_cli_a.bin --progress-csv /tmp/mpt_cli_a.csv") == 0);
    CHECK(run("eval --tree /tmp/mpt_cli_a.bin --problem toy_a --theta -0.9") ==
          0);
    CHECK(run("inspect --tree /tmp/mpt_cli_a.bin") == 0);

    // Byte-identical repeat runs (fixed seed, single worker).
    CHECK(run("partition --problem toy_a --eps-a 0.05 --out "
              "/tmp/mpt_cli_b.bin") == 0);
    CHECK(run("partition --problem toy_a --eps-a 0.05 --out "
              "/tmp/mpt_cli_c.bin") == 0);
    CHECK(slurp("/tmp/mpt_cli_b.bin") == slurp("/tmp/mpt_cli_c.bin"));

    // Exit code conventions.
    CHECK(run("partition --problem toy_b_wide --eps-a 0.05 --out "
              "/tmp/mpt_cli_w.bin") == 2);
    CHECK(run("partition --problem toy_c --eps-a 0.05 --max-depth 10 --out "
              "/tmp/mpt_cli_nc.bin") == 3);
    CHECK(run("eval --tree /tmp/missing.bin --theta 0") == 4);
    CHECK(run("partition --problem toy_a --out /tmp/x.bin") == 1); // eps unset

    // Explicit partition + simulate + export-plot-data on the toy problem is
    // meaningless (no plant); use cwh for simulate smoke.
    CHECK(run("simulate --problem cwh --x0 0,0 --steps 3") == 0);

    std::remove("/tmp/mpt_cli_a.bin");
    std::remove("/tmp/mpt_cli_a.csv");
    std::remove("/tmp/mpt_cli_b.bin");
    std::remove("/tmp/mpt_cli_c.bin");
}
