#include "mpt/runtime.hpp"

#include "mpt/library.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <random>

using namespace mpt;

TEST_CASE("semi-explicit evaluation on toy_a") {
    auto tmpl = make_toy_a();
    RefineConfig rc;
    rc.tolerances.eps_a = 0.05;
    auto tree = run_partition(tmpl, rc);

    auto r = eval_semi_explicit(*tree, *tmpl, Vec::Constant(1, -0.9),
                                rc.tolerances);
    CHECK(r.delta == Delta{0});
    CHECK(r.value == doctest::Approx(0.16).epsilon(1e-7));
    CHECK(r.timings.query_s >= 0.0);
    CHECK(r.timings.solve_s > 0.0);

    // Leaf vertex consistency: evaluation at a vertex matches the stored
    // vertex value.
    const NodeId leaf = tree->locate(Vec::Constant(1, -0.9));
    const auto &cell = *tree->node(leaf).simplex;
    const Vec v0 = cell.vertices().col(0);
    auto rv = eval_semi_explicit(*tree, *tmpl, v0, rc.tolerances);
    CHECK(rv.value ==
          doctest::Approx(toy_a_vstar_delta(v0[0], static_cast<int>(
                                                       rv.delta[0])))
              .epsilon(1e-7));

    CHECK_THROWS_AS(
        eval_semi_explicit(*tree, *tmpl, Vec::Constant(1, 1.5), rc.tolerances),
        OutOfDomainError);
}

TEST_CASE("explicit evaluation: vertices, centroid, cost bound") {
    auto tmpl = make_toy_a();
    RefineConfig rc;
    rc.mode = RefineMode::Explicit;
    rc.tolerances.eps_a = 0.05;
    auto tree = run_partition(tmpl, rc);

    // theta at a leaf vertex reproduces that vertex's decision vector.
    const NodeId leaf = tree->locate(Vec::Constant(1, 0.4));
    const auto &n = tree->node(leaf);
    for (Index j = 0; j < 2; ++j) {
        const Vec v = n.simplex->vertices().col(j);
        auto r = eval_explicit(*tree, v);
        CHECK(r.x[0] ==
              doctest::Approx(n.payload->vertex_solutions(0, j)).epsilon(1e-12));
    }
    // Centroid gives the mean of the vertex solutions.
    auto rc_ = eval_explicit(*tree, n.simplex->centroid());
    CHECK(rc_.x[0] ==
          doctest::Approx(n.payload->vertex_solutions.row(0).mean())
              .epsilon(1e-9));

    // f(theta, x*, delta) <= Vbar_delta(theta) + 1e-8 on samples. For the
    // toys the cost is the epigraph variable itself and Vbar is the linear
    // interpolation of the vertex costs.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const Vec theta = Vec::Constant(1, unif(rng));
        auto r = eval_explicit(*tree, theta);
        const NodeId lf = tree->locate(theta);
        const auto &node = tree->node(lf);
        const auto alpha = node.simplex->barycentric(theta).alpha;
        double vbar = 0.0;
        for (Index j = 0; j < 2; ++j) {
            const double vtheta = node.simplex->vertices()(0, j);
            vbar += alpha[j] *
                    toy_a_vstar_delta(vtheta,
                                      static_cast<int>(node.payload->delta_bits[0]));
        }
        CHECK(r.x[0] <= vbar + 1e-8);
    }

    CHECK_THROWS_AS(eval_explicit(*tree, Vec::Constant(1, -2.0)),
                    OutOfDomainError);
}

TEST_CASE("explicit evaluation requires an explicit tree") {
    auto tmpl = make_toy_a();
    RefineConfig rc;
    rc.tolerances.eps_a = 0.05;
    auto tree = run_partition(tmpl, rc); // semi-explicit
    CHECK_THROWS_AS(eval_explicit(*tree, Vec::Constant(1, 0.0)),
                    ModeMismatchError);
}

TEST_CASE("implicit evaluation") {
    auto tmpl = make_toy_a();
    ToleranceConfig cfg;
    auto r = eval_implicit(*tmpl, Vec::Constant(1, 0.0), cfg);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.value == doctest::Approx(0.25).epsilon(1e-7));
    CHECK(r.timings.total_s() > 0.0);

    auto gap = make_toy_b_gap();
    auto ri = eval_implicit(*gap, Vec::Constant(1, 0.0), cfg);
    CHECK(ri.status == SolveStatus::Infeasible);
}

TEST_CASE("agreement: semi-explicit value within the epsilon bound of the "
          "implicit baseline") {
    auto tmpl = make_toy_b();
    RefineConfig rc;
    rc.tolerances.eps_a = 0.03;
    rc.tolerances.eps_r = 0.1;
    auto tree = run_partition(tmpl, rc);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        const Vec theta = Vec::Constant(1, unif(rng));
        auto se = eval_semi_explicit(*tree, *tmpl, theta, rc.tolerances);
        auto im = eval_implicit(*tmpl, theta, rc.tolerances);
        REQUIRE(im.status == SolveStatus::Optimal);
        const double bound =
            std::max(rc.tolerances.eps_a, rc.tolerances.eps_r * im.value);
        CHECK(se.value - im.value <= bound + 10 * rc.tolerances.solver_tol);
    }
}
