#include "mpt/phase1.hpp"

#include "mpt/library.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <random>

using namespace mpt;

namespace {

Simplex segment_simplex(VertexPool &pool, double lo, double hi) {
    return Simplex({pool.insert(Vec::Constant(1, lo)),
                    pool.insert(Vec::Constant(1, hi))},
                   pool);
}

} // namespace

TEST_CASE("shoot: full travel, clipped travel, infeasible centroid") {
    ToleranceConfig cfg;
    VertexPool pool(1);
    auto D = segment_simplex(pool, -1.0, 1.0);

    auto toy_a = make_toy_a();
    for (Index v = 0; v <= 1; ++v) {
        auto a = shoot(*toy_a, 0, D, v, cfg);
        REQUIRE(a);
        CHECK(*a == doctest::Approx(1.0).epsilon(1e-6));
    }

    auto toy_b = make_toy_b();
    // Toward vertex at +1 the cut theta <= 0.25 clips alpha to 0.25.
    auto a = shoot(*toy_b, 0, D, 1, cfg);
    REQUIRE(a);
    CHECK(*a == doctest::Approx(0.25).epsilon(1e-6));

    VertexPool pool2(1);
    auto D2 = segment_simplex(pool2, 0.5, 1.0); // centroid 0.75 > 0.25
    CHECK_FALSE(shoot(*toy_b, 0, D2, 0, cfg).has_value());
}

TEST_CASE("maxvol: exact tie resolves to the first commutation") {
    ToleranceConfig cfg;
    VertexPool pool(1);
    auto D = segment_simplex(pool, -1.0, 1.0);
    auto toy_b = make_toy_b();
    auto best = maxvol(*toy_b, D, cfg);
    REQUIRE(best);
    CHECK(*best == 0); // scores 1.25 vs 1.25, order breaks the tie
}

TEST_CASE("maxvol: centroid-infeasible commutation is skipped") {
    ToleranceConfig cfg;
    VertexPool pool(1);
    auto D = segment_simplex(pool, 0.3, 1.0); // centroid 0.65
    auto toy_b = make_toy_b();
    auto best = maxvol(*toy_b, D, cfg);
    REQUIRE(best);
    CHECK(*best == 1);
}

TEST_CASE("maxvol: no feasible commutation anywhere") {
    ToleranceConfig cfg;
    VertexPool pool(1);
    // Gap construction: both cuts exclude (-0.1, 0.1); centroid 0 infeasible
    // for both commutations.
    auto D = segment_simplex(pool, -0.05, 0.05);
    auto gap = make_toy_b_gap();
    CHECK_FALSE(maxvol(*gap, D, cfg).has_value());
}

TEST_CASE("feasible_everywhere: boundary-exact containment") {
    ToleranceConfig cfg;
    VertexSolutionCache cache;
    auto toy_b = make_toy_b();

    VertexPool pool(1);
    auto exact = segment_simplex(pool, -1.0, 0.25);
    CHECK(feasible_everywhere(*toy_b, 0, exact, cfg, cache));

    auto wide = segment_simplex(pool, -1.0, 1.0);
    CHECK_FALSE(feasible_everywhere(*toy_b, 0, wide, cfg, cache));
}

TEST_CASE("run_phase1 on toy_a closes the initial cells untouched") {
    auto tmpl = make_toy_a();
    ToleranceConfig cfg;
    VertexSolutionCache cache;
    auto tree = run_phase1(tmpl, cfg, cache);
    auto st = tree->stats();
    CHECK(st.lambda == 1);
    CHECK(st.tau == 0);
    CHECK(st.closed_volume_fraction == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("run_phase1 on toy_b: sound cells, full coverage") {
    auto tmpl = make_toy_b();
    ToleranceConfig cfg;
    VertexSolutionCache cache;
    auto tree = run_phase1(tmpl, cfg, cache);
    CHECK(tree->stats().closed_volume_fraction ==
          doctest::Approx(1.0).epsilon(1e-9));

    // Lemma-2 soundness: the assigned commutation is feasible on samples of
    // every leaf; right of the cut only delta=1 qualifies.
    std::mt19937_64 rng(3);
    for (NodeId id = 0; id < tree->node_count(); ++id) {
        const auto &n = tree->node(id);
        if (!n.is_leaf()) continue;
        REQUIRE(n.payload->kind == LeafKind::ClosedFeasible);
        const Index delta = *n.payload->delta_index;
        for (int i = 0; i < 20; ++i) {
            Vec theta = mpt::testing::sample_in_simplex(*n.simplex, rng);
            CHECK(feasible_at(*tmpl, delta, theta, cfg));
        }
        if (n.simplex->centroid()[0] > 0.26) CHECK(delta == 1);
        if (n.simplex->centroid()[0] < -0.26) CHECK(delta == 0);
    }
}

TEST_CASE("run_phase1 monotone progress: every event closes or splits") {
    auto tmpl = make_toy_b();
    ToleranceConfig cfg;
    VertexSolutionCache cache;
    auto tree = run_phase1(tmpl, cfg, cache);
    std::uint64_t closed = 0;
    for (const auto &ev : tree->events()) {
        CHECK(ev.kind != ProgressKind::Reassign); // phase 1 never reassigns
        CHECK(ev.closed_leaves >= closed);
        closed = ev.closed_leaves;
    }
}

TEST_CASE("run_phase1: uncovered domain stops with a witness") {
    auto tmpl = make_toy_b_wide();
    ToleranceConfig cfg;
    VertexSolutionCache cache;
    try {
        auto tree = run_phase1(tmpl, cfg, cache);
        FAIL("expected DomainNotCoveredError");
    } catch (const DomainNotCoveredError &e) {
        // The witness centroid must actually be infeasible for both deltas.
        CHECK_FALSE(feasible_at(*tmpl, Delta{0}, e.witness_centroid, cfg));
        CHECK_FALSE(feasible_at(*tmpl, Delta{1}, e.witness_centroid, cfg));
        CHECK(std::abs(e.witness_centroid[0]) > 1.25);
    }
}

TEST_CASE("run_phase1: disjoint feasibility cuts also stop with a witness") {
    auto tmpl = make_toy_b_gap();
    ToleranceConfig cfg;
    VertexSolutionCache cache;
    try {
        auto tree = run_phase1(tmpl, cfg, cache);
        FAIL("expected DomainNotCoveredError");
    } catch (const DomainNotCoveredError &e) {
        CHECK(std::abs(e.witness_centroid[0]) < 0.1);
    }
}

TEST_CASE("run_phase1 depth safeguard") {
    // Narrow off-center overlap [0.05, 0.1]: the cells next to the
    // feasibility boundaries need about five bisection levels.
    auto tmpl = mpt::testing::make_two_parabola("toy_narrow", -1.0, 1.0,
                                                {{+1.0, 0.1}}, {{-1.0, -0.05}});
    ToleranceConfig cfg;
    VertexSolutionCache cache;
    {
        ToleranceConfig shallow = cfg;
        shallow.max_depth = 2;
        VertexSolutionCache c2;
        CHECK_THROWS_AS(run_phase1(tmpl, shallow, c2), DepthExceededError);
    }
    auto tree = run_phase1(tmpl, cfg, cache); // converges with the default
    CHECK(tree->stats().closed_volume_fraction ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK(tree->stats().tau >= 3);
}
