#include "mpt/geometry.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

using namespace mpt;

namespace {

PolytopeV box2(double x0, double x1, double y0, double y1) {
    PolytopeV d;
    d.p = 2;
    for (double x : {x0, x1})
        for (double y : {y0, y1}) {
            Vec v(2);
            v << x, y;
            d.vertices.push_back(v);
        }
    return d;
}

Simplex tri(VertexPool &pool, std::initializer_list<std::pair<double, double>> pts) {
    std::vector<VertexId> ids;
    for (auto [x, y] : pts) {
        Vec v(2);
        v << x, y;
        ids.push_back(pool.insert(v));
    }
    return Simplex(ids, pool);
}

} // namespace

TEST_CASE("initial triangulation: simplex passes through") {
    PolytopeV d;
    d.p = 2;
    Vec a(2), b(2), c(2);
    a << 0, 0;
    b << 1, 0;
    c << 0, 1;
    d.vertices = {a, b, c};
    VertexPool pool(2);
    auto cells = initial_triangulation(d, pool);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].volume() == doctest::Approx(0.5));
}

TEST_CASE("initial triangulation: unit square -> 2 triangles, area 1") {
    VertexPool pool(2);
    auto cells = initial_triangulation(box2(0, 1, 0, 1), pool);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].volume() + cells[1].volume() == doctest::Approx(1.0));
}

TEST_CASE("initial triangulation: rectangle area 40") {
    VertexPool pool(2);
    auto cells = initial_triangulation(box2(-10, 10, -1, 1), pool);
    double total = 0;
    for (const auto &c : cells) total += c.volume();
    CHECK(total == doctest::Approx(40.0).epsilon(1e-9));
}

TEST_CASE("initial triangulation: 3-box Kuhn has 6 cells") {
    PolytopeV d;
    d.p = 3;
    for (double x : {0.0, 1.0})
        for (double y : {0.0, 2.0})
            for (double z : {0.0, 1.0}) {
                Vec v(3);
                v << x, y, z;
                d.vertices.push_back(v);
            }
    VertexPool pool(3);
    auto cells = initial_triangulation(d, pool);
    CHECK(cells.size() == 6);
    double total = 0;
    for (const auto &c : cells) total += c.volume();
    CHECK(total == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("initial triangulation: pentagon via Delaunay") {
    PolytopeV d;
    d.p = 2;
    for (int k = 0; k < 5; ++k) {
        Vec v(2);
        v << std::cos(2 * M_PI * k / 5), std::sin(2 * M_PI * k / 5);
        d.vertices.push_back(v);
    }
    VertexPool pool(2);
    auto cells = initial_triangulation(d, pool);
    CHECK(cells.size() == 3);
    double total = 0;
    for (const auto &c : cells) total += c.volume();
    const double area = 2.5 * std::sin(2 * M_PI / 5) * 0.5 * 2; // 5/2 sin(72deg)
    CHECK(total == doctest::Approx(area).epsilon(1e-9));

    // Every sampled interior point lies in at least one cell.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(-0.4, 0.4);
    for (int i = 0; i < 200; ++i) {
        Vec t(2);
        t << unif(rng), unif(rng);
        int hits = 0;
        for (const auto &c : cells) hits += c.contains(t, 1e-9) ? 1 : 0;
        CHECK(hits >= 1);
    }
}

TEST_CASE("initial triangulation: cocircular square goes through Delaunay "
          "with a jitter tie-break") {
    // A square plus its center: not a box (5 vertices), all corners
    // cocircular.
    PolytopeV d;
    d.p = 2;
    for (auto [x, y] : {std::pair{-1.0, -1.0}, {1.0, -1.0}, {-1.0, 1.0},
                        {1.0, 1.0}, {0.0, 0.0}}) {
        Vec v(2);
        v << x, y;
        d.vertices.push_back(v);
    }
    VertexPool pool(2);
    auto cells = initial_triangulation(d, pool);
    CHECK(cells.size() == 4);
    double total = 0;
    for (const auto &c : cells) total += c.volume();
    CHECK(total == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("degenerate domain is rejected") {
    PolytopeV d;
    d.p = 2;
    Vec a(2), b(2), c(2);
    a << 0, 0;
    b << 1, 1;
    c << 2, 2;
    d.vertices = {a, b, c};
    VertexPool pool(2);
    CHECK_THROWS_AS(initial_triangulation(d, pool), DegenerateDomainError);
}

TEST_CASE("longest edge selection and ties") {
    VertexPool pool(2);
    auto t = tri(pool, {{0, 0}, {1, 0}, {0, 1}});
    auto [i, j] = longest_edge(t);
    // Hypotenuse connects positions 1 and 2 (ids 1 and 2).
    CHECK(i == 1);
    CHECK(j == 2);

    // Equilateral: exact tie resolved to the smallest index pair.
    VertexPool pool2(2);
    auto eq = tri(pool2, {{0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2}});
    auto [a, b] = longest_edge(eq);
    CHECK(a == 0);
    CHECK(b == 1);

    VertexPool pool1(1);
    Vec lo = Vec::Constant(1, -1.0), hi = Vec::Constant(1, 1.0);
    Simplex seg({pool1.insert(lo), pool1.insert(hi)}, pool1);
    auto [s0, s1] = longest_edge(seg);
    CHECK(s0 == 0);
    CHECK(s1 == 1);
}

TEST_CASE("split at the longest-edge midpoint") {
    VertexPool pool(1);
    Vec lo = Vec::Constant(1, -1.0), hi = Vec::Constant(1, 1.0);
    Simplex seg({pool.insert(lo), pool.insert(hi)}, pool);
    auto r = split_longest_edge(seg, pool);
    CHECK(r.midpoint[0] == doctest::Approx(0.0));
    CHECK(r.first.volume() == doctest::Approx(1.0));
    CHECK(r.second.volume() == doctest::Approx(1.0));

    VertexPool pool2(2);
    auto t = tri(pool2, {{0, 0}, {1, 0}, {0, 1}});
    auto rt = split_longest_edge(t, pool2);
    CHECK(rt.first.volume() == doctest::Approx(0.25));
    CHECK(rt.second.volume() == doctest::Approx(0.25));

    // Shared-edge midpoints deduplicate in the pool.
    auto rt2 = split_longest_edge(t, pool2);
    CHECK(rt2.midpoint_id == rt.midpoint_id);
}

TEST_CASE("bisection halves volume (property)") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        VertexPool pool(3);
        std::vector<VertexId> ids;
        Mat V(3, 4);
        for (int j = 0; j < 4; ++j) {
            Vec v(3);
            v << unif(rng), unif(rng), unif(rng);
            V.col(j) = v;
        }
        Mat E(3, 3);
        for (int j = 0; j < 3; ++j) E.col(j) = V.col(j + 1) - V.col(0);
        if (std::abs(E.determinant()) < 1e-3) continue; // skip slivers
        for (int j = 0; j < 4; ++j) ids.push_back(pool.insert(V.col(j)));
        Simplex s(ids, pool);
        auto r = split_longest_edge(s, pool);
        const double ratio = r.first.volume() / s.volume();
        CHECK(ratio == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(r.first.volume() + r.second.volume() ==
              doctest::Approx(s.volume()).epsilon(1e-12));
    }
}

TEST_CASE("diameter halves within p(p+1)/2 bisection rounds") {
    VertexPool pool(2);
    auto t0 = tri(pool, {{0, 0}, {1, 0}, {0, 1}});
    std::vector<Simplex> gen = {t0};
    const double d0 = t0.diameter();
    const int rounds = 2 * 3 / 2; // p(p+1)/2 with p = 2
    for (int r = 0; r < rounds; ++r) {
        std::vector<Simplex> next;
        for (const auto &s : gen) {
            auto sp = split_longest_edge(s, pool);
            next.push_back(sp.first);
            next.push_back(sp.second);
        }
        gen = std::move(next);
    }
    double dmax = 0;
    for (const auto &s : gen) dmax = std::max(dmax, s.diameter());
    CHECK(dmax <= 0.5 * d0 + 1e-12);
}

TEST_CASE("barycentric coordinates") {
    VertexPool pool(2);
    auto t = tri(pool, {{0, 0}, {1, 0}, {0, 1}});

    auto c = t.barycentric(t.centroid());
    for (int i = 0; i < 3; ++i)
        CHECK(c.alpha[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));

    Vec v1(2);
    v1 << 1, 0;
    auto e = t.barycentric(v1);
    CHECK(e.alpha.maxCoeff() == doctest::Approx(1.0));
    CHECK(std::abs(e.alpha.minCoeff()) <= 1e-12);

    Vec outside(2);
    outside << 2, 2;
    CHECK(t.barycentric(outside).min_coeff() < -1e-9);
    CHECK_FALSE(t.contains(outside, 1e-9));

    Vec inside(2);
    inside << 0.25, 0.25;
    CHECK(t.contains(inside, 1e-9));
    CHECK(t.volume() == doctest::Approx(0.5));

    VertexPool pool1(1);
    Simplex seg({pool1.insert(Vec::Constant(1, -1.0)),
                 pool1.insert(Vec::Constant(1, 1.0))},
                pool1);
    CHECK(seg.centroid()[0] == doctest::Approx(0.0));
}

TEST_CASE("barycentric reconstruction identity (property)") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unif(-5.0, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        VertexPool pool(3);
        std::vector<VertexId> ids;
        Mat V(3, 4);
        for (int j = 0; j < 4; ++j) {
            Vec v(3);
            v << unif(rng), unif(rng), unif(rng);
            V.col(j) = v;
            ids.push_back(pool.insert(v));
        }
        Mat E(3, 3);
        for (int j = 0; j < 3; ++j) E.col(j) = V.col(j + 1) - V.col(0);
        if (std::abs(E.determinant()) < 1e-2) continue;
        Simplex s(ids, pool);
        Vec theta = mpt::testing::sample_in_simplex(s, rng);
        auto bc = s.barycentric(theta);
        CHECK((s.vertices() * bc.alpha - theta).norm() <=
              1e-10 * (1.0 + theta.norm()));
        CHECK(bc.alpha.sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("canonicalization: permuted vertex lists compare equal") {
    VertexPool pool(2);
    Vec a(2), b(2), c(2);
    a << 0, 0;
    b << 1, 0;
    c << 0, 1;
    const auto ia = pool.insert(a), ib = pool.insert(b), ic = pool.insert(c);
    Simplex s1({ia, ib, ic}, pool);
    Simplex s2({ic, ia, ib}, pool);
    CHECK(s1 == s2);
    CHECK(s1.vertex_ids() == std::vector<VertexId>{ia, ib, ic});
}

TEST_CASE("M2 barycentric rows round-trip") {
    VertexPool pool(2);
    auto t = tri(pool, {{0.1, -0.2}, {1.3, 0.4}, {-0.2, 1.1}});
    Mat B = t.barycentric_rows();
    Mat V = Simplex::vertices_from_barycentric_rows(B);
    CHECK((V - t.vertices()).lpNorm<Eigen::Infinity>() <= 1e-12);

    std::mt19937_64 rng(5);
    for (int i = 0; i < 20; ++i) {
        Vec theta = mpt::testing::sample_in_simplex(t, rng);
        auto alpha = t.barycentric(theta).alpha;
        Vec affine(3);
        for (int r = 0; r < 2; ++r)
            affine[r] = B.row(r).head(2).dot(theta) + B(r, 2);
        affine[2] = 1.0 - affine[0] - affine[1];
        CHECK((alpha - affine).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
}

TEST_CASE("partition preservation under random splitting") {
    VertexPool pool(2);
    auto cells = initial_triangulation(box2(-1, 1, -1, 1), pool);
    std::vector<Simplex> leaves = cells;
    std::mt19937_64 rng(41);
    for (int step = 0; step < 60; ++step) {
        std::uniform_int_distribution<std::size_t> pick(0, leaves.size() - 1);
        const std::size_t k = pick(rng);
        auto r = split_longest_edge(leaves[k], pool);
        leaves[k] = r.first;
        leaves.push_back(r.second);
    }
    double total = 0;
    for (const auto &s : leaves) total += s.volume();
    CHECK(total == doctest::Approx(4.0).epsilon(1e-9));

    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        Vec t(2);
        t << unif(rng), unif(rng);
        int hits = 0;
        for (const auto &s : leaves) hits += s.contains(t, 1e-9) ? 1 : 0;
        CHECK(hits >= 1);
    }
}

TEST_CASE("vertex pool deduplicates within tolerance") {
    VertexPool pool(2, 1e-9);
    Vec a(2);
    a << 0.3, 0.7;
    const auto id = pool.insert(a);
    Vec b = a;
    b[0] += 2e-10;
    CHECK(pool.insert(b) == id);
    b[0] += 1e-6;
    CHECK(pool.insert(b) != id);
    CHECK(pool.size() == 2);
}
