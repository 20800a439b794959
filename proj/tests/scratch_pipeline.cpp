// Scratch integration driver; not part of the build.
#include "mpt/library.hpp"
#include "mpt/phase1.hpp"
#include "mpt/phase2.hpp"
#include "mpt/runtime.hpp"
#include "mpt/treefile.hpp"

#include <cstdio>
#include <fstream>
#include <random>

using namespace mpt;

int main() {
    int fails = 0;
    auto check = [&](bool ok, const char *what) {
        std::printf("%s: %s\n", ok ? "ok" : "FAIL", what);
        if (!ok) ++fails;
    };

    // Toy-A phase 1: single cell, closes immediately.
    {
        auto tmpl = make_toy_a();
        ToleranceConfig cfg;
        VertexSolutionCache cache;
        auto tree = run_phase1(tmpl, cfg, cache);
        auto st = tree->stats();
        std::printf("toy_a phase1: tau=%d lambda=%llu closed=%.3f\n", st.tau,
                    (unsigned long long)st.lambda, st.closed_volume_fraction);
        check(st.lambda == 1 && st.tau == 0, "toy_a phase1 single cell");
        check(std::abs(st.closed_volume_fraction - 1.0) < 1e-9, "coverage");
    }

    // Toy-A phase 2, semi-explicit, eps_a = 0.05.
    {
        auto tmpl = make_toy_a();
        RefineConfig rc;
        rc.tolerances.eps_a = 0.05;
        auto tree = run_partition(tmpl, rc);
        auto st = tree->stats();
        std::printf("toy_a phase2(eps_a=0.05): tau=%d lambda=%llu\n", st.tau,
                    (unsigned long long)st.lambda);
        check(st.closed_volume_fraction > 1.0 - 1e-9, "all closed");

        // epsilon-suboptimality vs the enumeration oracle
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        double worst = 0.0;
        for (int i = 0; i < 500; ++i) {
            Vec theta = Vec::Constant(1, unif(rng));
            auto se = eval_semi_explicit(*tree, *tmpl, theta, rc.tolerances);
            auto oracle = solve_minlp(*tmpl, theta, rc.tolerances);
            worst = std::max(worst, se.value - oracle.value);
        }
        std::printf("  worst suboptimality = %.6g\n", worst);
        check(worst <= 0.05 + 1e-6, "eps-suboptimal everywhere");

        // decision boundary near 0 within the analytic band
        auto left = eval_semi_explicit(*tree, *tmpl, Vec::Constant(1, -0.9),
                                       rc.tolerances);
        check(left.delta == Delta{0}, "theta=-0.9 uses delta=0");
        check(std::abs(left.value - 0.16) < 1e-6, "value 0.16 at -0.9");
    }

    // Toy-B: phase 1 + full run; leaves right of 0.25 must carry delta=1.
    {
        auto tmpl = make_toy_b();
        RefineConfig rc;
        rc.tolerances.eps_a = 0.05;
        rc.tolerances.eps_r = 0.0;
        auto tree = run_partition(tmpl, rc);
        bool right_ok = true;
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> unif(0.3, 0.99);
        for (int i = 0; i < 50; ++i) {
            Vec theta = Vec::Constant(1, unif(rng));
            auto se = eval_semi_explicit(*tree, *tmpl, theta, rc.tolerances);
            if (se.delta != Delta{1}) right_ok = false;
        }
        check(right_ok, "toy_b delta=1 right of the cut");
    }

    // Toy-B wide: DomainNotCovered.
    {
        auto tmpl = make_toy_b_wide();
        ToleranceConfig cfg;
        VertexSolutionCache cache;
        bool hit = false;
        try {
            auto tree = run_phase1(tmpl, cfg, cache);
        } catch (const DomainNotCoveredError &e) {
            hit = true;
            std::printf("  witness=%.4f\n", e.witness_centroid[0]);
        }
        check(hit, "toy_b_wide DomainNotCovered");
    }

    // Toy-C: zero overlap -> NonConvergence at max_depth.
    {
        auto tmpl = make_toy_c();
        RefineConfig rc;
        rc.tolerances.eps_a = 0.05;
        rc.tolerances.max_depth = 12;
        bool hit = false;
        try {
            auto tree = run_partition(tmpl, rc);
        } catch (const NonConvergenceError &e) {
            hit = true;
            std::printf("  stuck depth=%d diameter=%.5f\n", e.depth,
                        e.cell_diameter);
        }
        check(hit, "toy_c NonConvergence");
    }

    // Explicit mode on toy_a + save/load round trip.
    {
        auto tmpl = make_toy_a();
        RefineConfig rc;
        rc.mode = RefineMode::Explicit;
        rc.tolerances.eps_a = 0.05;
        auto tree = run_partition(tmpl, rc);
        Vec theta = Vec::Constant(1, 0.37);
        auto ex = eval_explicit(*tree, theta);
        auto oracle = solve_minlp(*tmpl, theta, rc.tolerances);
        std::printf("explicit toy_a: x=%.6f oracle=%.6f\n", ex.x[0],
                    oracle.value);
        check(ex.x[0] >= oracle.value - 1e-7 &&
                  ex.x[0] <= oracle.value + 0.05 + 1e-6,
              "explicit value bound");

        auto meta = make_meta(*tree, *tmpl);
        std::uint64_t b1 = save_tree(*tree, meta, "/tmp/t1.bin", StorageModel::M1);
        std::uint64_t b2 = save_tree(*tree, meta, "/tmp/t2.bin", StorageModel::M2);
        std::printf("sizes: M1=%llu M2=%llu predicted M1=%llu M2=%llu\n",
                    (unsigned long long)b1, (unsigned long long)b2,
                    (unsigned long long)predict_file_size(*tree, meta, StorageModel::M1),
                    (unsigned long long)predict_file_size(*tree, meta, StorageModel::M2));
        check(b1 == predict_file_size(*tree, meta, StorageModel::M1), "M1 size");
        check(b2 == predict_file_size(*tree, meta, StorageModel::M2), "M2 size");

        auto l1 = load_tree("/tmp/t1.bin");
        auto l2 = load_tree("/tmp/t2.bin");
        bool agree = true;
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (int i = 0; i < 200; ++i) {
            Vec t = Vec::Constant(1, unif(rng));
            auto a = eval_explicit(*tree, t);
            auto b = eval_explicit(*l1.tree, t);
            auto c = eval_explicit(*l2.tree, t);
            if (a.x[0] != b.x[0]) agree = false; // bit-exact for M1
            if (std::abs(a.x[0] - c.x[0]) > 1e-12) agree = false;
            if (a.delta != b.delta || a.delta != c.delta) agree = false;
        }
        check(agree, "round-trip eval agreement");
    }

    // Schedule invariance: workers=1 vs workers=4 byte-identical on toy_b.
    {
        auto tmpl = make_toy_b();
        RefineConfig rc1;
        rc1.tolerances.eps_a = 0.02;
        rc1.parallel_workers = 1;
        auto t1 = run_partition(tmpl, rc1);
        RefineConfig rc4 = rc1;
        rc4.parallel_workers = 4;
        auto t4 = run_partition(tmpl, rc4);
        auto meta = make_meta(*t1, *tmpl);
        save_tree(*t1, meta, "/tmp/w1.bin", StorageModel::M1);
        save_tree(*t4, make_meta(*t4, *tmpl), "/tmp/w4.bin", StorageModel::M1);
        auto slurp = [](const char *p) {
            std::ifstream f(p, std::ios::binary);
            return std::string((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
        };
        check(slurp("/tmp/w1.bin") == slurp("/tmp/w4.bin"),
              "schedule invariance (byte-identical)");
    }

    std::printf("fails=%d\n", fails);
    return fails ? 1 : 0;
}
