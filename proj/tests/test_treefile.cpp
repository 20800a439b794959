#include "mpt/treefile.hpp"

#include "mpt/library.hpp"
#include "mpt/runtime.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

using namespace mpt;

namespace {

std::string slurp(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
}

void spit(const std::string &path, const std::string &data) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(data.data(), static_cast<std::streamsize>(data.size()));
}

// Matches the writer's CRC (standard reflected CRC-32).
std::uint32_t crc32_ref(const unsigned char *data, std::size_t len) {
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) {
        c ^= data[i];
        for (int k = 0; k < 8; ++k)
            c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    }
    return c ^ 0xFFFFFFFFu;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string &p) : path(p) {}
    ~TempFile() { std::remove(path.c_str()); }
};

} // namespace

TEST_CASE("M1 round trip preserves locate and eval bit-exactly") {
    auto tmpl = make_toy_b();
    RefineConfig rc;
    rc.tolerances.eps_a = 0.02;
    auto tree = run_partition(tmpl, rc);
    auto meta = make_meta(*tree, *tmpl);

    TempFile f("/tmp/mpt_rt_m1.bin");
    const auto bytes = save_tree(*tree, meta, f.path, StorageModel::M1);
    CHECK(bytes == predict_file_size(*tree, meta, StorageModel::M1));

    auto loaded = load_tree(f.path);
    CHECK(loaded.model == StorageModel::M1);
    CHECK(loaded.meta.label == "toy_b");
    CHECK(loaded.tree->node_count() == tree->node_count());

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const Vec theta = Vec::Constant(1, unif(rng));
        auto a = eval_semi_explicit(*tree, *tmpl, theta, rc.tolerances);
        auto b = eval_semi_explicit(*loaded.tree, *tmpl, theta, rc.tolerances);
        CHECK(a.delta == b.delta);
        CHECK(a.value == b.value); // identical bits: same solve on same data
    }

    // Resave must be byte-identical.
    TempFile f2("/tmp/mpt_rt_m1b.bin");
    save_tree(*loaded.tree, loaded.meta, f2.path, StorageModel::M1);
    CHECK(slurp(f.path) == slurp(f2.path));
}

TEST_CASE("M2 round trip: explicit eval within 1e-12 of M1") {
    auto tmpl = make_toy_a();
    RefineConfig rc;
    rc.mode = RefineMode::Explicit;
    rc.tolerances.eps_a = 0.03;
    auto tree = run_partition(tmpl, rc);
    auto meta = make_meta(*tree, *tmpl);

    TempFile f1("/tmp/mpt_rt2_m1.bin");
    TempFile f2("/tmp/mpt_rt2_m2.bin");
    save_tree(*tree, meta, f1.path, StorageModel::M1);
    const auto bytes2 = save_tree(*tree, meta, f2.path, StorageModel::M2);
    CHECK(bytes2 == predict_file_size(*tree, meta, StorageModel::M2));

    auto m1 = load_tree(f1.path);
    auto m2 = load_tree(f2.path);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const Vec theta = Vec::Constant(1, unif(rng));
        auto a = eval_explicit(*m1.tree, theta);
        auto b = eval_explicit(*m2.tree, theta);
        CHECK(a.delta == b.delta);
        CHECK(std::abs(a.x[0] - b.x[0]) <= 1e-12);
    }

    // M2 resave is byte-identical (stored maps are authoritative).
    TempFile f3("/tmp/mpt_rt2_m2b.bin");
    save_tree(*m2.tree, m2.meta, f3.path, StorageModel::M2);
    CHECK(slurp(f2.path) == slurp(f3.path));

    // A tree loaded from M2 has no vertex table and cannot be saved as M1.
    TempFile f4("/tmp/mpt_rt2_m1b.bin");
    CHECK_THROWS_AS(save_tree(*m2.tree, m2.meta, f4.path, StorageModel::M1),
                    InvalidArgumentError);
}

TEST_CASE("explicit M1 files store only the declared output components") {
    auto tmpl = make_cwh(); // n = 13, n_out = 1
    // Build a tiny explicit tree over a shrunken domain to keep this fast.
    CwhParams params;
    params.domain_scale = 0.05;
    auto small = make_cwh(params);
    RefineConfig rc;
    rc.mode = RefineMode::Explicit;
    rc.tolerances.eps_a = 1e-3;
    rc.tolerances.eps_r = 2.0;
    auto tree = run_partition(small, rc);
    auto meta = make_meta(*tree, *small);
    CHECK(meta.n_out == 1);

    TempFile f("/tmp/mpt_cwh_small.bin");
    save_tree(*tree, meta, f.path, StorageModel::M1);
    auto loaded = load_tree(f.path);

    std::mt19937_64 rng(9);
    for (int i = 0; i < 50; ++i) {
        const Vec theta = mpt::testing::sample_in_box(small->parameter_domain, rng);
        auto full = eval_explicit(*tree, theta);
        auto thin = eval_explicit(*loaded.tree, theta);
        REQUIRE(thin.x.size() == 1);
        CHECK(thin.x[0] == full.x[small->output_indices[0]]);
    }
    (void)tmpl;
}

TEST_CASE("corrupt and mismatched files are rejected") {
    auto tmpl = make_toy_a();
    RefineConfig rc;
    rc.tolerances.eps_a = 0.5;
    auto tree = run_partition(tmpl, rc);
    auto meta = make_meta(*tree, *tmpl);
    TempFile f("/tmp/mpt_corrupt.bin");
    save_tree(*tree, meta, f.path, StorageModel::M1);

    SUBCASE("flipped payload byte fails the checksum") {
        std::string data = slurp(f.path);
        data[data.size() / 2] = static_cast<char>(data[data.size() / 2] ^ 0x5A);
        spit(f.path, data);
        CHECK_THROWS_AS(load_tree(f.path), CorruptFileError);
    }
    SUBCASE("bad magic") {
        std::string data = slurp(f.path);
        data[0] = 'X';
        // Fix the trailer so the magic check is what fires.
        const std::uint32_t crc = crc32_ref(
            reinterpret_cast<const unsigned char *>(data.data()),
            data.size() - 4);
        for (int i = 0; i < 4; ++i)
            data[data.size() - 4 + static_cast<std::size_t>(i)] =
                static_cast<char>((crc >> (8 * i)) & 0xFF);
        spit(f.path, data);
        CHECK_THROWS_AS(load_tree(f.path), CorruptFileError);
    }
    SUBCASE("unsupported version") {
        std::string data = slurp(f.path);
        data[4] = 9; // version little-endian low byte
        const std::uint32_t crc = crc32_ref(
            reinterpret_cast<const unsigned char *>(data.data()),
            data.size() - 4);
        for (int i = 0; i < 4; ++i)
            data[data.size() - 4 + static_cast<std::size_t>(i)] =
                static_cast<char>((crc >> (8 * i)) & 0xFF);
        spit(f.path, data);
        CHECK_THROWS_AS(load_tree(f.path), VersionMismatchError);
    }
    SUBCASE("truncation") {
        std::string data = slurp(f.path);
        data.resize(data.size() / 2);
        spit(f.path, data);
        CHECK_THROWS_AS(load_tree(f.path), CorruptFileError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_tree("/tmp/does_not_exist_mpt.bin"), IoError);
    }
}

TEST_CASE("size formulas: exact field-count match and idealized report") {
    auto tmpl = make_toy_a();
    RefineConfig rc;
    rc.tolerances.eps_a = 0.02;
    auto tree = run_partition(tmpl, rc);
    auto meta = make_meta(*tree, *tmpl);

    TempFile f1("/tmp/mpt_sz1.bin");
    TempFile f2("/tmp/mpt_sz2.bin");
    const auto b1 = save_tree(*tree, meta, f1.path, StorageModel::M1);
    const auto b2 = save_tree(*tree, meta, f2.path, StorageModel::M2);
    CHECK(b1 == predict_file_size(*tree, meta, StorageModel::M1));
    CHECK(b2 == predict_file_size(*tree, meta, StorageModel::M2));

    const auto ideal =
        idealized_sizes(tree->stats(), meta.p, meta.m, meta.n_out, tree->mode());
    CHECK(ideal.m1 > 0);
    CHECK(ideal.m2 > 0);
}
