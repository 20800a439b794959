#include "mpt/treefile.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <memory>

namespace mpt {

namespace {

constexpr char kMagic[4] = {'M', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t crc32(const std::uint8_t *data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i)
        c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i)
            buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i)
            buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i)
            buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void bytes(const void *p, std::size_t n) {
        const auto *b = static_cast<const std::uint8_t *>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    const std::vector<std::uint8_t> &data() const { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(std::vector<std::uint8_t> data) : buf_(std::move(data)) {}
    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16() { return gather<std::uint16_t>(2); }
    std::uint32_t u32() { return gather<std::uint32_t>(4); }
    std::uint64_t u64() { return gather<std::uint64_t>(8); }
    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str(std::size_t n) {
        const std::uint8_t *p = take(n);
        return std::string(reinterpret_cast<const char *>(p), n);
    }
    std::size_t pos() const { return pos_; }
    std::size_t size() const { return buf_.size(); }

private:
    const std::uint8_t *take(std::size_t n) {
        if (pos_ + n > buf_.size())
            throw CorruptFileError("tree file truncated");
        const std::uint8_t *p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }
    template <typename T> T gather(std::size_t n) {
        const std::uint8_t *p = take(n);
        T v = 0;
        for (std::size_t i = 0; i < n; ++i)
            v |= static_cast<T>(p[i]) << (8 * i);
        return v;
    }
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> pack_bits(const Delta &d) {
    std::vector<std::uint8_t> out((d.size() + 7) / 8, 0);
    for (std::size_t j = 0; j < d.size(); ++j)
        if (d[j]) out[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
    return out;
}

Delta unpack_bits(const std::vector<std::uint8_t> &bytes, Index m) {
    Delta d(static_cast<std::size_t>(m), 0);
    for (Index j = 0; j < m; ++j)
        d[static_cast<std::size_t>(j)] =
            (bytes[static_cast<std::size_t>(j / 8)] >> (j % 8)) & 1u;
    return d;
}

Mat node_bary_rows(const TreeNode &n) {
    if (n.stored_bary) return *n.stored_bary;
    return n.simplex->barycentric_rows();
}

void write_nodes(Writer &w, const PartitionTree &tree, const TreeFileMeta &meta,
                 StorageModel model) {
    const Index p = meta.p;
    const Index n_out = meta.n_out;
    for (NodeId id = 0; id < tree.node_count(); ++id) {
        const TreeNode &n = tree.node(id);
        if (!n.simplex) { // synthetic root
            w.u8(2);
            w.u32(static_cast<std::uint32_t>(n.children.size()));
            for (NodeId c : n.children) w.u32(c);
            continue;
        }
        w.u8(n.is_leaf() ? 1 : 0);
        if (model == StorageModel::M1) {
            for (VertexId v : n.simplex->vertex_ids()) w.u32(v);
        } else {
            const Mat B = node_bary_rows(n);
            for (Index r = 0; r < p; ++r)
                for (Index c = 0; c <= p; ++c) w.f64(B(r, c));
        }
        if (!n.is_leaf()) {
            w.u32(static_cast<std::uint32_t>(n.children.size()));
            for (NodeId c : n.children) w.u32(c);
            continue;
        }
        const LeafPayload &payload = *n.payload;
        if (!payload.closed())
            throw InvalidArgumentError("cannot save a tree with open leaves");
        if (static_cast<Index>(payload.delta_bits.size()) != meta.m)
            throw InvalidArgumentError(
                "closed leaf without commutation bits; cannot serialize");
        w.u8(static_cast<std::uint8_t>(payload.kind));
        auto bits = pack_bits(payload.delta_bits);
        w.bytes(bits.data(), bits.size());
        if (payload.kind == LeafKind::ClosedExplicit) {
            const Mat &xs = payload.vertex_solutions;
            if (xs.rows() == n_out) {
                for (Index j = 0; j <= p; ++j)
                    for (Index r = 0; r < n_out; ++r) w.f64(xs(r, j));
            } else {
                if (static_cast<Index>(meta.output_indices.size()) != n_out)
                    throw InvalidArgumentError(
                        "explicit save requires the output index map");
                for (Index j = 0; j <= p; ++j)
                    for (Index r = 0; r < n_out; ++r)
                        w.f64(xs(meta.output_indices[static_cast<std::size_t>(r)],
                                 j));
            }
        }
    }
}

} // namespace

std::uint64_t save_tree(const PartitionTree &tree, const TreeFileMeta &meta,
                        const std::string &path, StorageModel model) {
    if (model == StorageModel::M1 && tree.pool().size() == 0)
        throw InvalidArgumentError(
            "tree has no vertex pool (loaded from M2); save it as M2");
    Writer w;
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u8(static_cast<std::uint8_t>(model));
    w.u8(static_cast<std::uint8_t>(meta.mode));
    w.u16(0);
    w.u32(static_cast<std::uint32_t>(meta.p));
    w.u32(static_cast<std::uint32_t>(meta.n_out));
    w.u32(static_cast<std::uint32_t>(meta.m));
    w.u32(0);
    w.u64(model == StorageModel::M1 ? tree.pool().size() : 0);
    w.u64(tree.node_count());
    w.u64(tree.root());
    w.f64(tree.geom_tol());
    w.f64(tree.domain_volume());
    w.u16(static_cast<std::uint16_t>(meta.label.size()));
    w.bytes(meta.label.data(), meta.label.size());

    if (model == StorageModel::M1) {
        for (std::size_t v = 0; v < tree.pool().size(); ++v) {
            const Vec &x = tree.pool().coords(static_cast<VertexId>(v));
            for (Index i = 0; i < meta.p; ++i) w.f64(x[i]);
        }
    }
    write_nodes(w, tree, meta, model);

    const std::uint32_t crc = crc32(w.data().data(), w.data().size());
    Writer trailer;
    trailer.u32(crc);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open tree file for writing: " + path);
    out.write(reinterpret_cast<const char *>(w.data().data()),
              static_cast<std::streamsize>(w.data().size()));
    out.write(reinterpret_cast<const char *>(trailer.data().data()), 4);
    out.flush();
    if (!out) throw IoError("short write to tree file: " + path);
    return w.data().size() + 4;
}

LoadedTree load_tree(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open tree file: " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (data.size() < 12) throw CorruptFileError("tree file too small");
    const std::uint32_t stored =
        static_cast<std::uint32_t>(data[data.size() - 4]) |
        static_cast<std::uint32_t>(data[data.size() - 3]) << 8 |
        static_cast<std::uint32_t>(data[data.size() - 2]) << 16 |
        static_cast<std::uint32_t>(data[data.size() - 1]) << 24;
    const std::uint32_t computed = crc32(data.data(), data.size() - 4);
    if (computed != stored)
        throw CorruptFileError("tree file checksum mismatch");
    data.resize(data.size() - 4);

    Reader r(std::move(data));
    char magic[4];
    for (int i = 0; i < 4; ++i) magic[i] = static_cast<char>(r.u8());
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw CorruptFileError("bad magic in tree file");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw VersionMismatchError("unsupported tree file version " +
                                   std::to_string(version));
    LoadedTree out;
    const auto model_byte = r.u8();
    if (model_byte != 1 && model_byte != 2)
        throw CorruptFileError("bad storage model byte");
    out.model = static_cast<StorageModel>(model_byte);
    out.meta.mode = static_cast<TreeMode>(r.u8());
    r.u16();
    out.meta.p = r.u32();
    out.meta.n_out = r.u32();
    out.meta.m = r.u32();
    r.u32();
    const std::uint64_t vertex_count = r.u64();
    const std::uint64_t node_count = r.u64();
    const std::uint64_t root_index = r.u64();
    const double geom_tol = r.f64();
    const double domain_volume = r.f64();
    const std::uint16_t label_len = r.u16();
    out.meta.label = r.str(label_len);

    const Index p = out.meta.p;
    if (p < 1 || p > 4)
        throw CorruptFileError("implausible parameter dimension");
    if (node_count == 0 || node_count > 0x7fffffffull)
        throw CorruptFileError("implausible node count");

    auto tree =
        std::make_unique<PartitionTree>(PartitionTree::Raw{}, p, geom_tol);
    tree->raw_set_domain_volume(domain_volume);
    tree->set_mode(out.meta.mode);

    if (out.model == StorageModel::M1) {
        Vec v(p);
        for (std::uint64_t k = 0; k < vertex_count; ++k) {
            for (Index i = 0; i < p; ++i) v[i] = r.f64();
            tree->pool_mut().insert(v);
        }
        if (tree->pool().size() != vertex_count)
            throw CorruptFileError("vertex table contains duplicates");
    }

    std::uint32_t next_raw_id = 0;
    for (std::uint64_t k = 0; k < node_count; ++k) {
        TreeNode n;
        const std::uint8_t kind = r.u8();
        if (kind == 2) {
            const std::uint32_t nc = r.u32();
            if (nc == 0 || nc > 1u << 20)
                throw CorruptFileError("bad child count");
            for (std::uint32_t c = 0; c < nc; ++c) {
                const std::uint32_t child = r.u32();
                if (child >= node_count)
                    throw CorruptFileError("child index out of range");
                n.children.push_back(child);
            }
            tree->raw_add_node(std::move(n));
            continue;
        }
        if (kind != 0 && kind != 1) throw CorruptFileError("bad node kind");
        if (out.model == StorageModel::M1) {
            std::vector<VertexId> ids(static_cast<std::size_t>(p) + 1);
            for (auto &id : ids) {
                id = r.u32();
                if (id >= vertex_count)
                    throw CorruptFileError("vertex index out of range");
            }
            n.simplex = Simplex(std::move(ids), tree->pool());
        } else {
            Mat B(p, p + 1);
            for (Index rr = 0; rr < p; ++rr)
                for (Index cc = 0; cc <= p; ++cc) B(rr, cc) = r.f64();
            Mat V = Simplex::vertices_from_barycentric_rows(B);
            std::vector<VertexId> ids(static_cast<std::size_t>(p) + 1);
            for (auto &id : ids) id = next_raw_id++;
            n.simplex = Simplex(std::move(ids), std::move(V));
            n.stored_bary = std::move(B);
        }
        if (kind == 0) {
            const std::uint32_t nc = r.u32();
            if (nc == 0 || nc > 1u << 20)
                throw CorruptFileError("bad child count");
            for (std::uint32_t c = 0; c < nc; ++c) {
                const std::uint32_t child = r.u32();
                if (child >= node_count)
                    throw CorruptFileError("child index out of range");
                n.children.push_back(child);
            }
        } else {
            LeafPayload payload;
            payload.kind = static_cast<LeafKind>(r.u8());
            if (payload.kind != LeafKind::ClosedFeasible &&
                payload.kind != LeafKind::ClosedSubopt &&
                payload.kind != LeafKind::ClosedExplicit)
                throw CorruptFileError("bad leaf payload kind");
            std::vector<std::uint8_t> bits(
                static_cast<std::size_t>((out.meta.m + 7) / 8));
            for (auto &b : bits) b = r.u8();
            payload.delta_bits = unpack_bits(bits, out.meta.m);
            if (payload.kind == LeafKind::ClosedExplicit) {
                Mat xs(out.meta.n_out, p + 1);
                for (Index j = 0; j <= p; ++j)
                    for (Index rr = 0; rr < out.meta.n_out; ++rr)
                        xs(rr, j) = r.f64();
                payload.vertex_solutions = std::move(xs);
            }
            n.payload = std::move(payload);
        }
        tree->raw_add_node(std::move(n));
    }
    if (r.pos() != r.size())
        throw CorruptFileError("trailing bytes in tree file");
    if (root_index >= node_count) throw CorruptFileError("bad root index");
    tree->raw_set_root(static_cast<NodeId>(root_index));
    tree->raw_finalize_depths();
    out.tree = std::move(tree);
    return out;
}

std::uint64_t predict_file_size(const PartitionTree &tree,
                                const TreeFileMeta &meta, StorageModel model) {
    const Index p = meta.p;
    std::uint64_t size =
        4 + 4 + 1 + 1 + 2 + 4 * 4 + 8 * 3 + 8 + 8 + 2 + meta.label.size();
    if (model == StorageModel::M1)
        size += static_cast<std::uint64_t>(tree.pool().size()) * 8ull * p;
    for (NodeId id = 0; id < tree.node_count(); ++id) {
        const TreeNode &n = tree.node(id);
        size += 1;
        if (!n.simplex) {
            size += 4 + 4ull * n.children.size();
            continue;
        }
        size +=
            (model == StorageModel::M1) ? 4ull * (p + 1) : 8ull * p * (p + 1);
        if (!n.is_leaf()) {
            size += 4 + 4ull * n.children.size();
        } else {
            size += 1 + static_cast<std::uint64_t>((meta.m + 7) / 8);
            if (n.payload->kind == LeafKind::ClosedExplicit)
                size += 8ull * meta.n_out * (p + 1);
        }
    }
    return size + 4; // CRC trailer
}

IdealizedSizes idealized_sizes(const TreeStats &stats, Index p, Index m,
                               Index n_out, TreeMode mode) {
    const double lam = static_cast<double>(stats.lambda);
    IdealizedSizes s;
    if (mode == TreeMode::Explicit) {
        s.m1 =
            lam * (8.0 * p + (p + 1) * (1.5 * 4.0 + 8.0 * n_out)) + 8.0 * p * p;
        s.m2 = 1.5 * lam * 8.0 * p * (p + 1) + lam * (p + 1) * n_out * 8.0;
    } else {
        s.m1 =
            lam * (8.0 * p + 4.0 * (p + 1) + std::ceil(m / 8.0)) + 8.0 * p * p;
        s.m2 = lam * 8.0 * p * (p + 1) + lam * std::ceil(m / 8.0);
    }
    return s;
}

ProgressSink make_progress_csv_sink(const std::string &path) {
    auto stream = std::make_shared<std::ofstream>(path, std::ios::trunc);
    if (!*stream)
        throw IoError("cannot open progress CSV for writing: " + path);
    (*stream) << "wall_time_s,closed_leaf_count,closed_volume_fraction,"
                 "open_count,depth\n";
    return [stream](const ProgressEvent &ev) {
        (*stream) << ev.wall_time_s << ',' << ev.closed_leaves << ','
                  << ev.closed_volume_fraction << ',' << ev.open_count << ','
                  << ev.depth << '\n';
        stream->flush();
    };
}

} // namespace mpt
