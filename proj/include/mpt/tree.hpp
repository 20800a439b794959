#pragma once

#include "mpt/geometry.hpp"
#include "mpt/problem.hpp"
#include "mpt/types.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

namespace mpt {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xffffffffu;

enum class LeafKind : std::uint8_t {
    Open = 0,
    ClosedFeasible = 1,
    ClosedSubopt = 2,
    ClosedExplicit = 3,
};

struct LeafPayload {
    LeafKind kind = LeafKind::Open;
    /// Commutation index into the admissible set. Open leaves carry the
    /// current working commutation during Phase II; Phase I open cells have
    /// none yet. Trees loaded from storage carry only the bits.
    std::optional<Index> delta_index;
    /// Commutation bits, filled when the leaf closes (and by the loaders).
    Delta delta_bits;
    /// ClosedExplicit only: one column per simplex vertex (aligned with the
    /// canonical vertex order). Rows are the full decision vector for trees
    /// built in memory, or the declared output components for trees loaded
    /// from storage.
    Mat vertex_solutions;

    bool closed() const { return kind != LeafKind::Open; }
};

struct TreeNode {
    std::optional<Simplex> simplex; ///< absent only for a synthetic root
    std::vector<NodeId> children;   ///< empty for leaves
    NodeId parent = kNoNode;
    int depth = 0;
    std::optional<LeafPayload> payload; ///< present iff leaf
    /// Authoritative affine barycentric map for nodes loaded from storage
    /// model M2 (kept so that a resave is bit-identical).
    std::optional<Mat> stored_bary;

    bool is_leaf() const { return payload.has_value(); }
};

enum class TreeMode : std::uint8_t {
    FeasibleMap = 2,   ///< Phase I output
    SemiExplicit = 0,
    Explicit = 1,
};

enum class ProgressKind : std::uint8_t { Close = 0, Split = 1, Reassign = 2 };

struct ProgressEvent {
    double wall_time_s = 0.0;
    ProgressKind kind = ProgressKind::Close;
    NodeId node = kNoNode;
    /// Commutation involved: the closing/new commutation, or the children's
    /// working commutation for splits.
    std::optional<Index> delta;
    std::uint64_t closed_leaves = 0;
    double closed_volume_fraction = 0.0;
    std::uint64_t open_count = 0;
    int depth = 0;
};

using ProgressSink = std::function<void(const ProgressEvent &)>;

struct TreeStats {
    int tau = 0;                ///< max root-to-leaf edges
    std::uint64_t lambda = 0;   ///< leaf count
    std::uint64_t node_count = 0;
    std::uint64_t vertex_count = 0;
    std::uint64_t closed_leaves = 0;
    double closed_volume_fraction = 0.0;
    double wall_time_s = 0.0;
    std::map<std::string, std::uint64_t> solve_counts;
};

/// Binary-tree simplicial partition of the parameter domain. The top level
/// may be wider than binary: when the initial triangulation yields more than
/// one cell the root is synthetic and the initial cells are its children.
/// All splits below are longest-edge bisections.
///
/// Mutations are single-writer; concurrent readers are safe between
/// mutations (the evaluators never mutate).
class PartitionTree {
public:
    PartitionTree(const PolytopeV &domain, double geom_tol);

    /// Reconstruction entry used by the storage loaders.
    struct Raw {};
    PartitionTree(Raw, Index p, double geom_tol);

    const TreeNode &node(NodeId id) const { return nodes_[id]; }
    TreeNode &node_mut(NodeId id) { return nodes_[id]; }
    NodeId root() const { return root_; }
    std::size_t node_count() const { return nodes_.size(); }
    const VertexPool &pool() const { return pool_; }
    VertexPool &pool_mut() { return pool_; }
    double geom_tol() const { return geom_tol_; }
    double domain_volume() const { return domain_volume_; }
    TreeMode mode() const { return mode_; }
    void set_mode(TreeMode m) { mode_ = m; }

    /// Point location: descends from the root picking the first child whose
    /// simplex contains theta (within geom_tol). Throws OutOfDomainError.
    NodeId locate(const Vec &theta) const;

    bool has_open() const { return !open_stack_.empty(); }
    std::size_t open_count() const { return open_stack_.size(); }
    /// Most recent open leaf (LIFO / depth-first discipline).
    NodeId pop_open();
    void push_open(NodeId id);
    /// Top k open leaves, most recent first, without popping.
    std::vector<NodeId> peek_open(std::size_t k) const;

    /// Converts an open leaf into an internal node with the given children,
    /// all open and carrying delta_for_children as their working commutation.
    std::vector<NodeId> push_children(NodeId leaf, std::vector<Simplex> cells,
                                      std::optional<Index> delta_for_children);
    void close(NodeId leaf, LeafPayload payload);
    /// Keeps the leaf open with a new commutation and returns it to the
    /// stack; never changes the tree depth.
    void reassign(NodeId leaf, Index delta_index);

    /// Re-opens every closed leaf (Phase II entry), pushing them in id order
    /// so the most recently created Phase I leaf is processed first.
    void reopen_all_leaves();

    TreeStats stats() const;
    std::uint64_t closed_leaf_count() const { return closed_leaves_; }
    double closed_volume_fraction() const;

    const std::vector<ProgressEvent> &events() const { return events_; }
    void set_progress_sink(ProgressSink sink) { sink_ = std::move(sink); }
    void start_clock() { t0_ = std::chrono::steady_clock::now(); }
    double elapsed_s() const;

    /// Mutable run metadata filled by the offline drivers.
    double wall_time_s = 0.0;
    std::map<std::string, std::uint64_t> solve_counts;

    /// Raw-construction helpers for the storage loaders.
    NodeId raw_add_node(TreeNode n);
    void raw_set_root(NodeId id) { root_ = id; }
    void raw_set_domain_volume(double v) { domain_volume_ = v; }
    void raw_finalize_depths();

private:
    void record(ProgressKind kind, NodeId id, std::optional<Index> delta);
    bool node_contains(const TreeNode &n, const Vec &theta) const;

    std::vector<TreeNode> nodes_;
    VertexPool pool_;
    NodeId root_ = kNoNode;
    std::vector<NodeId> open_stack_;
    double geom_tol_ = 1e-9;
    double domain_volume_ = 0.0;
    double closed_volume_ = 0.0;
    std::uint64_t closed_leaves_ = 0;
    int tau_ = 0;
    TreeMode mode_ = TreeMode::FeasibleMap;
    std::vector<ProgressEvent> events_;
    ProgressSink sink_;
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

/// Cache of fixed-commutation solutions at partition vertices, keyed by
/// (vertex id, commutation index). Only Optimal and Infeasible results are
/// cached; Numerical failures always abort. Thread-safe.
class VertexSolutionCache {
public:
    explicit VertexSolutionCache(bool store_primal = true)
        : store_primal_(store_primal) {}

    /// Solve-through accessor: returns the cached result or solves
    /// (P_theta^delta) at the vertex and caches it.
    const SolveResult &get_or_solve(const ProblemTemplate &tmpl,
                                    Index delta_index, VertexId vertex,
                                    const Vec &coords,
                                    const ToleranceConfig &cfg);

    std::uint64_t solve_count() const { return solves_; }
    std::size_t size() const;

private:
    struct Key {
        VertexId v;
        Index d;
        bool operator<(const Key &o) const {
            return v < o.v || (v == o.v && d < o.d);
        }
    };
    bool store_primal_;
    mutable std::mutex mu_;
    std::map<Key, std::unique_ptr<SolveResult>> cache_;
    std::uint64_t solves_ = 0;
};

} // namespace mpt
