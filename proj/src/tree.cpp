#include "mpt/tree.hpp"

#include "mpt/conic_assembly.hpp"

#include <algorithm>
#include <cassert>

namespace mpt {

PartitionTree::PartitionTree(const PolytopeV &domain, double geom_tol)
    : pool_(domain.p, geom_tol), geom_tol_(geom_tol) {
    std::vector<Simplex> cells = initial_triangulation(domain, pool_);
    domain_volume_ = 0.0;
    for (const auto &c : cells) domain_volume_ += c.volume();

    if (cells.size() == 1) {
        TreeNode n;
        n.simplex = cells[0];
        n.depth = 0;
        n.payload = LeafPayload{};
        nodes_.push_back(std::move(n));
        root_ = 0;
        open_stack_.push_back(0);
        return;
    }
    TreeNode root;
    root.depth = 0;
    nodes_.push_back(std::move(root));
    root_ = 0;
    for (auto &c : cells) {
        TreeNode n;
        n.simplex = std::move(c);
        n.parent = root_;
        n.depth = 1;
        n.payload = LeafPayload{};
        const NodeId id = static_cast<NodeId>(nodes_.size());
        nodes_.push_back(std::move(n));
        nodes_[root_].children.push_back(id);
        open_stack_.push_back(id);
    }
    tau_ = 1;
}

PartitionTree::PartitionTree(Raw, Index p, double geom_tol)
    : pool_(p, geom_tol), geom_tol_(geom_tol) {}

double PartitionTree::elapsed_s() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_)
        .count();
}

bool PartitionTree::node_contains(const TreeNode &n, const Vec &theta) const {
    if (n.stored_bary) {
        const Mat &B = *n.stored_bary;
        const Index p = B.rows();
        double mn = 1.0, sum = 0.0;
        for (Index i = 0; i < p; ++i) {
            const double a = B.row(i).head(p).dot(theta) + B(i, p);
            mn = std::min(mn, a);
            sum += a;
        }
        mn = std::min(mn, 1.0 - sum);
        return mn >= -geom_tol_;
    }
    return n.simplex->contains(theta, geom_tol_);
}

NodeId PartitionTree::locate(const Vec &theta) const {
    NodeId at = root_;
    for (;;) {
        const TreeNode &n = nodes_[at];
        if (n.is_leaf()) {
            if (!node_contains(n, theta))
                throw OutOfDomainError("theta outside the partitioned domain");
            return at;
        }
        NodeId next = kNoNode;
        for (NodeId c : n.children) {
            if (node_contains(nodes_[c], theta)) {
                next = c;
                break;
            }
        }
        if (next == kNoNode)
            throw OutOfDomainError("theta outside the partitioned domain");
        at = next;
    }
}

NodeId PartitionTree::pop_open() {
    assert(!open_stack_.empty());
    NodeId id = open_stack_.back();
    open_stack_.pop_back();
    return id;
}

void PartitionTree::push_open(NodeId id) { open_stack_.push_back(id); }

std::vector<NodeId> PartitionTree::peek_open(std::size_t k) const {
    std::vector<NodeId> out;
    const std::size_t n = std::min(k, open_stack_.size());
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(open_stack_[open_stack_.size() - 1 - i]);
    return out;
}

std::vector<NodeId>
PartitionTree::push_children(NodeId leaf, std::vector<Simplex> cells,
                             std::optional<Index> delta_for_children) {
    TreeNode &parent = nodes_[leaf];
    assert(parent.is_leaf() && !parent.payload->closed());
    parent.payload.reset();
    std::vector<NodeId> out;
    for (auto &c : cells) {
        TreeNode n;
        n.simplex = std::move(c);
        n.parent = leaf;
        n.depth = nodes_[leaf].depth + 1;
        n.payload = LeafPayload{LeafKind::Open, delta_for_children, Delta(), Mat()};
        const NodeId id = static_cast<NodeId>(nodes_.size());
        nodes_.push_back(std::move(n));
        nodes_[leaf].children.push_back(id);
        open_stack_.push_back(id);
        out.push_back(id);
        tau_ = std::max(tau_, nodes_[id].depth);
    }
    record(ProgressKind::Split, leaf, delta_for_children);
    return out;
}

void PartitionTree::close(NodeId leaf, LeafPayload payload) {
    TreeNode &n = nodes_[leaf];
    assert(n.is_leaf() && !n.payload->closed());
    assert(payload.closed());
    n.payload = std::move(payload);
    closed_leaves_ += 1;
    closed_volume_ += n.simplex->volume();
    record(ProgressKind::Close, leaf, n.payload->delta_index);
}

void PartitionTree::reassign(NodeId leaf, Index delta_index) {
    TreeNode &n = nodes_[leaf];
    assert(n.is_leaf() && !n.payload->closed());
    n.payload->delta_index = delta_index;
    open_stack_.push_back(leaf);
    record(ProgressKind::Reassign, leaf, delta_index);
}

void PartitionTree::reopen_all_leaves() {
    open_stack_.clear();
    closed_leaves_ = 0;
    closed_volume_ = 0.0;
    for (NodeId id = 0; id < nodes_.size(); ++id) {
        TreeNode &n = nodes_[id];
        if (!n.is_leaf()) continue;
        n.payload->kind = LeafKind::Open;
        n.payload->vertex_solutions = Mat();
        open_stack_.push_back(id);
    }
}

double PartitionTree::closed_volume_fraction() const {
    return domain_volume_ > 0.0 ? closed_volume_ / domain_volume_ : 0.0;
}

TreeStats PartitionTree::stats() const {
    TreeStats s;
    s.node_count = nodes_.size();
    s.vertex_count = pool_.size();
    for (const auto &n : nodes_) {
        if (!n.is_leaf()) continue;
        s.lambda += 1;
        s.tau = std::max(s.tau, n.depth);
        if (n.payload->closed()) s.closed_leaves += 1;
    }
    s.closed_volume_fraction = closed_volume_fraction();
    s.wall_time_s = wall_time_s;
    s.solve_counts = solve_counts;
    return s;
}

void PartitionTree::record(ProgressKind kind, NodeId id,
                           std::optional<Index> delta) {
    ProgressEvent ev;
    ev.wall_time_s = elapsed_s();
    ev.kind = kind;
    ev.node = id;
    ev.delta = delta;
    ev.closed_leaves = closed_leaves_;
    ev.closed_volume_fraction = closed_volume_fraction();
    ev.open_count = open_stack_.size();
    ev.depth = tau_;
    events_.push_back(ev);
    if (sink_) sink_(ev);
}

NodeId PartitionTree::raw_add_node(TreeNode n) {
    const NodeId id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(std::move(n));
    return id;
}

void PartitionTree::raw_finalize_depths() {
    if (nodes_.empty()) return;
    nodes_[root_].depth = 0;
    // Children always have larger ids than their parent in both the builder
    // and the storage formats, so one forward pass suffices.
    for (NodeId id = 0; id < nodes_.size(); ++id)
        for (NodeId c : nodes_[id].children) {
            nodes_[c].parent = id;
            nodes_[c].depth = nodes_[id].depth + 1;
            tau_ = std::max(tau_, nodes_[c].depth);
        }
}

const SolveResult &
VertexSolutionCache::get_or_solve(const ProblemTemplate &tmpl,
                                  Index delta_index, VertexId vertex,
                                  const Vec &coords,
                                  const ToleranceConfig &cfg) {
    {
        std::lock_guard lock(mu_);
        auto it = cache_.find(Key{vertex, delta_index});
        if (it != cache_.end()) return *it->second;
    }
    const auto &prog = tmpl.program(delta_index);
    SolveResult r = solve_conic(prog, coords, cfg);
    if (r.status == SolveStatus::Numerical)
        throw_numerical("vertex solve",
                        assemble_fixed_theta(prog, coords, false));
    if (!store_primal_) r.x = Vec();
    std::lock_guard lock(mu_);
    ++solves_;
    auto [it, inserted] = cache_.emplace(Key{vertex, delta_index},
                                         std::make_unique<SolveResult>(std::move(r)));
    return *it->second;
}

std::size_t VertexSolutionCache::size() const {
    std::lock_guard lock(mu_);
    return cache_.size();
}

} // namespace mpt
