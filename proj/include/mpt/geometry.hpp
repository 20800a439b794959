#pragma once

#include "mpt/problem.hpp"
#include "mpt/types.hpp"

#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mpt {

using VertexId = std::uint32_t;

/// Append-only pool of unique vertices. New points are deduplicated against
/// existing ones by coordinates (within tol). Reads are safe concurrently
/// with each other; appends must be serialized by the owner.
class VertexPool {
public:
    explicit VertexPool(Index p, double tol = 1e-9);

    VertexId insert(const Vec &v);
    const Vec &coords(VertexId id) const { return coords_[id]; }
    Index dim() const { return p_; }
    std::size_t size() const { return coords_.size(); }

private:
    struct CellKey {
        std::int64_t c[4];
        bool operator==(const CellKey &o) const;
    };
    struct CellKeyHash {
        std::size_t operator()(const CellKey &k) const;
    };
    CellKey key_of(const Vec &v) const;

    Index p_;
    double tol_;
    std::vector<Vec> coords_;
    std::unordered_multimap<CellKey, VertexId, CellKeyHash> grid_;
};

struct Barycentric {
    Vec alpha; ///< p+1 components summing to 1
    double min_coeff() const { return alpha.minCoeff(); }
};

/// Full-dimensional cell in parameter space, vertex representation.
/// Canonical form: vertex_ids sorted ascending; the coordinate columns are
/// aligned with that order.
class Simplex {
public:
    Simplex() = default;
    /// Builds the canonical form; vertices are fetched from the pool.
    Simplex(std::vector<VertexId> ids, const VertexPool &pool);
    /// Directly from coordinates (used when loading storage model M2).
    Simplex(std::vector<VertexId> ids, Mat vertex_columns);

    Index p() const { return V_.rows(); }
    const Mat &vertices() const { return V_; } ///< p x (p+1)
    const std::vector<VertexId> &vertex_ids() const { return ids_; }

    double volume() const;
    Vec centroid() const;
    double diameter() const; ///< longest edge length

    /// Solves the (p+1)x(p+1) affine system [V; 1']alpha = [theta; 1].
    Barycentric barycentric(const Vec &theta) const;
    bool contains(const Vec &theta, double geom_tol) const;

    /// First p rows of the affine barycentric map: alpha_i = B(i,0:p-1)'theta
    /// + B(i,p). The last coordinate is 1 - sum of the others. This is the
    /// matrix stored by storage model M2.
    Mat barycentric_rows() const;
    /// Inverse of barycentric_rows: recovers the vertex columns.
    static Mat vertices_from_barycentric_rows(const Mat &B);

    bool operator==(const Simplex &o) const { return ids_ == o.ids_; }

private:
    std::vector<VertexId> ids_;
    Mat V_;
};

/// Longest edge as a pair of positions (i, j), i < j, into the vertex list.
/// Ties are broken toward the lexicographically smallest vertex-id pair.
std::pair<Index, Index> longest_edge(const Simplex &s);

struct SplitResult {
    Simplex first;
    Simplex second;
    VertexId midpoint_id;
    Vec midpoint;
};

/// Bisects the simplex at the midpoint of its longest edge. Each child keeps
/// all vertices except one endpoint of that edge, replaced by the midpoint.
/// Throws DegenerateChildError if a child volume falls below min_volume.
SplitResult split_longest_edge(const Simplex &s, VertexPool &pool,
                               double min_volume = 0.0);

/// Simplicial partition of the domain:
///  - a simplex passes through unchanged;
///  - an axis-aligned box uses the Kuhn triangulation (p! cells);
///  - otherwise Delaunay via the lifted lower hull, supported for p <= 4.
/// Output order is deterministic. Throws DegenerateDomainError when the
/// vertices are affinely dependent.
std::vector<Simplex> initial_triangulation(const PolytopeV &domain,
                                           VertexPool &pool);

} // namespace mpt
