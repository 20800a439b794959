#include "mpt/geometry.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace mpt {

namespace {

double factorial(Index k) {
    double f = 1.0;
    for (Index i = 2; i <= k; ++i) f *= static_cast<double>(i);
    return f;
}

} // namespace

// --------------------------------------------------------------------------
// VertexPool
// --------------------------------------------------------------------------

VertexPool::VertexPool(Index p, double tol)
    : p_(p), tol_(std::max(tol, 1e-15)) {
    if (p < 1 || p > 4)
        throw InvalidArgumentError("vertex pool supports 1 <= p <= 4");
}

bool VertexPool::CellKey::operator==(const CellKey &o) const {
    return c[0] == o.c[0] && c[1] == o.c[1] && c[2] == o.c[2] && c[3] == o.c[3];
}

std::size_t VertexPool::CellKeyHash::operator()(const CellKey &k) const {
    std::size_t h = 0xcbf29ce484222325ull;
    for (int i = 0; i < 4; ++i) {
        h ^= static_cast<std::size_t>(k.c[i]);
        h *= 0x100000001b3ull;
    }
    return h;
}

VertexPool::CellKey VertexPool::key_of(const Vec &v) const {
    CellKey k{{0, 0, 0, 0}};
    const double cell = 4.0 * tol_;
    for (Index i = 0; i < p_; ++i)
        k.c[i] = static_cast<std::int64_t>(std::floor(v[i] / cell));
    return k;
}

VertexId VertexPool::insert(const Vec &v) {
    if (v.size() != p_) throw InvalidArgumentError("vertex dimension mismatch");
    // Probe the containing grid cell and its neighbors for a point within tol.
    CellKey base = key_of(v);
    const Index np = p_;
    std::int64_t offs[4] = {0, 0, 0, 0};
    const std::int64_t span = 1;
    std::size_t combos = 1;
    for (Index i = 0; i < np; ++i) combos *= 3;
    for (std::size_t c = 0; c < combos; ++c) {
        std::size_t t = c;
        CellKey k = base;
        for (Index i = 0; i < np; ++i) {
            offs[i] = static_cast<std::int64_t>(t % 3) - span;
            t /= 3;
            k.c[i] += offs[i];
        }
        auto range = grid_.equal_range(k);
        for (auto it = range.first; it != range.second; ++it) {
            const Vec &u = coords_[it->second];
            if ((u - v).lpNorm<Eigen::Infinity>() <= tol_) return it->second;
        }
    }
    VertexId id = static_cast<VertexId>(coords_.size());
    coords_.push_back(v);
    grid_.emplace(base, id);
    return id;
}

// --------------------------------------------------------------------------
// Simplex
// --------------------------------------------------------------------------

Simplex::Simplex(std::vector<VertexId> ids, const VertexPool &pool)
    : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    const Index p = pool.dim();
    if (static_cast<Index>(ids_.size()) != p + 1)
        throw InvalidArgumentError("simplex needs exactly p+1 vertices");
    V_.resize(p, p + 1);
    for (Index j = 0; j <= p; ++j)
        V_.col(j) = pool.coords(ids_[static_cast<std::size_t>(j)]);
}

Simplex::Simplex(std::vector<VertexId> ids, Mat vertex_columns)
    : ids_(std::move(ids)), V_(std::move(vertex_columns)) {
    if (static_cast<Index>(ids_.size()) != V_.cols() ||
        V_.cols() != V_.rows() + 1)
        throw InvalidArgumentError("simplex vertex matrix shape mismatch");
}

double Simplex::volume() const {
    const Index p = V_.rows();
    Mat E(p, p);
    for (Index j = 0; j < p; ++j) E.col(j) = V_.col(j + 1) - V_.col(0);
    return std::abs(E.determinant()) / factorial(p);
}

Vec Simplex::centroid() const { return V_.rowwise().mean(); }

double Simplex::diameter() const {
    double d = 0.0;
    for (Index i = 0; i < V_.cols(); ++i)
        for (Index j = i + 1; j < V_.cols(); ++j)
            d = std::max(d, (V_.col(i) - V_.col(j)).norm());
    return d;
}

Barycentric Simplex::barycentric(const Vec &theta) const {
    const Index p = V_.rows();
    if (theta.size() != p)
        throw InvalidArgumentError("barycentric: theta dimension mismatch");
    Mat M(p + 1, p + 1);
    M.topRows(p) = V_;
    M.row(p).setOnes();
    Vec rhs(p + 1);
    rhs.head(p) = theta;
    rhs[p] = 1.0;
    Eigen::PartialPivLU<Mat> lu(M);
    Vec alpha = lu.solve(rhs);
    Vec resid = rhs - M * alpha;
    const double scale = 1.0 + theta.lpNorm<Eigen::Infinity>();
    if (resid.lpNorm<Eigen::Infinity>() > 1e-10 * scale) {
        alpha += lu.solve(resid);
        resid = rhs - M * alpha;
        if (!alpha.allFinite() ||
            resid.lpNorm<Eigen::Infinity>() > 1e-8 * scale)
            throw SingularSimplexError("barycentric system numerically singular");
    }
    return Barycentric{alpha};
}

bool Simplex::contains(const Vec &theta, double geom_tol) const {
    return barycentric(theta).min_coeff() >= -geom_tol;
}

Mat Simplex::barycentric_rows() const {
    const Index p = V_.rows();
    Mat M(p + 1, p + 1);
    M.topRows(p) = V_;
    M.row(p).setOnes();
    Mat Minv = M.inverse();
    if (!Minv.allFinite())
        throw SingularSimplexError("simplex affine map not invertible");
    return Minv.topRows(p);
}

Mat Simplex::vertices_from_barycentric_rows(const Mat &B) {
    const Index p = B.rows();
    Mat Minv(p + 1, p + 1);
    Minv.topRows(p) = B;
    Minv.row(p).head(p) = -B.leftCols(p).colwise().sum();
    Minv(p, p) = 1.0 - B.col(p).sum();
    Mat M = Minv.inverse();
    if (!M.allFinite())
        throw SingularSimplexError("stored barycentric map not invertible");
    return M.topRows(p);
}

std::pair<Index, Index> longest_edge(const Simplex &s) {
    const Mat &V = s.vertices();
    double best = -1.0;
    std::pair<Index, Index> arg{0, 1};
    for (Index i = 0; i < V.cols(); ++i) {
        for (Index j = i + 1; j < V.cols(); ++j) {
            const double len2 = (V.col(i) - V.col(j)).squaredNorm();
            // Relative tolerance so exact geometric ties resolve to the
            // smallest (i, j) pair regardless of rounding noise.
            if (len2 > best * (1.0 + 1e-12)) {
                best = len2;
                arg = {i, j};
            }
        }
    }
    return arg;
}

SplitResult split_longest_edge(const Simplex &s, VertexPool &pool,
                               double min_volume) {
    const auto [i, j] = longest_edge(s);
    const Vec mid = 0.5 * (s.vertices().col(i) + s.vertices().col(j));
    const VertexId mid_id = pool.insert(mid);

    auto child = [&](Index drop) {
        std::vector<VertexId> ids;
        ids.reserve(s.vertex_ids().size());
        for (std::size_t k = 0; k < s.vertex_ids().size(); ++k)
            if (static_cast<Index>(k) != drop) ids.push_back(s.vertex_ids()[k]);
        ids.push_back(mid_id);
        return Simplex(std::move(ids), pool);
    };

    SplitResult r{child(i), child(j), mid_id, mid};
    if (min_volume > 0.0) {
        const double v1 = r.first.volume(), v2 = r.second.volume();
        if (v1 < min_volume || v2 < min_volume)
            throw DegenerateChildError("bisection child below minimum volume",
                                       std::min(v1, v2));
    }
    return r;
}

// --------------------------------------------------------------------------
// Initial triangulation
// --------------------------------------------------------------------------

namespace {

bool classify_box(const PolytopeV &dom, const std::vector<VertexId> &ids,
                  const VertexPool &pool, Vec &lo, Vec &hi,
                  std::vector<VertexId> &corner_by_mask) {
    const Index p = dom.p;
    const auto n = static_cast<Index>(ids.size());
    if (n != (Index{1} << p)) return false;
    lo.resize(p);
    hi.resize(p);
    for (Index i = 0; i < p; ++i) {
        double mn = pool.coords(ids[0])[i], mx = mn;
        for (Index k = 1; k < n; ++k) {
            const double v = pool.coords(ids[static_cast<std::size_t>(k)])[i];
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        if (!(mx > mn)) return false;
        lo[i] = mn;
        hi[i] = mx;
    }
    corner_by_mask.assign(std::size_t{1} << p, VertexId(-1));
    for (Index k = 0; k < n; ++k) {
        const Vec &v = pool.coords(ids[static_cast<std::size_t>(k)]);
        std::size_t mask = 0;
        for (Index i = 0; i < p; ++i) {
            const double span = hi[i] - lo[i];
            const double t = 1e-9 * std::max(1.0, span);
            if (std::abs(v[i] - hi[i]) <= t)
                mask |= (std::size_t{1} << i);
            else if (std::abs(v[i] - lo[i]) > t)
                return false; // strictly between faces: not a box corner
        }
        if (corner_by_mask[mask] != VertexId(-1)) return false;
        corner_by_mask[mask] = ids[static_cast<std::size_t>(k)];
    }
    for (auto id : corner_by_mask)
        if (id == VertexId(-1)) return false;
    return true;
}

std::vector<Simplex> kuhn_triangulation(Index p,
                                        const std::vector<VertexId> &corner,
                                        const VertexPool &pool) {
    std::vector<Index> perm(static_cast<std::size_t>(p));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::vector<Simplex> cells;
    do {
        std::vector<VertexId> ids;
        std::size_t mask = 0;
        ids.push_back(corner[mask]);
        for (Index k = 0; k < p; ++k) {
            mask |= (std::size_t{1} << perm[static_cast<std::size_t>(k)]);
            ids.push_back(corner[mask]);
        }
        cells.emplace_back(std::move(ids), pool);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return cells;
}

// Brute-force lower hull of the parabolic lift: a (p+1)-subset is a Delaunay
// cell iff the hyperplane through its lifted points supports all lifted
// points from below. Deterministic jitter on the lift heights resolves
// cospherical degeneracies (the result is then a regular triangulation of
// the same point set).
std::vector<Simplex> delaunay_lower_hull(const std::vector<VertexId> &ids,
                                         const VertexPool &pool) {
    const Index p = pool.dim();
    const auto n = static_cast<Index>(ids.size());
    double scale = 1.0;
    for (auto id : ids)
        scale = std::max(scale, pool.coords(id).lpNorm<Eigen::Infinity>());
    const double vol_eps = std::pow(1e-10 * scale, static_cast<double>(p));

    std::vector<double> lift(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k)
        lift[static_cast<std::size_t>(k)] =
            pool.coords(ids[static_cast<std::size_t>(k)]).squaredNorm();

    for (int attempt = 0; attempt < 4; ++attempt) {
        if (attempt > 0) {
            const double j0 = std::pow(10.0, attempt - 9) * scale * scale;
            for (Index k = 0; k < n; ++k)
                lift[static_cast<std::size_t>(k)] +=
                    j0 * static_cast<double>((k * 2654435761u) % 1024) / 1024.0;
        }
        std::vector<Simplex> cells;
        bool degenerate = false;

        std::vector<Index> sel(static_cast<std::size_t>(p) + 1);
        std::iota(sel.begin(), sel.end(), Index{0});
        auto advance = [&]() {
            Index i = p;
            while (i >= 0 && sel[static_cast<std::size_t>(i)] == n - (p + 1 - i))
                --i;
            if (i < 0) return false;
            ++sel[static_cast<std::size_t>(i)];
            for (Index j = i + 1; j <= p; ++j)
                sel[static_cast<std::size_t>(j)] = sel[static_cast<std::size_t>(j - 1)] + 1;
            return true;
        };

        do {
            Mat M(p + 1, p + 1);
            Vec w(p + 1);
            for (Index r = 0; r <= p; ++r) {
                const auto k = static_cast<std::size_t>(sel[static_cast<std::size_t>(r)]);
                M.row(r).head(p) = pool.coords(ids[k]).transpose();
                M(r, p) = 1.0;
                w[r] = lift[k];
            }
            // Full-dimensional check via the projected simplex volume.
            Mat E(p, p);
            for (Index j = 0; j < p; ++j)
                E.col(j) = M.row(j + 1).head(p).transpose() -
                           M.row(0).head(p).transpose();
            if (std::abs(E.determinant()) <= vol_eps) continue;

            Vec g = M.partialPivLu().solve(w);
            bool lower = true;
            for (Index k = 0; k < n && lower; ++k) {
                bool member = false;
                for (Index r = 0; r <= p; ++r)
                    if (sel[static_cast<std::size_t>(r)] == k) member = true;
                if (member) continue;
                const Vec &v = pool.coords(ids[static_cast<std::size_t>(k)]);
                const double plane = g.head(p).dot(v) + g[p];
                const double margin = lift[static_cast<std::size_t>(k)] - plane;
                const double teps = 1e-9 * scale * scale;
                if (std::abs(margin) < teps) degenerate = true;
                if (margin < -teps) lower = false;
            }
            if (lower) {
                std::vector<VertexId> cids;
                for (Index r = 0; r <= p; ++r)
                    cids.push_back(
                        ids[static_cast<std::size_t>(sel[static_cast<std::size_t>(r)])]);
                cells.emplace_back(std::move(cids), pool);
            }
        } while (advance());

        if (degenerate && attempt < 3) continue;

        // Validate the complex: every facet is shared by exactly two cells or
        // lies on the hull boundary.
        std::map<std::vector<VertexId>, int> facets;
        for (const auto &c : cells) {
            for (std::size_t drop = 0; drop < c.vertex_ids().size(); ++drop) {
                std::vector<VertexId> f;
                for (std::size_t k = 0; k < c.vertex_ids().size(); ++k)
                    if (k != drop) f.push_back(c.vertex_ids()[k]);
                facets[f] += 1;
            }
        }
        bool ok = !cells.empty();
        for (const auto &[f, count] : facets) {
            if (count == 2) continue;
            if (count != 1) {
                ok = false;
                break;
            }
            // Boundary facet: all points on one side of its hyperplane.
            Mat F(p, p);
            for (Index j = 0; j < p; ++j)
                F.col(j) = pool.coords(f[static_cast<std::size_t>(j)]);
            Vec base = F.col(0);
            Mat E2(p, p - 1 > 0 ? p - 1 : 1);
            for (Index j = 1; j < p; ++j) E2.col(j - 1) = F.col(j) - base;
            // Normal: null space of E2'.
            Eigen::JacobiSVD<Mat> svd(E2.transpose(),
                                      Eigen::ComputeFullV);
            Vec normal = svd.matrixV().col(p - 1);
            double mn = 0.0, mx = 0.0;
            for (auto id : ids) {
                const double t = normal.dot(pool.coords(id) - base);
                mn = std::min(mn, t);
                mx = std::max(mx, t);
            }
            const double teps = 1e-9 * std::max(1.0, scale);
            if (mn < -teps && mx > teps) {
                ok = false;
                break;
            }
        }
        if (ok) {
            std::sort(cells.begin(), cells.end(),
                      [](const Simplex &a, const Simplex &b) {
                          return a.vertex_ids() < b.vertex_ids();
                      });
            return cells;
        }
        if (attempt == 3)
            throw DegenerateDomainError(
                "Delaunay triangulation failed to produce a valid complex");
    }
    throw DegenerateDomainError("Delaunay triangulation failed");
}

} // namespace

std::vector<Simplex> initial_triangulation(const PolytopeV &domain,
                                           VertexPool &pool) {
    domain.validate();
    const Index p = domain.p;
    if (pool.dim() != p)
        throw InvalidArgumentError("pool/domain dimension mismatch");

    std::vector<VertexId> ids;
    ids.reserve(domain.vertices.size());
    for (const auto &v : domain.vertices) ids.push_back(pool.insert(v));
    // Deduplicate while preserving order.
    {
        std::vector<VertexId> uniq;
        for (auto id : ids)
            if (std::find(uniq.begin(), uniq.end(), id) == uniq.end())
                uniq.push_back(id);
        ids = std::move(uniq);
    }

    if (static_cast<Index>(ids.size()) == p + 1)
        return {Simplex(ids, pool)};

    Vec lo, hi;
    std::vector<VertexId> corner;
    if (classify_box(domain, ids, pool, lo, hi, corner))
        return kuhn_triangulation(p, corner, pool);

    if (p > 4)
        throw InvalidArgumentError(
            "general polytope triangulation supported for p <= 4 only");
    return delaunay_lower_hull(ids, pool);
}

} // namespace mpt
