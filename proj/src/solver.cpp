#include "mpt/solver.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mpt {

Index ConeSpec::dim() const {
    Index d = 0;
    for (const auto &b : blocks) d += b.dim;
    return d;
}

void ConeSpec::validate() const {
    for (const auto &b : blocks) {
        if (b.dim < 1) throw InvalidArgumentError("cone block with dim < 1");
    }
}

const char *to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::Numerical: return "Numerical";
    }
    return "?";
}

void ConicProgram::validate() const {
    const Index n = c.size();
    if (n < 1) throw InvalidArgumentError("conic program with no variables");
    if (A.size() > 0 && A.cols() != n)
        throw InvalidArgumentError("A column count mismatch");
    if (A.rows() != b.size()) throw InvalidArgumentError("A/b row mismatch");
    if (G.size() > 0 && G.cols() != n)
        throw InvalidArgumentError("G column count mismatch");
    if (G.rows() != h.size()) throw InvalidArgumentError("G/h row mismatch");
    Index d = nonneg;
    for (Index q : soc) {
        if (q < 1) throw InvalidArgumentError("SOC block with dim < 1");
        d += q;
    }
    if (d != h.size())
        throw InvalidArgumentError("cone dimensions do not match G/h rows");
}

namespace {

void dump_vec(std::ostream &os, const Vec &v) {
    os << "[";
    for (Index i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << v[i];
    }
    os << "]";
}

void dump_mat(std::ostream &os, const Mat &m) {
    os << "[";
    for (Index i = 0; i < m.rows(); ++i) {
        if (i) os << ",";
        dump_vec(os, m.row(i).transpose());
    }
    os << "]";
}

} // namespace

std::string ConicProgram::to_json() const {
    std::ostringstream os;
    os.precision(17);
    os << "{\"c\":";
    dump_vec(os, c);
    os << ",\"A\":";
    dump_mat(os, A);
    os << ",\"b\":";
    dump_vec(os, b);
    os << ",\"G\":";
    dump_mat(os, G);
    os << ",\"h\":";
    dump_vec(os, h);
    os << ",\"nonneg\":" << nonneg << ",\"soc\":[";
    for (std::size_t i = 0; i < soc.size(); ++i) {
        if (i) os << ",";
        os << soc[i];
    }
    os << "]}";
    return os.str();
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Slack-space layout helper: [nonneg block | soc block 0 | soc block 1 | ...].
struct ConeLayout {
    Index l = 0;
    std::vector<Index> soc;
    std::vector<Index> soc_start;
    Index dim = 0;
    Index degree = 0; // l + number of SOC blocks

    ConeLayout() = default;
    ConeLayout(Index nonneg, const std::vector<Index> &q) : l(nonneg), soc(q) {
        dim = l;
        for (Index s : soc) {
            soc_start.push_back(dim);
            dim += s;
        }
        degree = l + static_cast<Index>(soc.size());
    }

    // Identity element of the cone's Jordan algebra.
    Vec identity() const {
        Vec e = Vec::Zero(dim);
        e.head(l).setOnes();
        for (std::size_t k = 0; k < soc.size(); ++k) e[soc_start[k]] = 1.0;
        return e;
    }

    // Smallest cone eigenvalue: min(u_i) over nonneg, min(u0 - |u1|) over SOC.
    double min_eig(const Vec &u) const {
        double m = kInf;
        for (Index i = 0; i < l; ++i) m = std::min(m, u[i]);
        for (std::size_t k = 0; k < soc.size(); ++k) {
            const Index s = soc_start[k], q = soc[k];
            m = std::min(m, u[s] - u.segment(s + 1, q - 1).norm());
        }
        return dim > 0 ? m : kInf;
    }

    // Jordan product u o v.
    Vec prod(const Vec &u, const Vec &v) const {
        Vec r(dim);
        r.head(l) = u.head(l).cwiseProduct(v.head(l));
        for (std::size_t k = 0; k < soc.size(); ++k) {
            const Index s = soc_start[k], q = soc[k];
            r[s] = u.segment(s, q).dot(v.segment(s, q));
            if (q > 1)
                r.segment(s + 1, q - 1) = u[s] * v.segment(s + 1, q - 1) +
                                          v[s] * u.segment(s + 1, q - 1);
        }
        return r;
    }

    // Solve lambda o u = d for u (arrow-matrix inverse per block).
    Vec solve(const Vec &lambda, const Vec &d) const {
        Vec u(dim);
        u.head(l) = d.head(l).cwiseQuotient(lambda.head(l));
        for (std::size_t k = 0; k < soc.size(); ++k) {
            const Index s = soc_start[k], q = soc[k];
            const double l0 = lambda[s];
            if (q == 1) {
                u[s] = d[s] / l0;
                continue;
            }
            const auto l1 = lambda.segment(s + 1, q - 1);
            const auto d1 = d.segment(s + 1, q - 1);
            const double den = l0 * l0 - l1.squaredNorm();
            const double u0 = (l0 * d[s] - l1.dot(d1)) / den;
            u[s] = u0;
            u.segment(s + 1, q - 1) = (d1 - u0 * l1) / l0;
        }
        return u;
    }

    // Largest t such that u + t*du stays in the cone (may be +inf).
    double max_step(const Vec &u, const Vec &du) const {
        double t = kInf;
        for (Index i = 0; i < l; ++i)
            if (du[i] < 0.0) t = std::min(t, -u[i] / du[i]);
        for (std::size_t k = 0; k < soc.size(); ++k) {
            const Index s = soc_start[k], q = soc[k];
            if (q == 1) {
                if (du[s] < 0.0) t = std::min(t, -u[s] / du[s]);
                continue;
            }
            const auto u1 = u.segment(s + 1, q - 1);
            const auto d1 = du.segment(s + 1, q - 1);
            const double a = du[s] * du[s] - d1.squaredNorm();
            const double b = 2.0 * (u[s] * du[s] - u1.dot(d1));
            const double c = u[s] * u[s] - u1.squaredNorm();
            const double scale = std::max({1.0, std::abs(a), std::abs(b)});
            double best = kInf;
            if (std::abs(a) < 1e-14 * scale) {
                if (b < 0.0) best = -c / b;
            } else {
                const double disc = b * b - 4.0 * a * c;
                if (disc >= 0.0) {
                    const double sq = std::sqrt(disc);
                    for (double r : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
                        if (r > 0.0 && u[s] + r * du[s] >= -1e-12 * (1.0 + std::abs(u[s])))
                            best = std::min(best, r);
                    }
                }
            }
            t = std::min(t, best);
        }
        return t;
    }
};

// Nesterov-Todd scaling point of the (s, z) pair. W is symmetric positive
// definite with W z = W^{-1} s = lambda.
struct Scaling {
    const ConeLayout *lay = nullptr;
    Vec w_lp;   // sqrt(s/z) on the nonneg block
    Vec eta;    // per-SOC scaling magnitude
    std::vector<Vec> wbar; // per-SOC normalized scaling point

    void compute(const ConeLayout &layout, const Vec &s, const Vec &z) {
        lay = &layout;
        w_lp = (s.head(layout.l).cwiseQuotient(z.head(layout.l))).cwiseSqrt();
        const auto nsoc = layout.soc.size();
        eta.resize(static_cast<Index>(nsoc));
        wbar.assign(nsoc, Vec());
        for (std::size_t k = 0; k < nsoc; ++k) {
            const Index st = layout.soc_start[k], q = layout.soc[k];
            const auto sk = s.segment(st, q);
            const auto zk = z.segment(st, q);
            if (q == 1) {
                eta[static_cast<Index>(k)] = std::sqrt(sk[0] / zk[0]);
                wbar[k] = Vec::Ones(1);
                continue;
            }
            const double res_s =
                std::sqrt(sk[0] * sk[0] - sk.tail(q - 1).squaredNorm());
            const double res_z =
                std::sqrt(zk[0] * zk[0] - zk.tail(q - 1).squaredNorm());
            const Vec sb = sk / res_s;
            Vec zb = zk / res_z;
            const double gamma = std::sqrt((1.0 + sb.dot(zb)) / 2.0);
            zb[0] = -zb[0]; // J zb with flipped sign below
            Vec w = (sb - zb) / (2.0 * gamma); // sb + J*(zk/res_z)
            // w satisfies w0^2 - |w1|^2 = 1 up to rounding.
            wbar[k] = w;
            eta[static_cast<Index>(k)] = std::sqrt(res_s / res_z);
        }
    }

    // Apply W (inverse = false) or W^{-1} (inverse = true).
    Vec apply(const Vec &v, bool inverse) const {
        const ConeLayout &L = *lay;
        Vec r(L.dim);
        if (inverse)
            r.head(L.l) = v.head(L.l).cwiseQuotient(w_lp);
        else
            r.head(L.l) = v.head(L.l).cwiseProduct(w_lp);
        for (std::size_t k = 0; k < L.soc.size(); ++k) {
            const Index st = L.soc_start[k], q = L.soc[k];
            const double e = inverse ? 1.0 / eta[static_cast<Index>(k)]
                                     : eta[static_cast<Index>(k)];
            if (q == 1) {
                r[st] = e * v[st];
                continue;
            }
            const Vec &w = wbar[k];
            const double sgn = inverse ? -1.0 : 1.0;
            const auto v1 = v.segment(st + 1, q - 1);
            const auto w1 = w.tail(q - 1);
            const double w1v1 = w1.dot(v1);
            r[st] = e * (w[0] * v[st] + sgn * w1v1);
            r.segment(st + 1, q - 1) =
                e * (sgn * v[st] * w1 + v1 + (w1v1 / (1.0 + w[0])) * w1);
        }
        return r;
    }

    // Dense W^2 = W'W, block diagonal, for the KKT (3,3) block.
    Mat w_squared() const {
        const ConeLayout &L = *lay;
        Mat W2 = Mat::Zero(L.dim, L.dim);
        W2.diagonal().head(L.l) = w_lp.cwiseProduct(w_lp);
        for (std::size_t k = 0; k < L.soc.size(); ++k) {
            const Index st = L.soc_start[k], q = L.soc[k];
            const double e2 = eta[static_cast<Index>(k)] * eta[static_cast<Index>(k)];
            if (q == 1) {
                W2(st, st) = e2;
                continue;
            }
            const Vec &w = wbar[k];
            Mat Wb(q, q);
            Wb(0, 0) = w[0];
            Wb.row(0).tail(q - 1) = w.tail(q - 1).transpose();
            Wb.col(0).tail(q - 1) = w.tail(q - 1);
            Wb.bottomRightCorner(q - 1, q - 1) =
                Mat::Identity(q - 1, q - 1) +
                (w.tail(q - 1) * w.tail(q - 1).transpose()) / (1.0 + w[0]);
            W2.block(st, st, q, q) = e2 * (Wb * Wb);
        }
        return W2;
    }
};

struct KktSystem {
    Index n, p, d;
    Mat K;     // unregularized, for refinement
    Eigen::PartialPivLU<Mat> lu;
    int refine_steps;

    void factor(const ConicProgram &pr, const Mat &W2, double reg,
                int refine) {
        n = pr.num_vars();
        p = pr.num_eq();
        d = pr.cone_dim();
        refine_steps = refine;
        const Index N = n + p + d;
        K = Mat::Zero(N, N);
        if (p > 0) {
            K.block(n, 0, p, n) = pr.A;
            K.block(0, n, n, p) = pr.A.transpose();
        }
        if (d > 0) {
            K.block(n + p, 0, d, n) = pr.G;
            K.block(0, n + p, n, d) = pr.G.transpose();
            K.block(n + p, n + p, d, d) = -W2;
        }
        Mat Kreg = K;
        Kreg.diagonal().head(n).array() += reg;
        Kreg.diagonal().tail(p + d).array() -= reg;
        lu.compute(Kreg);
    }

    // Solve K [x;y;z] = [bx;by;bz] with iterative refinement against the
    // unregularized matrix.
    void solve(const Vec &bx, const Vec &by, const Vec &bz, Vec &x, Vec &y,
               Vec &z) const {
        Vec rhs(n + p + d);
        rhs << bx, by, bz;
        Vec sol = lu.solve(rhs);
        for (int it = 0; it < refine_steps; ++it) {
            Vec resid = rhs - K * sol;
            sol += lu.solve(resid);
        }
        x = sol.head(n);
        y = sol.segment(n, p);
        z = sol.tail(d);
    }
};

} // namespace

ConicSolver::ConicSolver(SolverSettings settings) : settings_(settings) {}

namespace {

// Ruiz equilibration. Rows inside one SOC block share a scaling factor so
// the cone is preserved; columns and the cost get their own scales.
struct Equilibration {
    Vec col;      // E
    Vec row_eq;   // Da
    Vec row_cone; // Dg, block-uniform over SOC rows
    double cost_scale = 1.0;

    ConicProgram apply(const ConicProgram &prog) const {
        ConicProgram s = prog;
        const Index n = prog.num_vars(), l = prog.num_eq(), d = prog.cone_dim();
        for (Index j = 0; j < n; ++j) {
            if (l > 0) s.A.col(j) *= col[j];
            if (d > 0) s.G.col(j) *= col[j];
        }
        for (Index i = 0; i < l; ++i) s.A.row(i) *= row_eq[i];
        s.b = row_eq.asDiagonal() * prog.b;
        for (Index i = 0; i < d; ++i) s.G.row(i) *= row_cone[i];
        s.h = row_cone.asDiagonal() * prog.h;
        s.c = cost_scale * col.cwiseProduct(prog.c);
        return s;
    }
};

Equilibration ruiz_equilibrate(const ConicProgram &prog, int iters) {
    const Index n = prog.num_vars(), l = prog.num_eq(), d = prog.cone_dim();
    Equilibration eq;
    eq.col = Vec::Ones(n);
    eq.row_eq = Vec::Ones(l);
    eq.row_cone = Vec::Ones(d);

    auto safe_scale = [](double nrm) {
        return (nrm > 1e-12 && std::isfinite(nrm)) ? 1.0 / std::sqrt(nrm) : 1.0;
    };

    for (int it = 0; it < iters; ++it) {
        // Row pass.
        for (Index i = 0; i < l; ++i) {
            double nrm = 0.0;
            for (Index j = 0; j < n; ++j)
                nrm = std::max(nrm,
                               std::abs(eq.row_eq[i] * prog.A(i, j) * eq.col[j]));
            eq.row_eq[i] *= safe_scale(nrm);
        }
        Index at = 0;
        auto scale_rows = [&](Index rows, bool uniform) {
            double block_nrm = 0.0;
            for (Index r = at; r < at + rows; ++r) {
                double nrm = 0.0;
                for (Index j = 0; j < n; ++j)
                    nrm = std::max(
                        nrm, std::abs(eq.row_cone[r] * prog.G(r, j) * eq.col[j]));
                if (uniform)
                    block_nrm = std::max(block_nrm, nrm);
                else
                    eq.row_cone[r] *= safe_scale(nrm);
            }
            if (uniform) {
                const double f = safe_scale(block_nrm);
                for (Index r = at; r < at + rows; ++r) eq.row_cone[r] *= f;
            }
            at += rows;
        };
        scale_rows(prog.nonneg, false);
        for (Index q : prog.soc) scale_rows(q, true);

        // Column pass over the stacked matrix.
        for (Index j = 0; j < n; ++j) {
            double nrm = 0.0;
            for (Index i = 0; i < l; ++i)
                nrm = std::max(nrm,
                               std::abs(eq.row_eq[i] * prog.A(i, j) * eq.col[j]));
            for (Index r = 0; r < d; ++r)
                nrm = std::max(
                    nrm, std::abs(eq.row_cone[r] * prog.G(r, j) * eq.col[j]));
            eq.col[j] *= safe_scale(nrm);
        }
    }
    const double cn = eq.col.cwiseProduct(prog.c).lpNorm<Eigen::Infinity>();
    eq.cost_scale = (cn > 1e-12 && std::isfinite(cn)) ? 1.0 / cn : 1.0;
    return eq;
}

SolverSolution solve_core(const ConicProgram &prog, const SolverSettings &st);

} // namespace

SolverSolution ConicSolver::solve(const ConicProgram &prog) {
    prog.validate();
    const Equilibration eq = ruiz_equilibrate(prog, 5);
    SolverSolution sol = solve_core(eq.apply(prog), settings_);

    // Undo the scaling; report residuals against the original data.
    sol.x = eq.col.cwiseProduct(sol.x);
    if (sol.y.size() > 0)
        sol.y = eq.row_eq.cwiseProduct(sol.y) / eq.cost_scale;
    if (sol.z.size() > 0)
        sol.z = eq.row_cone.cwiseProduct(sol.z) / eq.cost_scale;
    if (sol.status == SolveStatus::Optimal) {
        sol.value = prog.c.dot(sol.x);
        sol.residuals.primal_eq =
            prog.num_eq() > 0 ? (prog.A * sol.x - prog.b).norm() : 0.0;
        if (prog.cone_dim() > 0) {
            const Vec slack = prog.h - prog.G * sol.x;
            const ConeLayout lay(prog.nonneg, prog.soc);
            sol.residuals.cone_dist = std::max(0.0, -lay.min_eig(slack));
            sol.residuals.duality_gap = std::abs(slack.dot(sol.z));
        } else {
            sol.residuals.cone_dist = 0.0;
            sol.residuals.duality_gap = 0.0;
        }
    }
    return sol;
}

namespace {

SolverSolution solve_core(const ConicProgram &prog, const SolverSettings &settings_) {
    const Index n = prog.num_vars();
    const Index p = prog.num_eq();
    const ConeLayout lay(prog.nonneg, prog.soc);
    const Index d = lay.dim;
    const SolverSettings &st = settings_;

    SolverSolution out;
    out.x = Vec::Zero(n);
    out.y = Vec::Zero(p);
    out.z = Vec::Zero(d);

    const double bh_scale =
        std::max(1.0, std::sqrt(prog.b.squaredNorm() + prog.h.squaredNorm()));
    const double c_scale = std::max(1.0, prog.c.norm());
    double data_scale = 1.0;
    if (p > 0) data_scale = std::max(data_scale, prog.A.cwiseAbs().maxCoeff());
    if (d > 0) data_scale = std::max(data_scale, prog.G.cwiseAbs().maxCoeff());

    // Iterate state.
    Vec x = Vec::Zero(n), y = Vec::Zero(p);
    Vec s = lay.identity(), z = lay.identity();
    double tau = 1.0, kappa = 1.0;

    Scaling W;
    KktSystem kkt;

    // Initial point: least-norm primal/dual estimates from the KKT system
    // with identity scaling, shifted into the cone interior.
    {
        kkt.factor(prog, Mat::Identity(d, d), st.static_reg, st.refine_steps);
        Vec x0, y0, z0;
        kkt.solve(Vec::Zero(n), prog.b, prog.h, x0, y0, z0);
        Vec s0 = -z0;
        Vec xd, yd, zd;
        kkt.solve(-prog.c, Vec::Zero(p), Vec::Zero(d), xd, yd, zd);
        bool finite = s0.allFinite() && zd.allFinite() && x0.allFinite() &&
                      yd.allFinite();
        if (finite) {
            x = x0;
            y = yd;
            if (d > 0) {
                const Vec e = lay.identity();
                const double vs = -lay.min_eig(s0);
                s = (vs < -1e-8) ? s0 : s0 + (1.0 + vs) * e;
                const double vz = -lay.min_eig(zd);
                z = (vz < -1e-8) ? zd : zd + (1.0 + vz) * e;
            }
        }
    }

    const Index deg = lay.degree;
    double resx0 = std::max(1.0, prog.c.norm());
    double resy0 = std::max(1.0, prog.b.norm());
    double resz0 = std::max(1.0, prog.h.norm());
    (void)resx0;
    (void)resy0;
    (void)resz0;

    for (int iter = 0; iter <= st.max_iters; ++iter) {
        // Residuals of the homogeneous embedding.
        Vec rx = prog.c * tau;
        if (p > 0) rx += prog.A.transpose() * y;
        if (d > 0) rx += prog.G.transpose() * z;
        Vec ry = (p > 0) ? Vec(prog.A * x - prog.b * tau) : Vec(Vec::Zero(0));
        Vec rz = (d > 0) ? Vec(prog.G * x + s - prog.h * tau) : Vec(Vec::Zero(0));
        const double cx = prog.c.dot(x);
        const double by_hz = prog.b.dot(y) + prog.h.dot(z);
        const double rtau = cx + by_hz + kappa;

        const double sz = (d > 0) ? s.dot(z) : 0.0;
        const double mu = (sz + tau * kappa) / static_cast<double>(deg + 1);

        // Optimality.
        const double pres =
            std::sqrt(ry.squaredNorm() + rz.squaredNorm()) / tau / bh_scale;
        const double dres = rx.norm() / tau / c_scale;
        const double pcost = cx / tau;
        const double gap = sz / (tau * tau);
        const double relgap = gap / std::max(1.0, std::abs(pcost));
        if (pres <= st.tol && dres <= st.tol &&
            (gap <= st.tol_gap || relgap <= st.tol_relgap)) {
            out.status = SolveStatus::Optimal;
            out.x = x / tau;
            out.y = y / tau;
            out.z = z / tau;
            out.value = pcost;
            out.iterations = iter;
            Vec shat = s / tau;
            out.residuals.primal_eq = (p > 0) ? (prog.A * out.x - prog.b).norm() : 0.0;
            double conires = (d > 0) ? (prog.G * out.x + shat - prog.h).norm() : 0.0;
            double conviol = (d > 0) ? std::max(0.0, -lay.min_eig(shat)) : 0.0;
            out.residuals.cone_dist = std::max(conires, conviol);
            out.residuals.duality_gap = gap;
            return out;
        }

        // Infeasibility certificates.
        if (by_hz < 0.0) {
            Vec cert = rx - prog.c * tau; // A'y + G'z
            const double pinfres = cert.norm() / (-by_hz) / data_scale;
            if (pinfres <= st.tol) {
                out.status = SolveStatus::Infeasible;
                out.y = y / (-by_hz);
                out.z = z / (-by_hz);
                out.iterations = iter;
                return out;
            }
        }
        if (cx < 0.0) {
            double unb = 0.0;
            if (p > 0) unb += (prog.A * x).squaredNorm();
            if (d > 0) unb += (prog.G * x + s).squaredNorm();
            const double dinfres = std::sqrt(unb) / (-cx) / data_scale;
            if (dinfres <= st.tol) {
                out.status = SolveStatus::Unbounded;
                out.x = x / (-cx);
                out.iterations = iter;
                return out;
            }
        }

        if (iter == st.max_iters) break;

        // Scaled complementarity.
        Vec lambda;
        if (d > 0) {
            W.compute(lay, s, z);
            lambda = W.apply(z, false);
        }

        kkt.factor(prog, (d > 0) ? W.w_squared() : Mat(0, 0), st.static_reg,
                   st.refine_steps);
        Vec x1, y1, z1;
        kkt.solve(-prog.c, prog.b, prog.h, x1, y1, z1);
        const double denom =
            prog.c.dot(x1) + prog.b.dot(y1) + prog.h.dot(z1) - kappa / tau;
        if (!std::isfinite(denom) || std::abs(denom) < 1e-300) break;

        auto newton = [&](const Vec &bx, const Vec &by, const Vec &bz,
                          double btau, const Vec &bs, double bkappa, Vec &dx,
                          Vec &dy, Vec &dz, Vec &ds, double &dtau,
                          double &dkappa) {
            Vec ds_tilde = (d > 0) ? lay.solve(lambda, bs) : Vec(Vec::Zero(0));
            Vec rhs_z = (d > 0) ? Vec(bz - W.apply(ds_tilde, false))
                                : Vec(Vec::Zero(0));
            Vec x2, y2, z2;
            kkt.solve(bx, by, rhs_z, x2, y2, z2);
            dtau = (btau - bkappa / tau -
                    (prog.c.dot(x2) + prog.b.dot(y2) + prog.h.dot(z2))) /
                   denom;
            dx = x2 + dtau * x1;
            dy = y2 + dtau * y1;
            dz = z2 + dtau * z1;
            ds = (d > 0) ? Vec(W.apply(ds_tilde - W.apply(dz, false), false))
                         : Vec(Vec::Zero(0));
            dkappa = (bkappa - kappa * dtau) / tau;
        };

        // Affine (predictor) direction.
        Vec ll = (d > 0) ? lay.prod(lambda, lambda) : Vec(Vec::Zero(0));
        Vec dxa, dya, dza, dsa;
        double dtaua, dkappaa;
        newton(-rx, -ry, -rz, -rtau, -ll, -tau * kappa, dxa, dya, dza, dsa,
               dtaua, dkappaa);

        auto boundary = [&](const Vec &ds_, const Vec &dz_, double dtau_,
                            double dkappa_) {
            double t = kInf;
            if (d > 0) {
                t = std::min(t, lay.max_step(s, ds_));
                t = std::min(t, lay.max_step(z, dz_));
            }
            if (dtau_ < 0.0) t = std::min(t, -tau / dtau_);
            if (dkappa_ < 0.0) t = std::min(t, -kappa / dkappa_);
            return t;
        };

        const double alpha_aff = std::min(1.0, boundary(dsa, dza, dtaua, dkappaa));
        double sigma = std::pow(1.0 - alpha_aff, 3);
        sigma = std::min(1.0, std::max(0.0, sigma));

        // Combined (corrector) direction.
        Vec bs;
        if (d > 0) {
            Vec corr = lay.prod(W.apply(dsa, true), W.apply(dza, false));
            bs = sigma * mu * lay.identity() - ll - corr;
        } else {
            bs = Vec::Zero(0);
        }
        const double bkappa = sigma * mu - tau * kappa - dtaua * dkappaa;
        const double sc = 1.0 - sigma;
        Vec dx, dy, dz, ds;
        double dtau, dkappa;
        newton(-sc * rx, -sc * ry, -sc * rz, -sc * rtau, bs, bkappa, dx, dy, dz,
               ds, dtau, dkappa);

        double step = 0.99 * boundary(ds, dz, dtau, dkappa);
        step = std::min(1.0, step);
        // Safety: back off until strictly interior.
        for (int guard = 0; guard < 60; ++guard) {
            bool ok = tau + step * dtau > 0.0 && kappa + step * dkappa > 0.0;
            if (ok && d > 0)
                ok = lay.min_eig(s + step * ds) > 0.0 &&
                     lay.min_eig(z + step * dz) > 0.0;
            if (ok) break;
            step *= 0.5;
        }
        if (step < st.min_step) break;

        x += step * dx;
        y += step * dy;
        if (d > 0) {
            s += step * ds;
            z += step * dz;
        }
        tau += step * dtau;
        kappa += step * dkappa;
        out.iterations = iter + 1;
    }

    // No convergence: attempt a last classification with relaxed certificate
    // tolerance before reporting a numerical failure.
    {
        const double relaxed = std::sqrt(st.tol);
        const double by_hz = prog.b.dot(y) + prog.h.dot(z);
        const double cx = prog.c.dot(x);
        if (tau < 1e-6 * std::min(1.0, kappa)) {
            if (by_hz < 0.0) {
                Vec cert = Vec::Zero(n);
                if (p > 0) cert += prog.A.transpose() * y;
                if (d > 0) cert += prog.G.transpose() * z;
                if (cert.norm() / (-by_hz) / data_scale <= relaxed) {
                    out.status = SolveStatus::Infeasible;
                    return out;
                }
            }
            if (cx < 0.0) {
                double unb = 0.0;
                if (p > 0) unb += (prog.A * x).squaredNorm();
                if (d > 0) unb += (prog.G * x + s).squaredNorm();
                if (std::sqrt(unb) / (-cx) / data_scale <= relaxed) {
                    out.status = SolveStatus::Unbounded;
                    return out;
                }
            }
        }
    }
    out.status = SolveStatus::Numerical;
    return out;
}

} // namespace

} // namespace mpt
