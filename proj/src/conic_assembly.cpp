#include "mpt/conic_assembly.hpp"

namespace mpt {

namespace {

// Shared skeleton: the caller supplies the parameter substitution
// theta = T*v + t0 over the full variable vector v (n_bar + n_extra wide),
// plus any extra equality / nonneg rows and the objective.
struct ExtraRows {
    Mat eq_lhs;  // rows x n_total
    Vec eq_rhs;
    Mat nn_lhs;  // rows of G
    Vec nn_rhs;  // rows of h
};

ConicProgram assemble_core(const FixedCommutationProgram &prog, Index n_extra,
                           const Mat &T, const Vec &t0, const ExtraRows &extra,
                           const Vec &cost) {
    const Index n = prog.n_bar;
    const Index nt = n + n_extra;

    // Substituted conic expression rows: for a cone row block with data
    // (Hx, Ht, h) the slack is Hx*x + Ht*(T v + t0) + h. In terms of v the
    // row reads [Hx, 0] v + Ht*T v + (Ht*t0 + h).
    auto expr_lhs = [&](Index row0, Index rows) {
        Mat L = Mat::Zero(rows, nt);
        L.leftCols(n) = prog.H_x.middleRows(row0, rows);
        L += prog.H_theta.middleRows(row0, rows) * T;
        return L;
    };
    auto expr_const = [&](Index row0, Index rows) {
        return Vec(prog.H_theta.middleRows(row0, rows) * t0 +
                   prog.h.segment(row0, rows));
    };

    Index zero_rows = 0, nn_rows = 0, soc_rows = 0;
    for (const auto &bl : prog.cone.blocks) {
        switch (bl.kind) {
        case ConeKind::Zero: zero_rows += bl.dim; break;
        case ConeKind::NonNeg: nn_rows += bl.dim; break;
        case ConeKind::SecondOrder: soc_rows += bl.dim; break;
        }
    }

    const Index l_eq = prog.b.size();
    const Index extra_eq = extra.eq_rhs.size();
    const Index extra_nn = extra.nn_rhs.size();

    ConicProgram out;
    out.c = cost;
    out.A = Mat::Zero(l_eq + zero_rows + extra_eq, nt);
    out.b = Vec::Zero(l_eq + zero_rows + extra_eq);
    out.nonneg = nn_rows + extra_nn;
    out.G = Mat::Zero(nn_rows + extra_nn + soc_rows, nt);
    out.h = Vec::Zero(nn_rows + extra_nn + soc_rows);

    // Equalities: A_x x + A_theta theta = b.
    if (l_eq > 0) {
        out.A.topLeftCorner(l_eq, n) = prog.A_x;
        out.A.topRows(l_eq) += prog.A_theta * T;
        out.b.head(l_eq) = prog.b - prog.A_theta * t0;
    }

    Index eq_at = l_eq, nn_at = 0, soc_at = nn_rows + extra_nn, row = 0;
    for (const auto &bl : prog.cone.blocks) {
        switch (bl.kind) {
        case ConeKind::Zero:
            // expr = 0  =>  lhs v = -const
            out.A.middleRows(eq_at, bl.dim) = expr_lhs(row, bl.dim);
            out.b.segment(eq_at, bl.dim) = -expr_const(row, bl.dim);
            eq_at += bl.dim;
            break;
        case ConeKind::NonNeg:
            // s = expr  =>  -lhs v + s = const
            out.G.middleRows(nn_at, bl.dim) = -expr_lhs(row, bl.dim);
            out.h.segment(nn_at, bl.dim) = expr_const(row, bl.dim);
            nn_at += bl.dim;
            break;
        case ConeKind::SecondOrder:
            out.G.middleRows(soc_at, bl.dim) = -expr_lhs(row, bl.dim);
            out.h.segment(soc_at, bl.dim) = expr_const(row, bl.dim);
            out.soc.push_back(bl.dim);
            soc_at += bl.dim;
            break;
        }
        row += bl.dim;
    }

    if (extra_eq > 0) {
        out.A.middleRows(eq_at, extra_eq) = extra.eq_lhs;
        out.b.segment(eq_at, extra_eq) = extra.eq_rhs;
    }
    if (extra_nn > 0) {
        out.G.middleRows(nn_at, extra_nn) = extra.nn_lhs;
        out.h.segment(nn_at, extra_nn) = extra.nn_rhs;
    }
    return out;
}

} // namespace

ConicProgram assemble_fixed_theta(const FixedCommutationProgram &prog,
                                  const Vec &theta, bool zero_cost) {
    if (theta.size() != prog.p)
        throw InvalidArgumentError("theta dimension mismatch");
    Mat T = Mat::Zero(prog.p, prog.n_bar);
    Vec cost = zero_cost ? Vec(Vec::Zero(prog.n_bar)) : prog.c_x;
    return assemble_core(prog, 0, T, theta, ExtraRows{}, cost);
}

ConicProgram assemble_over_simplex(const FixedCommutationProgram &prog,
                                   const Mat &V, const Vec &alpha_cost_extra) {
    const Index p1 = V.cols();
    const Index n = prog.n_bar;
    if (V.rows() != prog.p)
        throw InvalidArgumentError("simplex vertex dimension mismatch");

    Mat T = Mat::Zero(prog.p, n + p1);
    T.rightCols(p1) = V;

    ExtraRows extra;
    // sum(alpha) = 1
    extra.eq_lhs = Mat::Zero(1, n + p1);
    extra.eq_lhs.row(0).tail(p1).setOnes();
    extra.eq_rhs = Vec::Ones(1);
    // alpha >= 0: s = alpha
    extra.nn_lhs = Mat::Zero(p1, n + p1);
    extra.nn_lhs.rightCols(p1) = -Mat::Identity(p1, p1);
    extra.nn_rhs = Vec::Zero(p1);

    Vec cost = Vec::Zero(n + p1);
    cost.head(n) = prog.c_x;
    cost.tail(p1) = V.transpose() * prog.c_theta;
    if (alpha_cost_extra.size() > 0) cost.tail(p1) += alpha_cost_extra;

    return assemble_core(prog, p1, T, Vec::Zero(prog.p), extra, cost);
}

ConicProgram assemble_shooting(const FixedCommutationProgram &prog,
                               const Vec &center, const Vec &dir) {
    const Index n = prog.n_bar;
    Mat T = Mat::Zero(prog.p, n + 1);
    T.col(n) = dir;

    ExtraRows extra;
    // 0 <= a <= 1: s1 = a, s2 = 1 - a
    extra.nn_lhs = Mat::Zero(2, n + 1);
    extra.nn_lhs(0, n) = -1.0;
    extra.nn_lhs(1, n) = 1.0;
    extra.nn_rhs = Vec::Zero(2);
    extra.nn_rhs[1] = 1.0;

    Vec cost = Vec::Zero(n + 1);
    cost[n] = -1.0; // maximize a

    return assemble_core(prog, 1, T, center, extra, cost);
}

} // namespace mpt
