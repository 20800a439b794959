#include "mpt/problem.hpp"

#include "mpt/conic_assembly.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace mpt {

std::string delta_to_string(const Delta &d) {
    std::string s;
    s.reserve(d.size());
    for (auto b : d) s.push_back(b ? '1' : '0');
    return s;
}

void ToleranceConfig::validate_for_refine() const {
    if (eps_a <= 0.0 && eps_r <= 0.0)
        throw InvalidArgumentError(
            "at least one of eps_a, eps_r must be strictly positive");
    if (eps_a < 0.0 || eps_r < 0.0)
        throw InvalidArgumentError("negative suboptimality tolerance");
    if (max_depth < 1) throw InvalidArgumentError("max_depth must be >= 1");
}

SolverSettings ToleranceConfig::solver_settings() const {
    SolverSettings s;
    s.tol = 0.1 * solver_tol;
    s.tol_gap = 0.1 * solver_tol;
    s.tol_relgap = 0.01 * solver_tol;
    return s;
}

CommutationSpace::CommutationSpace(Index m, std::vector<Delta> admissible)
    : m_(m), admissible_(std::move(admissible)) {
    if (admissible_.empty())
        throw InvalidArgumentError("admissible commutation set is empty");
    std::set<Delta> seen;
    for (const auto &d : admissible_) {
        if (static_cast<Index>(d.size()) != m_)
            throw InvalidArgumentError("commutation bit-length mismatch");
        for (auto b : d)
            if (b != 0 && b != 1)
                throw InvalidArgumentError("commutation entries must be 0/1");
        if (!seen.insert(d).second)
            throw InvalidArgumentError("duplicate commutation in admissible set");
    }
}

CommutationSpace CommutationSpace::full_hypercube(Index m) {
    if (m < 1 || m > 20)
        throw InvalidArgumentError("full hypercube limited to 1 <= m <= 20");
    std::vector<Delta> all;
    all.reserve(std::size_t{1} << m);
    for (std::uint32_t v = 0; v < (std::uint32_t{1} << m); ++v) {
        Delta d(static_cast<std::size_t>(m));
        for (Index j = 0; j < m; ++j)
            d[static_cast<std::size_t>(j)] =
                static_cast<std::uint8_t>((v >> (m - 1 - j)) & 1u);
        all.push_back(std::move(d));
    }
    return CommutationSpace(m, std::move(all));
}

std::optional<Index> CommutationSpace::index_of(const Delta &delta) const {
    for (std::size_t i = 0; i < admissible_.size(); ++i)
        if (admissible_[i] == delta) return static_cast<Index>(i);
    return std::nullopt;
}

void FixedCommutationProgram::validate() const {
    if (n_bar < 1) throw InvalidArgumentError("program with n_bar < 1");
    if (p < 1) throw InvalidArgumentError("program with p < 1");
    if (c_x.size() != n_bar || c_theta.size() != p)
        throw InvalidArgumentError("cost dimension mismatch");
    const Index l = b.size();
    if (A_x.rows() != l || (l > 0 && A_x.cols() != n_bar))
        throw InvalidArgumentError("equality A_x dimension mismatch");
    if (A_theta.rows() != l || (l > 0 && A_theta.cols() != p))
        throw InvalidArgumentError("equality A_theta dimension mismatch");
    cone.validate();
    const Index d = cone.dim();
    if (H_x.rows() != d || (d > 0 && H_x.cols() != n_bar))
        throw InvalidArgumentError("conic H_x dimension mismatch");
    if (H_theta.rows() != d || (d > 0 && H_theta.cols() != p))
        throw InvalidArgumentError("conic H_theta dimension mismatch");
    if (h.size() != d) throw InvalidArgumentError("conic h dimension mismatch");
}

void PolytopeV::validate() const {
    if (p < 1) throw InvalidArgumentError("polytope with p < 1");
    if (static_cast<Index>(vertices.size()) < p + 1)
        throw DegenerateDomainError("polytope needs at least p+1 vertices");
    for (const auto &v : vertices)
        if (v.size() != p)
            throw InvalidArgumentError("polytope vertex dimension mismatch");
    // Full-dimensionality: rank of the edge matrix must be p.
    Mat E(p, static_cast<Index>(vertices.size()) - 1);
    for (Index j = 1; j < static_cast<Index>(vertices.size()); ++j)
        E.col(j - 1) = vertices[static_cast<std::size_t>(j)] - vertices[0];
    Eigen::JacobiSVD<Mat> svd(E);
    const auto &sv = svd.singularValues();
    if (sv.size() < p || sv[p - 1] <= 1e-12 * std::max(1.0, sv[0]))
        throw DegenerateDomainError("polytope vertices are affinely dependent");
}

const FixedCommutationProgram &ProblemTemplate::program(Index delta_index) const {
    return programs_.at(static_cast<std::size_t>(delta_index));
}

ProblemTemplateBuilder &ProblemTemplateBuilder::label(std::string s) {
    tmpl_.label = std::move(s);
    return *this;
}

ProblemTemplateBuilder &ProblemTemplateBuilder::parameter_domain(PolytopeV d) {
    tmpl_.parameter_domain = std::move(d);
    return *this;
}

ProblemTemplateBuilder &ProblemTemplateBuilder::commutations(CommutationSpace cs) {
    tmpl_.commutations = std::move(cs);
    return *this;
}

ProblemTemplateBuilder &ProblemTemplateBuilder::output_indices(std::vector<Index> idx) {
    tmpl_.output_indices = std::move(idx);
    return *this;
}

ProblemTemplateBuilder &ProblemTemplateBuilder::instantiator(
    std::function<FixedCommutationProgram(const Delta &)> fn) {
    instantiator_ = std::move(fn);
    return *this;
}

ProblemTemplateBuilder &ProblemTemplateBuilder::plant(
    std::function<Vec(const Vec &, const Vec &)> fn) {
    tmpl_.plant = std::move(fn);
    return *this;
}

std::shared_ptr<const ProblemTemplate> ProblemTemplateBuilder::build() {
    if (!instantiator_) throw InvalidArgumentError("missing instantiator");
    tmpl_.parameter_domain.validate();
    tmpl_.p = tmpl_.parameter_domain.p;
    tmpl_.m = tmpl_.commutations.bit_length();
    if (tmpl_.commutations.size() == 0)
        throw InvalidArgumentError("missing commutation space");

    tmpl_.programs_.clear();
    for (Index i = 0; i < tmpl_.commutations.size(); ++i) {
        FixedCommutationProgram prog = instantiator_(tmpl_.commutations.at(i));
        prog.validate();
        if (prog.p != tmpl_.p)
            throw InvalidArgumentError(
                "instantiated program parameter dimension mismatch");
        if (i == 0)
            tmpl_.n = prog.n_bar;
        else if (prog.n_bar != tmpl_.n)
            throw InvalidArgumentError(
                "instantiated programs disagree on decision dimension");
        tmpl_.programs_.push_back(std::move(prog));
    }
    if (tmpl_.output_indices.empty()) {
        for (Index i = 0; i < tmpl_.n; ++i) tmpl_.output_indices.push_back(i);
    }
    for (Index i : tmpl_.output_indices)
        if (i < 0 || i >= tmpl_.n)
            throw InvalidArgumentError("output index out of range");
    return std::make_shared<ProblemTemplate>(std::move(tmpl_));
}

const FixedCommutationProgram &instantiate(const ProblemTemplate &tmpl,
                                           const Delta &delta) {
    auto idx = tmpl.commutations.index_of(delta);
    if (!idx)
        throw UnknownCommutationError("commutation " + delta_to_string(delta) +
                                      " is not admissible");
    return tmpl.program(*idx);
}

void throw_numerical(const char *what, const ConicProgram &prog) {
    throw NumericalError(std::string("solver stalled in ") + what,
                         prog.to_json());
}

namespace {

SolveResult run_solver(const ConicProgram &sp, double affine_offset,
                       const ToleranceConfig &cfg) {
    ConicSolver solver(cfg.solver_settings());
    SolverSolution sol = solver.solve(sp);
    SolveResult r;
    r.status = sol.status;
    if (sol.status == SolveStatus::Optimal) {
        r.value = sol.value + affine_offset;
        r.x = sol.x;
        r.residuals = sol.residuals;
    }
    return r;
}

} // namespace

SolveResult solve_conic(const FixedCommutationProgram &prog, const Vec &theta,
                        const ToleranceConfig &cfg) {
    ConicProgram sp = assemble_fixed_theta(prog, theta, false);
    SolveResult r = run_solver(sp, prog.c_theta.dot(theta) + prog.c0, cfg);
    if (r.status == SolveStatus::Optimal) {
        // x is the full variable vector here (no extras appended).
        r.x.conservativeResize(prog.n_bar);
    }
    return r;
}

SolveResult solve_feasibility(const FixedCommutationProgram &prog,
                              const Vec &theta, const ToleranceConfig &cfg) {
    ConicProgram sp = assemble_fixed_theta(prog, theta, true);
    return run_solver(sp, 0.0, cfg);
}

MinlpResult solve_minlp(const ProblemTemplate &tmpl, const Vec &theta,
                        const ToleranceConfig &cfg) {
    MinlpResult best;
    best.status = SolveStatus::Infeasible;
    for (Index i = 0; i < tmpl.num_admissible(); ++i) {
        const auto &prog = tmpl.program(i);
        SolveResult r = solve_conic(prog, theta, cfg);
        if (r.status == SolveStatus::Numerical)
            throw_numerical("solve_minlp enumeration",
                            assemble_fixed_theta(prog, theta, false));
        if (r.status == SolveStatus::Unbounded) {
            best.status = SolveStatus::Unbounded;
            best.delta_index = i;
            best.delta = tmpl.commutations.at(i);
            return best;
        }
        if (r.status != SolveStatus::Optimal) continue;
        const double tie = 10.0 * cfg.solver_tol * (1.0 + std::abs(r.value));
        if (best.status != SolveStatus::Optimal || r.value < best.value - tie) {
            best.status = SolveStatus::Optimal;
            best.value = r.value;
            best.delta_index = i;
            best.delta = tmpl.commutations.at(i);
            best.x = r.x;
        }
    }
    return best;
}

bool feasible_at(const ProblemTemplate &tmpl, Index delta_index,
                 const Vec &theta, const ToleranceConfig &cfg) {
    const auto &prog = tmpl.program(delta_index);
    SolveResult r = solve_feasibility(prog, theta, cfg);
    if (r.status == SolveStatus::Numerical)
        throw_numerical("feasible_at", assemble_fixed_theta(prog, theta, true));
    return r.status == SolveStatus::Optimal;
}

bool feasible_at(const ProblemTemplate &tmpl, const Delta &delta,
                 const Vec &theta, const ToleranceConfig &cfg) {
    auto idx = tmpl.commutations.index_of(delta);
    if (!idx)
        throw UnknownCommutationError("commutation " + delta_to_string(delta) +
                                      " is not admissible");
    return feasible_at(tmpl, *idx, theta, cfg);
}

} // namespace mpt
