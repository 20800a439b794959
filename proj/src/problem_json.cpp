#include "mpt/problem_json.hpp"

#include <json.hpp>

#include <fstream>

namespace mpt {

namespace {

using nlohmann::json;

Vec parse_vec(const json &j, Index expect = -1) {
    if (!j.is_array()) throw IoError("problem JSON: expected an array");
    Vec v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Index>(i)] = j[i].get<double>();
    if (expect >= 0 && v.size() != expect)
        throw IoError("problem JSON: vector length mismatch");
    return v;
}

Mat parse_mat(const json &j, Index rows, Index cols) {
    if (!j.is_array()) throw IoError("problem JSON: expected a matrix");
    if (static_cast<Index>(j.size()) != rows)
        throw IoError("problem JSON: matrix row count mismatch");
    Mat m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const auto &row = j[static_cast<std::size_t>(r)];
        if (static_cast<Index>(row.size()) != cols)
            throw IoError("problem JSON: matrix column count mismatch");
        for (Index c = 0; c < cols; ++c)
            m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

Delta parse_delta(const json &j, Index m) {
    Delta d;
    if (j.is_string()) {
        for (char ch : j.get<std::string>()) {
            if (ch != '0' && ch != '1')
                throw IoError("problem JSON: bad commutation bit string");
            d.push_back(ch == '1' ? 1 : 0);
        }
    } else if (j.is_array()) {
        for (const auto &b : j) d.push_back(b.get<int>() ? 1 : 0);
    } else {
        throw IoError("problem JSON: bad commutation entry");
    }
    if (static_cast<Index>(d.size()) != m)
        throw IoError("problem JSON: commutation bit-length mismatch");
    return d;
}

FixedCommutationProgram parse_program(const json &j, Index n, Index p) {
    FixedCommutationProgram prog;
    prog.n_bar = n;
    prog.p = p;
    prog.c_x = parse_vec(j.at("c_x"), n);
    prog.c_theta = j.contains("c_theta") ? parse_vec(j.at("c_theta"), p)
                                         : Vec(Vec::Zero(p));
    prog.c0 = j.value("c0", 0.0);

    const Index l = j.contains("b") ? static_cast<Index>(j.at("b").size()) : 0;
    prog.b = l > 0 ? parse_vec(j.at("b"), l) : Vec(Vec::Zero(0));
    prog.A_x = l > 0 ? parse_mat(j.at("A_x"), l, n) : Mat(Mat::Zero(0, n));
    prog.A_theta =
        l > 0 ? parse_mat(j.at("A_theta"), l, p) : Mat(Mat::Zero(0, p));

    const Index d = j.contains("h") ? static_cast<Index>(j.at("h").size()) : 0;
    prog.h = d > 0 ? parse_vec(j.at("h"), d) : Vec(Vec::Zero(0));
    prog.H_x = d > 0 ? parse_mat(j.at("H_x"), d, n) : Mat(Mat::Zero(0, n));
    prog.H_theta =
        d > 0 ? parse_mat(j.at("H_theta"), d, p) : Mat(Mat::Zero(0, p));
    if (j.contains("cones")) {
        for (const auto &cj : j.at("cones")) {
            const std::string type = cj.at("type").get<std::string>();
            const Index dim = cj.at("dim").get<Index>();
            ConeKind kind;
            if (type == "zero")
                kind = ConeKind::Zero;
            else if (type == "nonneg")
                kind = ConeKind::NonNeg;
            else if (type == "soc")
                kind = ConeKind::SecondOrder;
            else
                throw IoError("problem JSON: unknown cone type '" + type + "'");
            prog.cone.blocks.push_back({kind, dim});
        }
    }
    prog.validate();
    return prog;
}

} // namespace

ProblemPtr load_problem_json(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open problem file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception &e) {
        throw IoError(std::string("problem JSON parse error: ") + e.what());
    }

    const Index p = j.at("p").get<Index>();
    const Index n = j.at("n").get<Index>();
    const Index m = j.at("m").get<Index>();

    PolytopeV domain;
    domain.p = p;
    for (const auto &vj : j.at("domain_vertices"))
        domain.vertices.push_back(parse_vec(vj, p));

    std::vector<Delta> admissible;
    for (const auto &dj : j.at("admissible"))
        admissible.push_back(parse_delta(dj, m));

    const auto &programs = j.at("programs");
    if (programs.size() != admissible.size())
        throw IoError("problem JSON: programs/admissible size mismatch");
    std::vector<FixedCommutationProgram> parsed;
    for (const auto &pj : programs) parsed.push_back(parse_program(pj, n, p));

    std::vector<Index> out_idx;
    if (j.contains("output_indices"))
        for (const auto &oi : j.at("output_indices"))
            out_idx.push_back(oi.get<Index>());

    CommutationSpace cs(m, admissible);
    ProblemTemplateBuilder b;
    b.label(j.value("label", std::string("json_problem")))
        .parameter_domain(domain)
        .commutations(cs)
        .output_indices(out_idx)
        .instantiator([cs, parsed](const Delta &delta) {
            auto idx = cs.index_of(delta);
            if (!idx)
                throw UnknownCommutationError("commutation not in JSON problem");
            return parsed[static_cast<std::size_t>(*idx)];
        });
    return b.build();
}

} // namespace mpt
