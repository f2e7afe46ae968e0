#include "flatform/problem.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace flatform {

namespace {

const std::map<std::string, double Tolerances::*>& real_keys() {
    static const std::map<std::string, double Tolerances::*> k{
        {"sigma_tol", &Tolerances::sigma_tol},       {"tol_lin", &Tolerances::tol_lin},
        {"tol_stat", &Tolerances::tol_stat},         {"tol_closed", &Tolerances::tol_closed},
        {"tol_flat", &Tolerances::tol_flat},         {"tol_parallel", &Tolerances::tol_parallel},
        {"tol_jacobi", &Tolerances::tol_jacobi},     {"tol_construct", &Tolerances::tol_construct},
        {"tol_loop", &Tolerances::tol_loop},         {"tol_bracket_var", &Tolerances::tol_bracket_var},
        {"tol_commute", &Tolerances::tol_commute},   {"margin", &Tolerances::margin},
        {"kernel_cond_max", &Tolerances::kernel_cond_max}, {"omega_cond_max", &Tolerances::omega_cond_max},
        {"jac_min", &Tolerances::jac_min},           {"h_jac", &Tolerances::h_jac},
        {"h_curv", &Tolerances::h_curv},             {"ode_atol", &Tolerances::ode_atol},
        {"ode_rtol", &Tolerances::ode_rtol}};
    return k;
}

const std::map<std::string, int Tolerances::*>& int_keys() {
    static const std::map<std::string, int Tolerances::*> k{{"richardson", &Tolerances::richardson},
                                                            {"max_box_shrink", &Tolerances::max_box_shrink}};
    return k;
}

// Numbers, or constant expressions such as "pi/4" or "-1/2".
double scalar(const YAML::Node& node, const std::string& where) {
    if (!node || !node.IsScalar()) throw ProblemError(where, "expected a number");
    const std::string s = node.as<std::string>();
    // plain literals as doubles: exported samples carry 17 significant digits
    double lit = 0;
    const char* end = s.data() + s.size();
    if (auto [p, ec] = std::from_chars(s.data(), end, lit); ec == std::errc() && p == end) {
        if (!std::isfinite(lit)) throw ProblemError(where, "not a finite number");
        return lit;
    }
    try {
        Expr e = parse(s, std::vector<std::string>{"pi"});
        const double pi = M_PI;
        double v = evaluate(e, std::span<const double>(&pi, 1));
        if (!std::isfinite(v)) throw ProblemError(where, "not a finite number");
        return v;
    } catch (const ProblemError&) {
        throw;
    } catch (const std::exception& e) {
        throw ProblemError(where, std::string("bad number '") + s + "': " + e.what());
    }
}

int integer(const YAML::Node& node, const std::string& where) {
    const double v = scalar(node, where);
    if (v != std::floor(v) || std::abs(v) > 1e6) throw ProblemError(where, "expected an integer");
    return static_cast<int>(v);
}

std::vector<std::string> names_of(const YAML::Node& node, const std::string& where) {
    if (!node || !node.IsSequence() || node.size() == 0) throw ProblemError(where, "expected a non-empty list of names");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < node.size(); ++i) out.push_back(node[i].as<std::string>());
    return out;
}

Box box_of(const YAML::Node& node, std::size_t n, const std::string& where) {
    if (!node || !node.IsSequence() || node.size() != n) throw ProblemError(where, "expected " + std::to_string(n) + " intervals");
    Box box;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string w = where + "[" + std::to_string(i) + "]";
        if (!node[i].IsSequence() || node[i].size() != 2) throw ProblemError(w, "expected [lo, hi]");
        Interval iv{scalar(node[i][0], w + "[0]"), scalar(node[i][1], w + "[1]")};
        if (!(iv.hi > iv.lo)) throw ProblemError(w, "degenerate interval");
        box.push_back(iv);
    }
    return box;
}

Eigen::VectorXd vec_of(const YAML::Node& node, const std::string& where) {
    if (!node || !node.IsSequence()) throw ProblemError(where, "expected a list of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(node.size()));
    for (std::size_t i = 0; i < node.size(); ++i) v[static_cast<Eigen::Index>(i)] = scalar(node[i], where + "[" + std::to_string(i) + "]");
    return v;
}

Eigen::MatrixXd mat_of(const YAML::Node& node, const std::string& where) {
    if (!node || !node.IsSequence() || node.size() == 0) throw ProblemError(where, "expected a matrix");
    const std::size_t r = node.size(), c = node[0].size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < r; ++i) {
        if (node[i].size() != c) throw ProblemError(where, "ragged matrix");
        for (std::size_t j = 0; j < c; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                scalar(node[i][j], where + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
    }
    return m;
}

Chart chart_of(const YAML::Node& node, const std::string& where) {
    if (!node || !node.IsMap()) throw ProblemError(where, "missing chart section");
    auto names = names_of(node["variables"], where + ".variables");
    Box box = box_of(node["box"], names.size(), where + ".box");
    const std::string at = node["base"] ? where + ".base" : where;
    try {
        if (node["base"]) {
            Eigen::VectorXd base = vec_of(node["base"], where + ".base");
            return Chart(names, box, base);
        }
        return Chart(names, box);
    } catch (const std::invalid_argument& e) {
        throw ProblemError(at, e.what());
    }
}

YAML::Node load_yaml(const std::string& text) {
    try {
        return YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ProblemError("line " + std::to_string(e.mark.line + 1), e.msg);
    }
}

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ProblemError(path, "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Problem make_problem(Chart chart, const std::vector<std::vector<std::string>>& rows) {
    const int n = chart.dim();
    if (static_cast<int>(rows.size()) != n) throw ProblemError("form", "expected " + std::to_string(n) + " rows");
    Problem p;
    p.rows = rows;
    p.form = ExprMatrix(n, n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != n)
            throw ProblemError("form[" + std::to_string(i) + "]", "expected " + std::to_string(n) + " entries");
        for (int j = 0; j < n; ++j) {
            const std::string where = "form[" + std::to_string(i) + "][" + std::to_string(j) + "]";
            try {
                p.form(i, j) = parse(rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], chart.names());
            } catch (const std::exception& e) {
                throw ProblemError(where, e.what());
            }
        }
    }
    std::tie(p.g, p.w) = split(p.form);
    p.chart = std::move(chart);
    return p;
}

Problem parse_problem(const std::string& text) {
    YAML::Node root = load_yaml(text);
    if (!root.IsMap()) throw ProblemError("", "problem file must be a mapping");
    if (root["schema"] && root["schema"].as<std::string>().rfind("flatform-problem/", 0) != 0)
        throw ProblemError("schema", "unsupported schema '" + root["schema"].as<std::string>() + "'");
    Chart chart = chart_of(root["chart"], "chart");
    const YAML::Node form = root["form"];
    if (!form || !form.IsSequence()) throw ProblemError("form", "expected a list of rows");
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < form.size(); ++i) {
        if (!form[i].IsSequence()) throw ProblemError("form[" + std::to_string(i) + "]", "expected a list of entries");
        std::vector<std::string> r;
        for (std::size_t j = 0; j < form[i].size(); ++j) r.push_back(form[i][j].as<std::string>());
        rows.push_back(std::move(r));
    }
    Problem p = make_problem(std::move(chart), rows);
    if (root["grid"]) {
        p.grid = integer(root["grid"], "grid");
        if (p.grid < 2) throw ProblemError("grid", "need at least 2 nodes per axis");
    }
    if (root["certify_grid"]) {
        p.certify_grid = integer(root["certify_grid"], "certify_grid");
        if (p.certify_grid < 2) throw ProblemError("certify_grid", "need at least 2 nodes per axis");
    }
    if (const YAML::Node t = root["tolerances"]) {
        if (!t.IsMap()) throw ProblemError("tolerances", "expected a mapping");
        for (const auto& kv : t) {
            const std::string key = kv.first.as<std::string>();
            const std::string where = "tolerances." + key;
            if (auto it = real_keys().find(key); it != real_keys().end()) {
                const double v = scalar(kv.second, where);
                if (!(v > 0)) throw ProblemError(where, "must be positive");
                p.tol.*(it->second) = v;
            } else if (auto jt = int_keys().find(key); jt != int_keys().end()) {
                const int v = integer(kv.second, where);
                if (v < 0) throw ProblemError(where, "must be non-negative");
                p.tol.*(jt->second) = v;
            } else {
                throw ProblemError(where, "unknown tolerance");
            }
        }
    }
    return p;
}

Problem load_problem(const std::string& path) { return parse_problem(read_file(path)); }

std::string problem_to_yaml(const Problem& p) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
    out << YAML::Key << "schema" << YAML::Value << "flatform-problem/1";
    out << YAML::Key << "chart" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "variables" << YAML::Value << YAML::Flow << p.chart.names();
    out << YAML::Key << "box" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto& iv : p.chart.box()) out << YAML::Flow << std::vector<double>{iv.lo, iv.hi};
    out << YAML::EndSeq;
    std::vector<double> base(p.chart.base().data(), p.chart.base().data() + p.chart.base().size());
    out << YAML::Key << "base" << YAML::Value << YAML::Flow << base;
    out << YAML::EndMap;
    out << YAML::Key << "form" << YAML::Value << YAML::BeginSeq;
    for (const auto& r : p.rows) out << YAML::Flow << r;
    out << YAML::EndSeq;
    if (p.grid > 0) out << YAML::Key << "grid" << YAML::Value << p.grid;
    if (p.certify_grid > 0) out << YAML::Key << "certify_grid" << YAML::Value << p.certify_grid;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

ChartFile parse_chart_file(const std::string& text, const Problem& problem) {
    YAML::Node root = load_yaml(text);
    if (!root.IsMap()) throw ProblemError("", "chart file must be a mapping");
    ChartFile cf;
    cf.kind = root["kind"] ? root["kind"].as<std::string>() : std::string("coordinates");
    const int n = problem.dim();
    if (cf.kind == "sampled") {
        const YAML::Node s = root["samples"];
        if (!s || !s.IsSequence() || s.size() == 0) throw ProblemError("samples", "expected a non-empty list");
        for (std::size_t i = 0; i < s.size(); ++i) {
            const std::string w = "samples[" + std::to_string(i) + "]";
            ChartFile::Sample smp{vec_of(s[i]["y"], w + ".y"), vec_of(s[i]["x"], w + ".x"), mat_of(s[i]["dx_dy"], w + ".dx_dy")};
            if (smp.x.size() != n || smp.dx_dy.rows() != n || smp.dx_dy.cols() != n)
                throw ProblemError(w, "dimension mismatch");
            cf.samples.push_back(std::move(smp));
        }
        return cf;
    }
    const YAML::Node m = root["map"];
    if (!m || !m.IsSequence() || static_cast<int>(m.size()) != n)
        throw ProblemError("map", "expected " + std::to_string(n) + " expressions");
    for (std::size_t i = 0; i < m.size(); ++i) cf.exprs.push_back(m[i].as<std::string>());
    auto exprs_over = [&](const std::vector<std::string>& names) {
        std::vector<Expr> out;
        for (std::size_t i = 0; i < cf.exprs.size(); ++i) {
            try {
                out.push_back(parse(cf.exprs[i], names));
            } catch (const std::exception& e) {
                throw ProblemError("map[" + std::to_string(i) + "]", e.what());
            }
        }
        return out;
    };
    if (cf.kind == "coordinates") {
        cf.map = ChartMap::coordinates(problem.chart, exprs_over(problem.chart.names()), "user coordinates");
    } else if (cf.kind == "parametrization") {
        Chart pc = chart_of(root, "chart file");
        if (pc.dim() != n) throw ProblemError("variables", "parameter count must equal the dimension");
        cf.map = ChartMap::parametrization(pc, exprs_over(pc.names()), "user parametrization");
    } else {
        throw ProblemError("kind", "expected coordinates, parametrization or sampled");
    }
    return cf;
}

ChartFile load_chart_file(const std::string& path, const Problem& problem) {
    return parse_chart_file(read_file(path), problem);
}

}  // namespace flatform
