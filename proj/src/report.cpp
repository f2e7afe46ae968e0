#include "flatform/report.hpp"

#include <cmath>

namespace flatform {

namespace {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json tolerances_json(const Tolerances& t) {
    return Json{{"sigma_tol", t.sigma_tol},       {"tol_lin", t.tol_lin},
                {"tol_stat", t.tol_stat},         {"tol_closed", t.tol_closed},
                {"tol_flat", t.tol_flat},         {"tol_parallel", t.tol_parallel},
                {"tol_jacobi", t.tol_jacobi},     {"tol_construct", t.tol_construct},
                {"tol_loop", t.tol_loop},         {"tol_bracket_var", t.tol_bracket_var},
                {"tol_commute", t.tol_commute},   {"margin", t.margin},
                {"kernel_cond_max", t.kernel_cond_max}, {"omega_cond_max", t.omega_cond_max},
                {"jac_min", t.jac_min},           {"h_jac", t.h_jac},
                {"h_curv", t.h_curv},             {"richardson", t.richardson},
                {"ode_atol", t.ode_atol},         {"ode_rtol", t.ode_rtol},
                {"max_box_shrink", t.max_box_shrink}};
}

Json ranks_json(const std::vector<int>& r) {
    if (r.empty()) return nullptr;
    auto mm = std::minmax_element(r.begin(), r.end());
    return Json{{"min", *mm.first}, {"max", *mm.second}};
}

}  // namespace

Json matrix_json(const Eigen::MatrixXd& m) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
        out.push_back(std::move(row));
    }
    return out;
}

Json vector_json(const Eigen::VectorXd& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v[i]));
    return out;
}

Json report_header(const std::string& command, const Problem& p, int threads) {
    Json box = Json::array();
    for (const auto& iv : p.chart.box()) box.push_back(Json::array({iv.lo, iv.hi}));
    Json h;
    h["schema"] = kReportSchema;
    h["tool"] = Json{{"name", "flatform"}, {"version", kVersion}};
    h["command"] = command;
    h["config"] = Json{{"variables", p.chart.names()},
                       {"box", box},
                       {"base", vector_json(p.chart.base())},
                       {"grid_per_axis", p.grid_per_axis()},
                       {"certify_grid", p.certify_grid},
                       {"threads", threads},
                       {"tolerances", tolerances_json(p.tol)}};
    return h;
}

Json analysis_json(const Analysis& a) {
    const FlatnessReport& r = a.report;
    Json conds = Json::array();
    for (const auto& c : r.conditions)
        conds.push_back(Json{{"name", c.name},
                             {"value", number(c.value)},
                             {"tol", number(c.tol)},
                             {"outcome", to_string(c.outcome)},
                             {"decisive", c.decisive},
                             {"note", c.note}});
    return Json{{"verdict", to_string(r.verdict)},
                {"reason", to_string(r.reason)},
                {"case", to_string(a.which)},
                {"checks", r.checks},
                {"scale", r.scale},
                {"grid_per_axis", r.grid_per_axis},
                {"max_curvature", r.max_curvature},
                {"rank_profile", Json{{"g", ranks_json(r.ranks.rank_g)},
                                      {"w", ranks_json(r.ranks.rank_w)},
                                      {"intersection", ranks_json(r.ranks.rank_intersection)}}},
                {"conditions", conds}};
}

Json construction_json(const FlatChartResult& r) {
    Json diags = Json::array();
    for (const auto& d : r.diagnostics)
        diags.push_back(Json{{"name", d.name}, {"value", number(d.value)}, {"tol", number(d.tol)}, {"pass", d.pass}});
    Json out{{"status", "ok"},
             {"method", r.method},
             {"description", r.chart.description()},
             {"kind", r.chart.kind() == ChartMap::Kind::Coordinates ? "coordinates" : "parametrization"},
             {"C", matrix_json(r.C)},
             {"max_deviation", r.max_deviation},
             {"certify_grid", r.certify_grid},
             {"jacobian_min", r.chart.certificate()},
             {"box_shrinks", r.box_shrinks}};
    Json domain = Json::array();
    for (const auto& iv : r.chart.domain()) domain.push_back(Json::array({iv.lo, iv.hi}));
    out["domain"] = domain;
    if (r.m > 0) {
        out["m"] = r.m;
        out["c"] = matrix_json(r.c);
    }
    out["diagnostics"] = diags;
    out["notes"] = r.notes;
    return out;
}

Json chart_export_json(const FlatChartResult& r, const Problem& p) {
    Json samples = Json::array();
    auto add = [&](const Eigen::VectorXd& q) {
        ChartMap::Sample s = r.chart.sample(q);
        samples.push_back(Json{{"y", vector_json(s.y)}, {"x", vector_json(s.x)}, {"dx_dy", matrix_json(s.dx_dy)}});
    };
    add(r.chart.domain_base());
    Grid grid(r.chart.domain(), r.certify_grid > 0 ? r.certify_grid : p.grid_per_axis());
    for (const auto& q : grid.points()) add(q);
    return Json{{"schema", kChartSchema},
                {"kind", "sampled"},
                {"method", r.method},
                {"description", r.chart.description()},
                {"variables", p.chart.names()},
                {"C", matrix_json(r.C)},
                {"samples", samples}};
}

Json verify_json(const VerifyOutcome& v) {
    return Json{{"pass", v.pass},
                {"message", v.message},
                {"C", matrix_json(v.result.C)},
                {"max_deviation", v.result.max_deviation},
                {"tol", v.tol},
                {"invertible", v.invertible},
                {"jacobian_min", number(v.jacobian_min)},
                {"points", v.result.deviation.size()}};
}

}  // namespace flatform
