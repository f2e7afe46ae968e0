#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flatform/chart.hpp"
#include "flatform/config.hpp"
#include "flatform/forms.hpp"

namespace flatform {

// Invalid input; `where` locates the offending key (e.g. "form[1][0]").
class ProblemError : public std::runtime_error {
public:
    ProblemError(const std::string& where, const std::string& what)
        : std::runtime_error(where.empty() ? what : where + ": " + what), where_(where) {}
    const std::string& where() const { return where_; }

private:
    std::string where_;
};

struct Problem {
    Chart chart;
    std::vector<std::vector<std::string>> rows;  // entry strings as given
    ExprMatrix form;
    ExprMatrix g, w;
    int grid = 0;          // per axis; 0 = default for the dimension
    int certify_grid = 0;  // 0 = constructor default
    Tolerances tol;

    int dim() const { return chart.dim(); }
    int grid_per_axis() const { return grid > 0 ? grid : default_grid_per_axis(dim()); }
};

// YAML (or JSON) text; see README for the schema.
Problem parse_problem(const std::string& text);
Problem load_problem(const std::string& path);
std::string problem_to_yaml(const Problem& p);
Problem make_problem(Chart chart, const std::vector<std::vector<std::string>>& rows);

// A user-supplied or exported coordinate change.
//   kind: coordinates      map: y_i(x) over the problem's variables
//   kind: parametrization  variables/box/base of y, map: x_i(y)
//   kind: sampled          samples: [{y, x, dx_dy}] (as written by `construct`)
struct ChartFile {
    std::string kind;
    ChartMap map;                    // closed-form kinds
    struct Sample {
        Eigen::VectorXd y, x;
        Eigen::MatrixXd dx_dy;
    };
    std::vector<Sample> samples;     // sampled kind; samples[0] is the base
    std::vector<std::string> exprs;  // closed-form kinds
};

ChartFile parse_chart_file(const std::string& text, const Problem& problem);
ChartFile load_chart_file(const std::string& path, const Problem& problem);

std::string read_file(const std::string& path);

}  // namespace flatform
