#pragma once

#include <string>
#include <vector>

#include "flatform/chart.hpp"
#include "flatform/forms.hpp"
#include "flatform/problem.hpp"

namespace testing {

inline std::string data_path(const std::string& name) { return std::string(FLATFORM_TEST_DATA) + "/" + name; }

inline flatform::ExprMatrix parse_matrix(const std::vector<std::vector<std::string>>& rows,
                                         const std::vector<std::string>& names) {
    const int n = static_cast<int>(rows.size());
    flatform::ExprMatrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = flatform::parse(rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], names);
    return m;
}

inline flatform::Problem problem(const std::vector<std::string>& names, const flatform::Box& box,
                                 const std::vector<std::vector<std::string>>& rows) {
    return flatform::make_problem(flatform::Chart(names, box), rows);
}

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double d : v) x[i++] = d;
    return x;
}

}  // namespace testing
