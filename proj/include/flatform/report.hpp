#pragma once

#include <json.hpp>

#include "flatform/analyze.hpp"

namespace flatform {

using Json = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "flatform-report/1";
inline constexpr const char* kChartSchema = "flatform-chart/1";
inline constexpr const char* kVersion = "1.0.0";

Json matrix_json(const Eigen::MatrixXd& m);
Json vector_json(const Eigen::VectorXd& v);

// Skeleton shared by all commands: schema, tool version, command, config echo.
Json report_header(const std::string& command, const Problem& p, int threads);
Json analysis_json(const Analysis& a);
Json construction_json(const FlatChartResult& r);
// Sampled forward map on the certification grid of the chart's domain.
Json chart_export_json(const FlatChartResult& r, const Problem& p);
Json verify_json(const VerifyOutcome& v);

}  // namespace flatform
