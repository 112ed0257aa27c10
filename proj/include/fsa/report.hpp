#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fsa/common.hpp"
#include "fsa/reference.hpp"

namespace fsa {

/// Minimal single-series SVG line chart (accuracy-by-year, cumulative
/// log-return plots).
std::string svg_line_chart(const std::vector<std::pair<double, double>>& points,
                           const std::string& title, const std::string& x_label,
                           const std::string& y_label);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace fsa
