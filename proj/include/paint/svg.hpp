#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace paint {

struct ChartSeries {
    std::string name;
    std::vector<double> x, y;
};

/// Render series as an SVG line chart with axes, ticks and a legend.
/// log_y plots log10 of positive y values.
void write_line_chart(const std::filesystem::path& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<ChartSeries>& series, bool log_y = false);

}  // namespace paint
