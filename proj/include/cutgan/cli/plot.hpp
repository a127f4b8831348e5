#pragma once

#include <string>
#include <vector>

namespace cutgan {

// Renders one metric series against step numbers into a PNG line chart
// (axes, gridlines, numeric tick labels).
void render_line_chart(const std::vector<double>& steps, const std::vector<double>& values,
                       const std::string& out_path);

}  // namespace cutgan
