#pragma once

#include <string>
#include <vector>

namespace resonance {

// Minimal static SVG line plots (diffable text output, no dependencies).
struct PlotSeries {
    std::string label;
    std::vector<double> x, y;
};

struct PlotSpec {
    std::string title;
    std::string x_label, y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<PlotSeries> series;
};

void write_svg_plot(const PlotSpec& spec, const std::string& path);

}  // namespace resonance
