#pragma once

#include <string>
#include <vector>

// Tiny static-SVG writers for the scatter and bar figures.

namespace mvae {

struct ScatterPoint {
    double x = 0.0, y = 0.0;
    int color_index = 0;   // e.g. modality
    std::string label;
};

void write_scatter_svg(const std::string& path, const std::vector<ScatterPoint>& points,
                       const std::string& title);

struct Bar {
    std::string name;
    double value = 0.0;
    double whisker = 0.0;  // +/- range drawn as a vertical line
};

void write_bar_svg(const std::string& path, const std::vector<Bar>& bars,
                   const std::string& title);

}  // namespace mvae
