#include "mvae/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mvae {

namespace {

const char* kPalette[] = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#ad494a",
    "#637939", "#8c6d31", "#843c39", "#7b4173",
};
constexpr int kPaletteSize = 16;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << std::fixed << v;
    return os.str();
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void write_scatter_svg(const std::string& path, const std::vector<ScatterPoint>& points,
                       const std::string& title) {
    if (points.empty()) throw std::invalid_argument("write_scatter_svg: no points");
    const double width = 640, height = 520, margin = 50;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& p : points) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    auto sx = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin); };
    auto sy = [&](double y) {
        return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
    };

    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write SVG: " + path);
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
       << "font-family=\"sans-serif\">" << escape_xml(title) << "</text>\n";
    for (const auto& p : points) {
        os << "<circle cx=\"" << fmt(sx(p.x)) << "\" cy=\"" << fmt(sy(p.y))
           << "\" r=\"2.5\" fill=\"" << kPalette[p.color_index % kPaletteSize]
           << "\" fill-opacity=\"0.75\"";
        if (!p.label.empty()) os << "><title>" << escape_xml(p.label) << "</title></circle>\n";
        else os << "/>\n";
    }
    os << "</svg>\n";
}

void write_bar_svg(const std::string& path, const std::vector<Bar>& bars,
                   const std::string& title) {
    if (bars.empty()) throw std::invalid_argument("write_bar_svg: no bars");
    const double width = 640, height = 420, margin = 60;
    double vmax = 0.0;
    for (const auto& b : bars) vmax = std::max(vmax, b.value + b.whisker);
    if (vmax <= 0.0) vmax = 1.0;
    const double plot_w = width - 2 * margin;
    const double plot_h = height - 2 * margin;
    const double slot = plot_w / static_cast<double>(bars.size());
    const double bar_w = slot * 0.7;

    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write SVG: " + path);
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
       << "font-family=\"sans-serif\">" << escape_xml(title) << "</text>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
       << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const auto& b = bars[i];
        double x0 = margin + slot * static_cast<double>(i) + (slot - bar_w) / 2.0;
        double h = b.value / vmax * plot_h;
        double y0 = height - margin - h;
        os << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\"" << fmt(bar_w)
           << "\" height=\"" << fmt(h) << "\" fill=\"#1f77b4\"/>\n";
        if (b.whisker > 0.0) {
            double cx = x0 + bar_w / 2.0;
            double wy0 = height - margin - std::min(plot_h, (b.value + b.whisker) / vmax * plot_h);
            double wy1 = height - margin - std::max(0.0, (b.value - b.whisker) / vmax * plot_h);
            os << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(wy0) << "\" x2=\"" << fmt(cx)
               << "\" y2=\"" << fmt(wy1) << "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
        }
        os << "<text x=\"" << fmt(x0 + bar_w / 2.0) << "\" y=\"" << height - margin + 16
           << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
           << escape_xml(b.name) << "</text>\n";
    }
    os << "</svg>\n";
}

}  // namespace mvae
