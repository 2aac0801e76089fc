#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace soma {
namespace svgplot {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

// Minimal line chart: axes, tick labels, legend, one polyline per series.
inline std::string render_line_chart(const std::string& title, const std::string& xlabel,
                                     const std::string& ylabel,
                                     const std::vector<Series>& series, int width = 640,
                                     int height = 420) {
    if (series.empty()) throw std::invalid_argument("svgplot: no series");
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size() || s.x.empty())
            throw std::invalid_argument("svgplot: malformed series " + s.name);
        for (double v : s.x) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
        for (double v : s.y) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
    }
    if (xmax == xmin) { xmax += 1.0; xmin -= 1.0; }
    if (ymax == ymin) { ymax += 1.0; ymin -= 1.0; }

    const double ml = 62, mr = 18, mt = 40, mb = 48;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };
    static const char* kColors[] = {"#1f6fb2", "#c23b22", "#2e8b57", "#8a2be2", "#b8860b"};

    std::ostringstream out;
    out.precision(6);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << title << "</text>\n"
        << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 10
        << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n"
        << "<text x=\"16\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " << mt + ph / 2
        << ")\">" << ylabel << "</text>\n"
        << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 4.0;
        const double fy = ymin + (ymax - ymin) * t / 4.0;
        out << "<line x1=\"" << px(fx) << "\" y1=\"" << mt + ph << "\" x2=\"" << px(fx)
            << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"#444\"/>\n"
            << "<text x=\"" << px(fx) << "\" y=\"" << mt + ph + 18
            << "\" text-anchor=\"middle\" font-size=\"10\">" << fx << "</text>\n"
            << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(fy) << "\" x2=\"" << ml << "\" y2=\""
            << py(fy) << "\" stroke=\"#444\"/>\n"
            << "<text x=\"" << ml - 8 << "\" y=\"" << py(fy) + 3
            << "\" text-anchor=\"end\" font-size=\"10\">" << fy << "</text>\n";
    }
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kColors[si % 5];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            out << px(s.x[i]) << "," << py(s.y[i]) << " ";
        out << "\"/>\n"
            << "<text x=\"" << ml + 8 << "\" y=\"" << mt + 16 + 14 * static_cast<double>(si)
            << "\" font-size=\"11\" fill=\"" << color << "\">" << s.name << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

inline void write_line_chart(const std::string& path, const std::string& title,
                             const std::string& xlabel, const std::string& ylabel,
                             const std::vector<Series>& series) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("svgplot: cannot open " + path);
    f << render_line_chart(title, xlabel, ylabel, series);
}

}  // namespace svgplot
}  // namespace soma
