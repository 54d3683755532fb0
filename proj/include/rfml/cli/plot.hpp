#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "rfml/common.hpp"

namespace rfml::cli {

// Hand-written static SVG figures. Layout constants are shared so the charts
// come out visually consistent without a plotting dependency.

namespace svgdetail {

inline constexpr double kWidth = 640, kHeight = 420;
inline constexpr double kLeft = 70, kRight = 20, kTop = 48, kBottom = 56;

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline void header(std::ostringstream& os, const std::string& title) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
       << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kWidth / 2 << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" "
          "text-anchor=\"middle\">"
       << title << "</text>\n";
}

inline void axes(std::ostringstream& os, const std::string& x_label, const std::string& y_label) {
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\""
       << kWidth - kRight << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
       << kHeight - kBottom << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 12
       << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">" << x_label
       << "</text>\n";
    os << "<text x=\"18\" y=\"" << (kTop + kHeight - kBottom) / 2
       << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
          "transform=\"rotate(-90 18 "
       << (kTop + kHeight - kBottom) / 2 << ")\">" << y_label << "</text>\n";
}

inline const char* series_color(std::size_t k) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};
    return palette[k % 5];
}

}  // namespace svgdetail

struct LineSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

inline std::string svg_line_chart(const std::string& title, const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<LineSeries>& series) {
    using namespace svgdetail;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmin > xmax) throw InvalidArgument("svg_line_chart: no points");
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto px = [&](double x) {
        return kLeft + (x - xmin) / (xmax - xmin) * (kWidth - kLeft - kRight);
    };
    auto py = [&](double y) {
        return kHeight - kBottom - (y - ymin) / (ymax - ymin) * (kHeight - kTop - kBottom);
    };

    std::ostringstream os;
    header(os, title);
    axes(os, x_label, y_label);
    for (int tick = 0; tick <= 4; ++tick) {
        const double ty = ymin + tick * (ymax - ymin) / 4;
        const double tx = xmin + tick * (xmax - xmin) / 4;
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(ty) + 4
           << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << num(ty)
           << "</text>\n";
        os << "<line x1=\"" << kLeft << "\" y1=\"" << py(ty) << "\" x2=\"" << kWidth - kRight
           << "\" y2=\"" << py(ty) << "\" stroke=\"#dddddd\"/>\n";
        os << "<text x=\"" << px(tx) << "\" y=\"" << kHeight - kBottom + 18
           << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << num(tx)
           << "</text>\n";
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        os << "<polyline fill=\"none\" stroke=\"" << series_color(k) << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : series[k].points) os << num(px(x)) << "," << num(py(y)) << " ";
        os << "\"/>\n";
        for (const auto& [x, y] : series[k].points)
            os << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"3\" fill=\""
               << series_color(k) << "\"/>\n";
        os << "<text x=\"" << kWidth - kRight - 8 << "\" y=\"" << kTop + 16 + 16 * static_cast<double>(k)
           << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\" fill=\""
           << series_color(k) << "\">" << series[k].name << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline std::string svg_heatmap(const std::string& title,
                               const std::vector<std::vector<std::int64_t>>& counts,
                               const std::vector<std::string>& labels) {
    using namespace svgdetail;
    const std::size_t k = counts.size();
    if (k == 0) throw InvalidArgument("svg_heatmap: empty matrix");
    std::ostringstream os;
    header(os, title);
    const double cell = std::min((kWidth - kLeft - kRight) / static_cast<double>(k),
                                 (kHeight - kTop - kBottom) / static_cast<double>(k));
    for (std::size_t i = 0; i < k; ++i) {
        std::int64_t row_max = 1;
        for (auto c : counts[i]) row_max = std::max(row_max, c);
        for (std::size_t j = 0; j < k; ++j) {
            const double frac = static_cast<double>(counts[i][j]) / static_cast<double>(row_max);
            const int shade = static_cast<int>(255 - 215 * frac);
            os << "<rect x=\"" << kLeft + cell * static_cast<double>(j) << "\" y=\""
               << kTop + cell * static_cast<double>(i) << "\" width=\"" << cell << "\" height=\""
               << cell << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"#888\"/>\n";
            os << "<text x=\"" << kLeft + cell * (static_cast<double>(j) + 0.5) << "\" y=\""
               << kTop + cell * (static_cast<double>(i) + 0.5) + 4
               << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
               << counts[i][j] << "</text>\n";
        }
    }
    for (std::size_t i = 0; i < k && i < labels.size(); ++i) {
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + cell * (static_cast<double>(i) + 0.5) + 4
           << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << labels[i]
           << "</text>\n";
        os << "<text x=\"" << kLeft + cell * (static_cast<double>(i) + 0.5) << "\" y=\""
           << kTop + cell * static_cast<double>(k) + 16
           << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << labels[i]
           << "</text>\n";
    }
    os << "<text x=\"" << kLeft - 40 << "\" y=\"" << kTop - 8
       << "\" font-family=\"sans-serif\" font-size=\"12\">true \\ predicted</text>\n";
    os << "</svg>\n";
    return os.str();
}

struct BarGroup {
    std::string label;                 // x-axis category (e.g. one SNR)
    std::vector<double> values;        // one per series
};

inline std::string svg_bar_chart(const std::string& title, const std::string& y_label,
                                 const std::vector<std::string>& series_names,
                                 const std::vector<BarGroup>& groups) {
    using namespace svgdetail;
    if (groups.empty()) throw InvalidArgument("svg_bar_chart: no groups");
    double ymax = 0;
    for (const auto& g : groups)
        for (double v : g.values) ymax = std::max(ymax, v);
    if (ymax <= 0) ymax = 1;
    ymax *= 1.1;

    std::ostringstream os;
    header(os, title);
    axes(os, "", y_label);
    const double span = kWidth - kLeft - kRight;
    const double group_w = span / static_cast<double>(groups.size());
    const double bar_w = group_w / (static_cast<double>(series_names.size()) + 1.0);
    auto py = [&](double v) { return kHeight - kBottom - v / ymax * (kHeight - kTop - kBottom); };
    for (int tick = 0; tick <= 4; ++tick) {
        const double ty = ymax * tick / 4;
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(ty) + 4
           << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << num(ty)
           << "</text>\n";
    }
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const double gx = kLeft + group_w * static_cast<double>(gi);
        for (std::size_t si = 0; si < groups[gi].values.size(); ++si) {
            const double v = groups[gi].values[si];
            os << "<rect x=\"" << gx + bar_w * (static_cast<double>(si) + 0.5) << "\" y=\"" << py(v)
               << "\" width=\"" << bar_w * 0.9 << "\" height=\"" << (kHeight - kBottom - py(v))
               << "\" fill=\"" << series_color(si) << "\"/>\n";
        }
        os << "<text x=\"" << gx + group_w / 2 << "\" y=\"" << kHeight - kBottom + 18
           << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
           << groups[gi].label << "</text>\n";
    }
    for (std::size_t si = 0; si < series_names.size(); ++si)
        os << "<text x=\"" << kWidth - kRight - 8 << "\" y=\"" << kTop + 16 + 16 * static_cast<double>(si)
           << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\" fill=\""
           << series_color(si) << "\">" << series_names[si] << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace rfml::cli
