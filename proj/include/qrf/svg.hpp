#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace qrf {

/// Minimal self-contained SVG line-plot writer. Curves share one axis box;
/// output is deterministic text with no external assets.
class SvgPlot {
public:
    SvgPlot(std::string title, std::string x_label, std::string y_label)
        : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

    void add_curve(const std::vector<double>& x, const std::vector<double>& y,
                   const std::string& color, double width = 1.5) {
        if (x.size() != y.size()) throw std::invalid_argument("SvgPlot: curve size mismatch");
        curves_.push_back({x, y, color, width});
    }

    void add_vline(double x, const std::string& color) { vlines_.push_back({x, color}); }

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("SvgPlot: cannot open " + path);

        double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
        double ymin = xmin, ymax = -xmin;
        for (const auto& c : curves_)
            for (std::size_t k = 0; k < c.x.size(); ++k) {
                xmin = std::min(xmin, c.x[k]);
                xmax = std::max(xmax, c.x[k]);
                ymin = std::min(ymin, c.y[k]);
                ymax = std::max(ymax, c.y[k]);
            }
        for (const auto& v : vlines_) {
            xmin = std::min(xmin, v.x);
            xmax = std::max(xmax, v.x);
        }
        const bool empty = !(xmin <= xmax) || !(ymin <= ymax);
        if (empty) {
            xmin = 0.0;
            xmax = 1.0;
            ymin = 0.0;
            ymax = 1.0;
        }
        if (xmax == xmin) {
            xmin -= 0.5;
            xmax += 0.5;
        }
        if (ymax == ymin) {
            ymin -= 0.5;
            ymax += 0.5;
        }
        double ypad = 0.05 * (ymax - ymin);
        ymin -= ypad;
        ymax += ypad;

        const double W = 860, H = 540, L = 80, R = 20, T = 40, B = 50;
        auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
        auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
            << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
        out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
               "font-family=\"sans-serif\">"
            << title_ << "</text>\n";
        // axis box and tick labels
        out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
            << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";
        char buf[64];
        for (int k = 0; k <= 4; ++k) {
            double xv = xmin + (xmax - xmin) * k / 4.0;
            double yv = ymin + (ymax - ymin) * k / 4.0;
            std::snprintf(buf, sizeof(buf), "%.4g", xv);
            out << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18
                << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << buf
                << "</text>\n";
            std::snprintf(buf, sizeof(buf), "%.4g", yv);
            out << "<text x=\"" << L - 8 << "\" y=\"" << py(yv) + 4
                << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\">" << buf
                << "</text>\n";
        }
        out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
            << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << x_label_
            << "</text>\n";
        out << "<text x=\"18\" y=\"" << H / 2
            << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
               "transform=\"rotate(-90 18 "
            << H / 2 << ")\">" << y_label_ << "</text>\n";

        for (const auto& v : vlines_)
            out << "<line x1=\"" << px(v.x) << "\" y1=\"" << T << "\" x2=\"" << px(v.x) << "\" y2=\""
                << H - B << "\" stroke=\"" << v.color << "\" stroke-dasharray=\"4 3\"/>\n";

        for (const auto& c : curves_) {
            if (c.x.empty()) continue;
            out << "<polyline fill=\"none\" stroke=\"" << c.color << "\" stroke-width=\"" << c.width
                << "\" points=\"";
            for (std::size_t k = 0; k < c.x.size(); ++k) {
                std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(c.x[k]), py(c.y[k]));
                out << buf;
            }
            out << "\"/>\n";
        }
        out << "</svg>\n";
        if (!out) throw std::runtime_error("SvgPlot: write failed for " + path);
    }

private:
    struct Curve {
        std::vector<double> x, y;
        std::string color;
        double width;
    };
    struct VLine {
        double x;
        std::string color;
    };
    std::string title_, x_label_, y_label_;
    std::vector<Curve> curves_;
    std::vector<VLine> vlines_;
};

}  // namespace qrf
