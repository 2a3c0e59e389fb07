#include "resonance/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "resonance/core.hpp"

namespace resonance {

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

void write_svg_plot(const PlotSpec& spec, const std::string& path) {
    const double W = 640, H = 480;
    const double ml = 70, mr = 20, mt = 40, mb = 55;  // margins
    const double pw = W - ml - mr, ph = H - mt - mb;

    auto tx = [&](double v, bool log_axis, double lo, double hi) {
        if (log_axis) {
            v = std::log10(v);
            lo = std::log10(lo);
            hi = std::log10(hi);
        }
        return (v - lo) / (hi - lo);
    };

    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const auto& s : spec.series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (spec.log_x && !(s.x[i] > 0.0)) continue;
            if (spec.log_y && !(s.y[i] > 0.0)) continue;
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            y_lo = std::min(y_lo, s.y[i]);
            y_hi = std::max(y_hi, s.y[i]);
        }
    }
    if (!(x_lo < x_hi)) x_hi = x_lo + 1.0;
    if (!(y_lo < y_hi)) y_hi = y_lo + 1.0;

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(W) + "\" height=\"" +
           fmt(H) + "\" viewBox=\"0 0 " + fmt(W) + " " + fmt(H) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + fmt(W / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
           spec.title + "</text>\n";
    out += "<rect x=\"" + fmt(ml) + "\" y=\"" + fmt(mt) + "\" width=\"" + fmt(pw) +
           "\" height=\"" + fmt(ph) + "\" fill=\"none\" stroke=\"#333\"/>\n";

    // axis ticks (4 intervals)
    for (int i = 0; i <= 4; ++i) {
        const double fx = i / 4.0;
        double vx = spec.log_x ? std::pow(10.0, std::log10(x_lo) +
                                                    fx * (std::log10(x_hi) - std::log10(x_lo)))
                               : x_lo + fx * (x_hi - x_lo);
        double vy = spec.log_y ? std::pow(10.0, std::log10(y_lo) +
                                                    fx * (std::log10(y_hi) - std::log10(y_lo)))
                               : y_lo + fx * (y_hi - y_lo);
        out += "<text x=\"" + fmt(ml + fx * pw) + "\" y=\"" + fmt(H - mb + 18) +
               "\" text-anchor=\"middle\" font-size=\"11\">" + fmt(vx) + "</text>\n";
        out += "<text x=\"" + fmt(ml - 8) + "\" y=\"" + fmt(H - mb - fx * ph + 4) +
               "\" text-anchor=\"end\" font-size=\"11\">" + fmt(vy) + "</text>\n";
    }
    out += "<text x=\"" + fmt(ml + pw / 2) + "\" y=\"" + fmt(H - 12) +
           "\" text-anchor=\"middle\" font-size=\"13\">" + spec.x_label + "</text>\n";
    out += "<text x=\"16\" y=\"" + fmt(mt + ph / 2) +
           "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " +
           fmt(mt + ph / 2) + ")\">" + spec.y_label + "</text>\n";

    int color = 0;
    double legend_y = mt + 16;
    for (const auto& s : spec.series) {
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (spec.log_x && !(s.x[i] > 0.0)) continue;
            if (spec.log_y && !(s.y[i] > 0.0)) continue;
            const double px = ml + tx(s.x[i], spec.log_x, x_lo, x_hi) * pw;
            const double py = H - mb - tx(s.y[i], spec.log_y, y_lo, y_hi) * ph;
            pts += fmt(px) + "," + fmt(py) + " ";
        }
        const char* c = kColors[color % 6];
        out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + c +
               "\" stroke-width=\"1.5\"/>\n";
        out += "<text x=\"" + fmt(ml + 10) + "\" y=\"" + fmt(legend_y) +
               "\" font-size=\"12\" fill=\"" + c + "\">" + s.label + "</text>\n";
        legend_y += 16;
        ++color;
    }
    out += "</svg>\n";

    std::ofstream f(path, std::ios::binary);
    if (!f) throw data_error("cannot open output file: " + path);
    f << out;
    if (!f) throw data_error("failed writing " + path);
}

}  // namespace resonance
