#include "idc/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace idc::svg {

namespace {

constexpr double kMargin = 40.0;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string header(double w, double h, const std::string& title) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
                    "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(w / 2) + "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
         title + "</text>\n";
    s += "<rect x=\"" + num(kMargin) + "\" y=\"" + num(kMargin) + "\" width=\"" + num(w - 2 * kMargin) +
         "\" height=\"" + num(h - 2 * kMargin) + "\" fill=\"none\" stroke=\"#444\"/>\n";
    return s;
}

struct Frame {
    double x0, x1, y0, y1, w, h;
    double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * (w - 2 * kMargin); }
    double py(double y) const { return h - kMargin - (y - y0) / (y1 - y0) * (h - 2 * kMargin); }
};

std::string axis_labels(const Frame& f) {
    auto label = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4g", v);
        return std::string(buf);
    };
    std::string s;
    const std::string style = "font-family=\"sans-serif\" font-size=\"10\"";
    s += "<text x=\"" + num(kMargin) + "\" y=\"" + num(f.h - kMargin + 14) + "\" " + style + ">" + label(f.x0) + "</text>\n";
    s += "<text x=\"" + num(f.w - kMargin) + "\" y=\"" + num(f.h - kMargin + 14) + "\" text-anchor=\"end\" " + style + ">" +
         label(f.x1) + "</text>\n";
    s += "<text x=\"" + num(kMargin - 4) + "\" y=\"" + num(f.h - kMargin) + "\" text-anchor=\"end\" " + style + ">" +
         label(f.y0) + "</text>\n";
    s += "<text x=\"" + num(kMargin - 4) + "\" y=\"" + num(kMargin + 8) + "\" text-anchor=\"end\" " + style + ">" +
         label(f.y1) + "</text>\n";
    return s;
}

}  // namespace

std::string line_plot(const std::string& title, const std::vector<Series>& series, double width, double height) {
    const double inf = std::numeric_limits<double>::infinity();
    Frame f{inf, -inf, inf, -inf, width, height};
    for (const auto& s : series) {
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            f.x0 = std::min(f.x0, s.x[k]);
            f.x1 = std::max(f.x1, s.x[k]);
            f.y0 = std::min(f.y0, s.y[k]);
            f.y1 = std::max(f.y1, s.y[k]);
        }
    }
    if (!(f.x1 > f.x0)) { f.x0 -= 0.5; f.x1 += 0.5; }
    if (!(f.y1 > f.y0)) { f.y0 -= 0.5; f.y1 += 0.5; }
    std::string out = header(width, height, title) + axis_labels(f);
    for (const auto& s : series) {
        // Thin out long traces to at most ~4000 vertices.
        const std::size_t stride = std::max<std::size_t>(1, s.x.size() / 4000);
        out += "<polyline fill=\"none\" stroke=\"" + s.colour + "\" stroke-width=\"1\" points=\"";
        for (std::size_t k = 0; k < s.x.size(); k += stride) {
            if (s.step && k > 0) out += num(f.px(s.x[k])) + "," + num(f.py(s.y[k - stride])) + " ";
            out += num(f.px(s.x[k])) + "," + num(f.py(s.y[k])) + " ";
        }
        out += "\"/>\n";
    }
    out += "</svg>\n";
    return out;
}

std::string bar_plot(const std::string& title, const diagnostics::Histogram& h, double width, double height) {
    Frame f{h.edges.front(), h.edges.back(), 0.0, 1.0, width, height};
    for (double c : h.counts) f.y1 = std::max(f.y1, c);
    if (!(f.x1 > f.x0)) { f.x0 -= 0.5; f.x1 += 0.5; }
    std::string out = header(width, height, title) + axis_labels(f);
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        const double x = f.px(h.edges[b]);
        const double w = std::max(f.px(h.edges[b + 1]) - x, 0.5);
        const double y = f.py(h.counts[b]);
        out += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" +
               num(f.py(0.0) - y) + "\" fill=\"#7f7fbf\" stroke=\"#333\" stroke-width=\"0.5\"/>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace idc::svg
