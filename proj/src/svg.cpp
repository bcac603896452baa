#include "alloyfit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "alloyfit/dataset.hpp"
#include "alloyfit/error.hpp"

namespace alloyfit {

namespace {

constexpr double kSize = 480.0;
constexpr double kMargin = 64.0;
constexpr double kPlot = kSize - 2.0 * kMargin;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string escape(const std::string& s) {
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

double nice_step(double span, int target_ticks) {
    const double raw = span / target_ticks;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double f = raw / mag;
    const double nice = f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0;
    return nice * mag;
}

std::string tick_label(double v, double step) {
    char buf[32];
    const int decimals = step >= 1.0 ? 0 : static_cast<int>(std::ceil(-std::log10(step)));
    std::snprintf(buf, sizeof buf, "%.*f", decimals, std::abs(v) < step * 1e-9 ? 0.0 : v);
    return buf;
}

}  // namespace

ScatterDocument emit_scatter_svg(std::span<const std::pair<double, double>> pairs, const ScatterLabels& labels) {
    if (pairs.empty()) throw DataError("scatter plot needs at least one (target, prediction) pair");
    double lo = pairs.front().first, hi = lo;
    for (const auto& [t, p] : pairs) {
        if (!std::isfinite(t) || !std::isfinite(p)) throw DataError("scatter plot values must be finite");
        lo = std::min({lo, t, p});
        hi = std::max({hi, t, p});
    }
    if (hi - lo <= 0.0) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const double scale = kPlot / (hi - lo);
    auto px = [&](double v) { return kMargin + (v - lo) * scale; };
    auto py = [&](double v) { return kSize - kMargin - (v - lo) * scale; };

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kSize) + "\" height=\"" + num(kSize) +
           "\" viewBox=\"0 0 " + num(kSize) + " " + num(kSize) + "\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"" + num(kSize) + "\" height=\"" + num(kSize) +
           "\" style=\"fill:#ffffff;stroke:none\"/>\n";
    svg += "<text x=\"" + num(kSize / 2) + "\" y=\"28.000\" style=\"font-family:sans-serif;font-size:15px;text-anchor:middle\">" +
           escape(labels.title) + "</text>\n";

    // axes frame and ticks
    svg += "<g id=\"axes\" style=\"stroke:#333333;stroke-width:1;fill:none\">\n";
    svg += "<rect x=\"" + num(kMargin) + "\" y=\"" + num(kMargin) + "\" width=\"" + num(kPlot) + "\" height=\"" +
           num(kPlot) + "\"/>\n";
    svg += "</g>\n<g id=\"ticks\" style=\"font-family:sans-serif;font-size:11px;fill:#333333\">\n";
    const double step = nice_step(hi - lo, 5);
    for (double v = std::ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
        const auto label = escape(tick_label(v, step));
        svg += "<line x1=\"" + num(px(v)) + "\" y1=\"" + num(kSize - kMargin) + "\" x2=\"" + num(px(v)) + "\" y2=\"" +
               num(kSize - kMargin + 5) + "\" style=\"stroke:#333333\"/>\n";
        svg += "<text x=\"" + num(px(v)) + "\" y=\"" + num(kSize - kMargin + 18) +
               "\" style=\"text-anchor:middle\">" + label + "</text>\n";
        svg += "<line x1=\"" + num(kMargin - 5) + "\" y1=\"" + num(py(v)) + "\" x2=\"" + num(kMargin) + "\" y2=\"" +
               num(py(v)) + "\" style=\"stroke:#333333\"/>\n";
        svg += "<text x=\"" + num(kMargin - 8) + "\" y=\"" + num(py(v) + 4) + "\" style=\"text-anchor:end\">" + label +
               "</text>\n";
    }
    svg += "</g>\n";
    svg += "<text x=\"" + num(kSize / 2) + "\" y=\"" + num(kSize - 18) +
           "\" style=\"font-family:sans-serif;font-size:13px;text-anchor:middle\">" + escape(labels.x_label) + "</text>\n";
    svg += "<text x=\"18.000\" y=\"" + num(kSize / 2) + "\" transform=\"rotate(-90 18.000 " + num(kSize / 2) +
           ")\" style=\"font-family:sans-serif;font-size:13px;text-anchor:middle\">" + escape(labels.y_label) +
           "</text>\n";

    svg += "<line id=\"diagonal\" x1=\"" + num(px(lo)) + "\" y1=\"" + num(py(lo)) + "\" x2=\"" + num(px(hi)) +
           "\" y2=\"" + num(py(hi)) + "\" style=\"stroke:#cc3333;stroke-width:1;stroke-dasharray:4 3\"/>\n";

    svg += "<g id=\"points\" style=\"fill:#1f5fa8;fill-opacity:0.6;stroke:none\">\n";
    std::string csv = "target,prediction\n";
    for (const auto& [t, p] : pairs) {
        svg += "<circle cx=\"" + num(px(t)) + "\" cy=\"" + num(py(p)) + "\" r=\"3\"/>\n";
        csv += format_double(t) + ',' + format_double(p) + '\n';
    }
    svg += "</g>\n</svg>\n";
    return {std::move(svg), std::move(csv)};
}

}  // namespace alloyfit
