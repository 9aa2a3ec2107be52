#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>

#include "battcap/correlation.hpp"
#include "battcap/error.hpp"
#include "battcap/pipeline.hpp"

namespace battcap {

namespace {

double mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

void check_pair(std::span<const double> pred, std::span<const double> actual) {
    if (pred.size() != actual.size()) throw Error("invariant", "prediction and target lengths differ");
    if (pred.empty()) throw Error("invariant", "no predictions");
}

}  // namespace

double standard_deviation(std::span<const double> v) {
    if (v.empty()) throw Error("invariant", "standard deviation of an empty series");
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

double rmse(std::span<const double> pred, std::span<const double> actual) {
    check_pair(pred, actual);
    double ss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - actual[i]) * (pred[i] - actual[i]);
    return std::sqrt(ss / static_cast<double>(pred.size()));
}

double r_squared(std::span<const double> pred, std::span<const double> actual) {
    check_pair(pred, actual);
    const double m = mean(actual);
    double res = 0.0, tot = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        res += (actual[i] - pred[i]) * (actual[i] - pred[i]);
        tot += (actual[i] - m) * (actual[i] - m);
    }
    if (!(tot > 0.0)) throw Error("degenerate", "R^2 undefined for a constant target");
    return 1.0 - res / tot;
}

Metrics compute_metrics(std::span<const double> pred, std::span<const double> actual) {
    Metrics m;
    m.rmse = rmse(pred, actual);
    m.r2 = r_squared(pred, actual);
    m.sd_pred = standard_deviation(pred);
    m.sd_actual = standard_deviation(actual);
    try {
        m.pearson_r = pearson(pred, actual);
    } catch (const Error& e) {
        if (e.code() != "degenerate") throw;
        m.pearson_r = 0.0;
    }
    return m;
}

TaylorData taylor_points(std::span<const NamedPredictions> models, std::span<const double> actual) {
    TaylorData out;
    out.sd_actual = standard_deviation(actual);
    const double ma = mean(actual);
    for (const auto& model : models) {
        check_pair(model.predictions, actual);
        TaylorPoint p;
        p.name = model.name;
        p.sd_pred = standard_deviation(model.predictions);
        try {
            p.pearson_r = pearson(model.predictions, actual);
        } catch (const Error& e) {
            if (e.code() != "degenerate") throw;
            p.pearson_r = 0.0;
            p.degenerate = true;
        }
        const double mp = mean(model.predictions);
        double ss = 0.0;
        for (std::size_t i = 0; i < actual.size(); ++i) {
            const double d = (model.predictions[i] - mp) - (actual[i] - ma);
            ss += d * d;
        }
        p.centered_rmse = std::sqrt(ss / static_cast<double>(actual.size()));
        out.points.push_back(std::move(p));
    }
    return out;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
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

// 1, 2 or 5 times a power of ten, giving roughly `target` steps up to `max`.
double nice_step(double max, int target) {
    const double raw = max / target;
    const double p = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0}) {
        if (m * p >= raw) return m * p;
    }
    return 10.0 * p;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::string render_taylor_svg(const TaylorData& data) {
    constexpr double kWidth = 600, kHeight = 560, kOx = 80, kOy = 480, kRadius = 400;
    double max_sd = data.sd_actual;
    for (const auto& p : data.points) max_sd = std::max(max_sd, p.sd_pred);
    if (!(max_sd > 0.0)) max_sd = 1.0;
    const double step = nice_step(max_sd * 1.15, 5);
    const double limit = std::ceil(max_sd * 1.15 / step) * step;
    const double scale = kRadius / limit;
    auto px = [&](double sd, double theta) { return kOx + sd * scale * std::cos(theta); };
    auto py = [&](double sd, double theta) { return kOy - sd * scale * std::sin(theta); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<defs><clipPath id=\"quadrant\"><path d=\"M" << fmt(kOx) << ',' << fmt(kOy) << " L" << fmt(kOx + kRadius)
      << ',' << fmt(kOy) << " A" << fmt(kRadius) << ',' << fmt(kRadius) << " 0 0 0 " << fmt(kOx) << ','
      << fmt(kOy - kRadius) << " Z\"/></clipPath></defs>\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // SD arcs and axis ticks.
    s << "<g class=\"sd-grid\" fill=\"none\" stroke=\"#bbbbbb\" stroke-dasharray=\"2,3\">\n";
    for (double r = step; r < limit + step / 2; r += step) {
        const double rp = r * scale;
        s << "<path d=\"M" << fmt(kOx + rp) << ',' << fmt(kOy) << " A" << fmt(rp) << ',' << fmt(rp) << " 0 0 0 "
          << fmt(kOx) << ',' << fmt(kOy - rp) << "\"/>\n";
    }
    s << "</g>\n<g class=\"sd-labels\" text-anchor=\"middle\">\n";
    for (double r = 0.0; r < limit + step / 2; r += step) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", r);
        s << "<text x=\"" << fmt(kOx + r * scale) << "\" y=\"" << fmt(kOy + 18) << "\">" << buf << "</text>\n";
    }
    s << "</g>\n";

    // Correlation rays.
    s << "<g class=\"corr-grid\" stroke=\"#dddddd\">\n";
    const double corr_ticks[] = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99};
    for (double c : corr_ticks) {
        const double th = std::acos(c);
        s << "<line x1=\"" << fmt(kOx) << "\" y1=\"" << fmt(kOy) << "\" x2=\"" << fmt(px(limit, th)) << "\" y2=\""
          << fmt(py(limit, th)) << "\"/>\n";
    }
    s << "</g>\n<g class=\"corr-labels\" font-size=\"10\">\n";
    for (double c : corr_ticks) {
        const double th = std::acos(c);
        char buf[16];
        std::snprintf(buf, sizeof buf, "%g", c);
        s << "<text x=\"" << fmt(px(limit * 1.03, th)) << "\" y=\"" << fmt(py(limit * 1.03, th)) << "\">" << buf
          << "</text>\n";
    }
    s << "</g>\n";
    s << "<text x=\"" << fmt(px(limit * 0.78, std::numbers::pi / 4) + 40) << "\" y=\""
      << fmt(py(limit * 0.78, std::numbers::pi / 4) - 40) << "\" transform=\"rotate(45 "
      << fmt(px(limit * 0.78, std::numbers::pi / 4) + 40) << ' ' << fmt(py(limit * 0.78, std::numbers::pi / 4) - 40)
      << ")\" text-anchor=\"middle\">Correlation</text>\n";

    // Centred RMSE arcs around REF.
    s << "<g class=\"crmse\" clip-path=\"url(#quadrant)\" fill=\"none\" stroke=\"#2ca02c\" stroke-opacity=\"0.6\" "
         "stroke-dasharray=\"6,4\">\n";
    const double rx = px(data.sd_actual, 0.0);
    for (double r = step; r < 2.0 * limit; r += step) {
        s << "<circle cx=\"" << fmt(rx) << "\" cy=\"" << fmt(kOy) << "\" r=\"" << fmt(r * scale) << "\"/>\n";
    }
    s << "</g>\n";

    // Frame.
    s << "<g fill=\"none\" stroke=\"black\">\n";
    s << "<line x1=\"" << fmt(kOx) << "\" y1=\"" << fmt(kOy) << "\" x2=\"" << fmt(kOx + kRadius) << "\" y2=\""
      << fmt(kOy) << "\"/>\n";
    s << "<line x1=\"" << fmt(kOx) << "\" y1=\"" << fmt(kOy) << "\" x2=\"" << fmt(kOx) << "\" y2=\""
      << fmt(kOy - kRadius) << "\"/>\n";
    s << "<path d=\"M" << fmt(kOx + kRadius) << ',' << fmt(kOy) << " A" << fmt(kRadius) << ',' << fmt(kRadius)
      << " 0 0 0 " << fmt(kOx) << ',' << fmt(kOy - kRadius) << "\"/>\n</g>\n";
    s << "<text x=\"" << fmt(kOx + kRadius / 2) << "\" y=\"" << fmt(kOy + 40)
      << "\" text-anchor=\"middle\">Standard deviation</text>\n";

    s << "<circle class=\"marker ref\" data-name=\"REF\" cx=\"" << fmt(rx) << "\" cy=\"" << fmt(kOy)
      << "\" r=\"6\" fill=\"black\"/>\n";
    s << "<text x=\"" << fmt(rx) << "\" y=\"" << fmt(kOy - 10) << "\" text-anchor=\"middle\">REF</text>\n";

    std::size_t k = 0;
    for (const auto& p : data.points) {
        // A degenerate point has zero spread, so it sits at the origin whatever its angle.
        const double th = p.degenerate ? std::numbers::pi / 2 : std::acos(std::clamp(p.pearson_r, -1.0, 1.0));
        const double x = px(p.sd_pred, std::min(th, std::numbers::pi / 2));
        const double y = py(p.sd_pred, std::min(th, std::numbers::pi / 2));
        const char* colour = kPalette[k++ % std::size(kPalette)];
        s << "<circle class=\"marker model\" data-name=\"" << escape_xml(p.name) << "\" cx=\"" << fmt(x)
          << "\" cy=\"" << fmt(y) << "\" r=\"5\" fill=\"" << colour << "\"/>\n";
        s << "<text x=\"" << fmt(x + 8) << "\" y=\"" << fmt(y - 6) << "\" fill=\"" << colour << "\">"
          << escape_xml(p.name) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace battcap
