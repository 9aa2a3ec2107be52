#include "battcap/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "battcap/error.hpp"

namespace battcap {

std::string to_string(Strength s) {
    switch (s) {
        case Strength::low: return "low";
        case Strength::significant: return "significant";
        case Strength::high: return "high";
        case Strength::degenerate: return "degenerate";
    }
    return "degenerate";
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error("invariant", "pearson: series lengths differ");
    if (x.size() < 2) throw Error("invariant", "pearson: need at least 2 points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw Error("degenerate", "pearson: constant series has zero variance");
    return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

Strength classify_strength(double r) {
    const double a = std::abs(r);
    if (!(a <= 1.0)) throw Error("invariant", "correlation outside [-1, 1]");
    if (a < 0.4) return Strength::low;
    if (a < 0.7) return Strength::significant;
    return Strength::high;
}

namespace {

std::vector<double> mean_normalized(std::span<const double> s) {
    if (s.empty()) throw Error("invariant", "grey analysis: empty series");
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    if (mean == 0.0 || !std::isfinite(mean)) throw Error("degenerate", "grey analysis: zero-mean series");
    std::vector<double> out(s.size());
    std::transform(s.begin(), s.end(), out.begin(), [mean](double v) { return v / mean; });
    return out;
}

}  // namespace

std::vector<std::vector<double>> grey_coefficients(std::span<const double> reference,
                                                   std::span<const std::vector<double>> comparisons,
                                                   double rho) {
    if (!(rho > 0.0 && rho <= 1.0)) throw Error("invariant", "rho must lie in (0, 1]");
    const auto x0 = mean_normalized(reference);
    std::vector<std::vector<double>> deltas;
    double dmin = std::numeric_limits<double>::infinity();
    double dmax = 0.0;
    for (const auto& series : comparisons) {
        if (series.size() != reference.size()) throw Error("invariant", "grey analysis: series lengths differ");
        const auto xi = mean_normalized(series);
        std::vector<double> d(xi.size());
        for (std::size_t k = 0; k < xi.size(); ++k) {
            d[k] = std::abs(x0[k] - xi[k]);
            dmin = std::min(dmin, d[k]);
            dmax = std::max(dmax, d[k]);
        }
        deltas.push_back(std::move(d));
    }
    for (auto& d : deltas) {
        for (auto& v : d) v = dmax > 0.0 ? (dmin + rho * dmax) / (v + rho * dmax) : 1.0;
    }
    return deltas;
}

std::vector<double> grey_coefficients(std::span<const double> reference, std::span<const double> comparison,
                                      double rho) {
    const std::vector<std::vector<double>> batch{std::vector<double>(comparison.begin(), comparison.end())};
    return grey_coefficients(reference, batch, rho).front();
}

double grey_degree(std::span<const double> coefficients) {
    if (coefficients.empty()) throw Error("invariant", "grey degree of an empty series");
    return std::accumulate(coefficients.begin(), coefficients.end(), 0.0) / static_cast<double>(coefficients.size());
}

CorrelationReport correlation_report(const FeatureMatrix& m, double rho) {
    m.validate(3);
    CorrelationReport report;
    report.rho = rho;
    const std::vector<double> target(m.y.data(), m.y.data() + m.y.size());

    std::vector<std::vector<double>> columns(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) {
        const auto col = m.x.col(static_cast<Eigen::Index>(j));
        columns[j].assign(col.data(), col.data() + col.size());
    }

    std::vector<std::size_t> gra_members;
    std::vector<std::vector<double>> gra_batch;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        FeatureCorrelation fc;
        fc.name = m.feature_names[j];
        try {
            fc.pcc = pearson(columns[j], target);
            fc.tier = classify_strength(*fc.pcc);
        } catch (const Error& e) {
            if (e.code() != "degenerate") throw;
        }
        const double mean = std::accumulate(columns[j].begin(), columns[j].end(), 0.0);
        if (mean != 0.0) {
            gra_members.push_back(j);
            gra_batch.push_back(columns[j]);
        }
        report.features.push_back(std::move(fc));
    }
    if (!gra_batch.empty()) {
        const auto xi = grey_coefficients(target, gra_batch, rho);
        for (std::size_t k = 0; k < gra_members.size(); ++k) report.features[gra_members[k]].gra = grey_degree(xi[k]);
    }

    std::vector<std::size_t> order(m.cols());
    std::iota(order.begin(), order.end(), 0);
    auto rank_by = [&](auto key) {
        auto idx = order;
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
        std::vector<std::string> names;
        for (auto i : idx) names.push_back(report.features[i].name);
        return names;
    };
    report.ranking_pcc = rank_by([&](std::size_t j) { return report.features[j].pcc ? std::abs(*report.features[j].pcc) : -1.0; });
    report.ranking_gra = rank_by([&](std::size_t j) { return report.features[j].gra.value_or(-1.0); });
    return report;
}

}  // namespace battcap
