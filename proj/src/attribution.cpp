#include "battcap/attribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "battcap/error.hpp"

namespace battcap {

namespace {

double binomial(std::size_t n, std::size_t k) {
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(c);
}

std::vector<std::string> default_names(std::vector<std::string> names, std::size_t m) {
    if (names.empty()) {
        for (std::size_t i = 1; i <= m; ++i) names.push_back("F" + std::to_string(i));
    }
    if (names.size() != m) throw Error("invariant", "feature name count differs from feature count");
    return names;
}

// Shapley values from a full table of coalition values.
std::vector<double> phi_from_values(const std::vector<double>& v, std::size_t m) {
    // |S|!(M-|S|-1)!/M! = 1 / (M * C(M-1, |S|))
    std::vector<double> weight(m);
    for (std::size_t s = 0; s < m; ++s) weight[s] = 1.0 / (static_cast<double>(m) * binomial(m - 1, s));
    std::vector<double> phi(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t bit = std::size_t{1} << j;
        double acc = 0.0;
        for (std::size_t mask = 0; mask < v.size(); ++mask) {
            if (mask & bit) continue;
            acc += weight[static_cast<std::size_t>(std::popcount(mask))] * (v[mask | bit] - v[mask]);
        }
        phi[j] = acc;
    }
    return phi;
}

}  // namespace

std::vector<double> coalition_values(const Predictor& p, std::span<const double> x,
                                     std::span<const double> background) {
    const std::size_t m = x.size();
    if (background.size() != m) throw Error("invariant", "background length differs from instance length");
    if (m > kMaxShapleyFeatures) {
        throw Error("too_many_features", std::to_string(m) + " features exceed the exact-Shapley limit of " +
                                             std::to_string(kMaxShapleyFeatures) + "; use fused features");
    }
    const std::size_t count = std::size_t{1} << m;
    std::vector<double> v(count);
    std::vector<double> z(m);
    for (std::size_t mask = 0; mask < count; ++mask) {
        for (std::size_t j = 0; j < m; ++j) z[j] = (mask >> j) & 1U ? x[j] : background[j];
        v[mask] = p(z);
        if (!std::isfinite(v[mask])) throw Error("non_finite", "predictor returned a non-finite value");
    }
    return v;
}

AttributionReport shapley_exact(const Predictor& p, std::span<const double> x, std::span<const double> background,
                                std::vector<std::string> feature_names) {
    const std::size_t m = x.size();
    const auto v = coalition_values(p, x, background);
    AttributionReport r;
    r.feature_names = default_names(std::move(feature_names), m);
    r.base_value = v.front();
    r.prediction = v.back();
    r.phi = phi_from_values(v, m);
    return r;
}

InteractionMatrix interaction_matrix(const Predictor& p, std::span<const double> x,
                                     std::span<const double> background, std::vector<std::string> feature_names) {
    const std::size_t m = x.size();
    if (m > kMaxInteractionFeatures) {
        throw Error("too_many_features", std::to_string(m) + " features exceed the interaction limit of " +
                                             std::to_string(kMaxInteractionFeatures));
    }
    InteractionMatrix out;
    out.feature_names = default_names(std::move(feature_names), m);
    out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    if (m == 0) return out;
    const auto v = coalition_values(p, x, background);
    const auto phi = phi_from_values(v, m);

    // |S|!(M-|S|-2)! / (2 (M-1)!) = 1 / (2 (M-1) C(M-2, |S|))
    std::vector<double> weight(m > 1 ? m - 1 : 0);
    for (std::size_t s = 0; s + 2 <= m; ++s) {
        weight[s] = 1.0 / (2.0 * static_cast<double>(m - 1) * binomial(m - 2, s));
    }
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            const std::size_t bi = std::size_t{1} << i;
            const std::size_t bj = std::size_t{1} << j;
            double acc = 0.0;
            for (std::size_t mask = 0; mask < v.size(); ++mask) {
                if (mask & (bi | bj)) continue;
                acc += weight[static_cast<std::size_t>(std::popcount(mask))] *
                       (v[mask | bi | bj] - v[mask | bi] - v[mask | bj] + v[mask]);
            }
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            out.values(ii, jj) = acc;
            out.values(jj, ii) = acc;
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        double off = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (j != i) off += out.values(ii, static_cast<Eigen::Index>(j));
        }
        out.values(ii, ii) = phi[i] - off;
    }
    return out;
}

std::vector<double> background_vector(const FeatureMatrix& m, BackgroundMode mode) {
    if (m.rows() == 0) throw Error("invariant", "background from an empty matrix");
    std::vector<double> bg(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) {
        const auto col = m.x.col(static_cast<Eigen::Index>(j));
        if (mode == BackgroundMode::mean) {
            bg[j] = col.mean();
        } else {
            std::vector<double> v(col.data(), col.data() + col.size());
            std::sort(v.begin(), v.end());
            const std::size_t n = v.size();
            bg[j] = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
        }
    }
    return bg;
}

ShapleySummary shapley_summary(const Predictor& p, const FeatureMatrix& m, const FeatureMatrix& background_from,
                               BackgroundMode mode) {
    if (m.rows() == 0) throw Error("invariant", "nothing to explain");
    ShapleySummary s;
    s.feature_names = default_names(m.feature_names, m.cols());
    s.background = background_vector(background_from, mode);
    s.mean_abs_phi.assign(m.cols(), 0.0);
    std::vector<double> row(m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) row[j] = m.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        auto r = shapley_exact(p, row, s.background, s.feature_names);
        for (std::size_t j = 0; j < m.cols(); ++j) s.mean_abs_phi[j] += std::abs(r.phi[j]);
        s.base_value = r.base_value;
        s.per_sample.push_back(std::move(r));
    }
    for (auto& v : s.mean_abs_phi) v /= static_cast<double>(m.rows());

    std::vector<std::size_t> order(m.cols());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s.mean_abs_phi[a] > s.mean_abs_phi[b]; });
    for (auto j : order) s.ranking.push_back(s.feature_names[j]);
    return s;
}

}  // namespace battcap
