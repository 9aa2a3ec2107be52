#pragma once

#include <Eigen/Core>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "battcap/feature_matrix.hpp"

namespace battcap {

/// Any deterministic, side-effect-free scalar model of a feature vector.
using Predictor = std::function<double(std::span<const double>)>;

inline constexpr std::size_t kMaxShapleyFeatures = 20;
inline constexpr std::size_t kMaxInteractionFeatures = 12;

struct AttributionReport {
    double base_value = 0.0;  // prediction at the background point
    std::vector<double> phi;
    double prediction = 0.0;
    std::vector<std::string> feature_names;
};

/// Pairwise Shapley interaction indices; the diagonal holds main effects so
/// that each row sums to that feature's Shapley value.
struct InteractionMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> feature_names;
};

/// v(S) for every coalition S, indexed by bitmask: bit j set means feature j
/// takes its value from `x`, otherwise from `background`.
std::vector<double> coalition_values(const Predictor& p, std::span<const double> x,
                                     std::span<const double> background);

AttributionReport shapley_exact(const Predictor& p, std::span<const double> x, std::span<const double> background,
                                std::vector<std::string> feature_names = {});

InteractionMatrix interaction_matrix(const Predictor& p, std::span<const double> x,
                                     std::span<const double> background,
                                     std::vector<std::string> feature_names = {});

enum class BackgroundMode { mean, median };

std::vector<double> background_vector(const FeatureMatrix& m, BackgroundMode mode);

struct ShapleySummary {
    std::vector<std::string> feature_names;
    std::vector<double> background;
    double base_value = 0.0;
    std::vector<double> mean_abs_phi;
    std::vector<std::string> ranking;  // by mean |phi|, descending
    std::vector<AttributionReport> per_sample;
};

/// Explains every row of `m` against a background drawn from `background_from`
/// (usually the training rows).
ShapleySummary shapley_summary(const Predictor& p, const FeatureMatrix& m, const FeatureMatrix& background_from,
                               BackgroundMode mode = BackgroundMode::mean);

inline ShapleySummary shapley_summary(const Predictor& p, const FeatureMatrix& m,
                                      BackgroundMode mode = BackgroundMode::mean) {
    return shapley_summary(p, m, m, mode);
}

}  // namespace battcap
