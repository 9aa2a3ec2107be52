#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "battcap/feature_matrix.hpp"

namespace battcap {

enum class Strength { low, significant, high, degenerate };

std::string to_string(Strength s);

/// Pearson product-moment correlation. Throws on a constant series.
double pearson(std::span<const double> x, std::span<const double> y);

/// |r| < 0.4 low, 0.4 <= |r| < 0.7 significant, otherwise high.
Strength classify_strength(double r);

inline constexpr double kDefaultRho = 0.5;

/// Grey relational coefficients of each comparison series against the
/// reference. Every series is divided by its own mean first; the two-level
/// min/max deviations are taken over the whole batch.
std::vector<std::vector<double>> grey_coefficients(std::span<const double> reference,
                                                   std::span<const std::vector<double>> comparisons,
                                                   double rho = kDefaultRho);

std::vector<double> grey_coefficients(std::span<const double> reference, std::span<const double> comparison,
                                      double rho = kDefaultRho);

/// Mean of the relational coefficients.
double grey_degree(std::span<const double> coefficients);

struct FeatureCorrelation {
    std::string name;
    std::optional<double> pcc;  // empty for constant columns
    Strength tier = Strength::degenerate;
    std::optional<double> gra;  // empty for zero-mean columns
};

struct CorrelationReport {
    std::vector<FeatureCorrelation> features;
    std::vector<std::string> ranking_pcc;  // by |r|, descending
    std::vector<std::string> ranking_gra;  // by relational degree, descending
    double rho = kDefaultRho;
};

CorrelationReport correlation_report(const FeatureMatrix& m, double rho = kDefaultRho);

}  // namespace battcap
