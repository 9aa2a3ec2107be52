#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

namespace battcap {

/// Rectangular design matrix: one row per cycle, one column per feature,
/// with the capacity target alongside.
struct FeatureMatrix {
    std::vector<std::string> feature_names;
    std::string target_name = "target";
    std::vector<int> cycles;
    Eigen::MatrixXd x;  // rows x features
    Eigen::VectorXd y;

    std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(x.cols()); }

    /// Rows picked by index, in the order given.
    FeatureMatrix subset(std::span<const std::size_t> indices) const;

    /// Throws unless rectangular, finite and with at least `min_rows` rows.
    void validate(std::size_t min_rows = 3) const;
};

}  // namespace battcap
