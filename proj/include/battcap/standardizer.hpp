#pragma once

#include <Eigen/Core>
#include <span>

namespace battcap {

/// Column z-scoring fitted on one matrix and replayed on others.
/// Population standard deviation; zero-variance columns keep unit scale.
struct Standardizer {
    Eigen::VectorXd means;
    Eigen::VectorXd sds;

    static Standardizer fit(const Eigen::MatrixXd& x);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
    void apply_inplace(std::span<double> row) const;
};

}  // namespace battcap
