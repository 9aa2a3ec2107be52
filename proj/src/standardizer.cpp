#include "battcap/standardizer.hpp"

#include <cmath>

namespace battcap {

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
    Standardizer s;
    const double n = static_cast<double>(x.rows());
    s.means = x.colwise().mean().transpose();
    s.sds.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double var = (x.col(j).array() - s.means(j)).square().sum() / n;
        s.sds(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd out = x;
    for (Eigen::Index j = 0; j < x.cols(); ++j) out.col(j) = (x.col(j).array() - means(j)) / sds(j);
    return out;
}

void Standardizer::apply_inplace(std::span<double> row) const {
    for (std::size_t j = 0; j < row.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        row[j] = (row[j] - means(jj)) / sds(jj);
    }
}

}  // namespace battcap
