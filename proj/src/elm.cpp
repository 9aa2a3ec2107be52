#include <Eigen/SVD>
#include <cmath>
#include <vector>

#include "battcap/error.hpp"
#include "battcap/models.hpp"
#include "battcap/rng.hpp"

namespace battcap {

std::string to_string(Activation a) { return a == Activation::sigmoid ? "sigmoid" : "tanh"; }

Activation parse_activation(const std::string& name) {
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    throw Error("schema", "unknown activation '" + name + "'");
}

ElmWeights elm_init(int n, int l, std::uint64_t seed) {
    if (n < 1 || l < 1) throw Error("invariant", "ELM needs n >= 1 and l >= 1");
    Rng rng(seed);
    ElmWeights w{Eigen::MatrixXd(l, n), Eigen::VectorXd(l)};
    for (int i = 0; i < l; ++i) {
        for (int j = 0; j < n; ++j) w.omega(i, j) = rng.uniform(-1.0, 1.0);
    }
    for (int i = 0; i < l; ++i) w.b(i) = rng.uniform(-1.0, 1.0);
    return w;
}

Eigen::MatrixXd elm_hidden(const Eigen::MatrixXd& x, const Eigen::MatrixXd& omega, const Eigen::VectorXd& b,
                           Activation g) {
    if (x.cols() != omega.cols() || omega.rows() != b.size()) {
        throw Error("invariant", "elm_hidden: shape mismatch (x has " + std::to_string(x.cols()) +
                                     " columns, omega is " + std::to_string(omega.rows()) + "x" +
                                     std::to_string(omega.cols()) + ")");
    }
    Eigen::MatrixXd u = x * omega.transpose();
    u.rowwise() += b.transpose();
    if (g == Activation::sigmoid) return (1.0 + (-u.array()).exp()).inverse().matrix();
    return u.array().tanh().matrix();
}

Eigen::MatrixXd elm_solve_beta(const Eigen::MatrixXd& h, const Eigen::MatrixXd& t) {
    if (h.rows() < 1 || h.rows() != t.rows()) throw Error("invariant", "elm_solve_beta: shape mismatch");
    if (!h.allFinite() || !t.allFinite()) throw Error("non_finite", "elm_solve_beta: non-finite input");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double cut = s.size() > 0 ? kPinvCutoff * s(0) : 0.0;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cut) inv(i) = 1.0 / s(i);
    }
    return svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * t);
}

Normalization Normalization::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (y.size() == 0) throw Error("invariant", "empty training set");
    Normalization n;
    n.inputs = Standardizer::fit(x);
    n.tmin = y.minCoeff();
    n.tmax = y.maxCoeff();
    if (!(n.tmax > n.tmin)) throw Error("degenerate", "constant target cannot be min-max scaled");
    return n;
}

Eigen::VectorXd Normalization::scale_target(const Eigen::VectorXd& y) const {
    return ((y.array() - tmin) / (tmax - tmin)).matrix();
}

double ElmModel::predict(std::span<const double> row) const {
    if (static_cast<Eigen::Index>(row.size()) != omega.cols()) {
        throw Error("invariant", "expected " + std::to_string(omega.cols()) + " features, got " +
                                     std::to_string(row.size()));
    }
    Eigen::VectorXd z(static_cast<Eigen::Index>(row.size()));
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        z(j) = (row[static_cast<std::size_t>(j)] - norm.inputs.means(j)) / norm.inputs.sds(j);
    }
    Eigen::VectorXd u = omega * z + b;
    double s = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double hv = activation == Activation::sigmoid ? 1.0 / (1.0 + std::exp(-u(i))) : std::tanh(u(i));
        s += hv * beta(i);
    }
    return norm.unscale_target(s);
}

Eigen::VectorXd ElmModel::predict(const Eigen::MatrixXd& x) const {
    // Row by row so batch and single predictions agree bit for bit.
    Eigen::VectorXd out(x.rows());
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
        out(i) = predict(row);
    }
    return out;
}

void ElmModel::validate() const {
    const auto l = omega.rows();
    const auto n = omega.cols();
    if (l < 1 || n < 1 || b.size() != l || beta.size() != l || norm.inputs.means.size() != n ||
        norm.inputs.sds.size() != n) {
        throw Error("schema", "ELM model dimensions are inconsistent");
    }
    if (!omega.allFinite() || !b.allFinite() || !beta.allFinite() || !norm.inputs.means.allFinite() ||
        !norm.inputs.sds.allFinite() || !std::isfinite(norm.tmin) || !std::isfinite(norm.tmax)) {
        throw Error("schema", "ELM model has non-finite entries");
    }
    if ((norm.inputs.sds.array() <= 0.0).any() || !(norm.tmax > norm.tmin)) {
        throw Error("schema", "ELM normalization is degenerate");
    }
}

ElmModel elm_fit_weights(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, ElmWeights w, Activation g) {
    if (x.rows() != y.size()) throw Error("invariant", "elm_fit: x and y row counts differ");
    ElmModel m;
    m.norm = Normalization::fit(x, y);
    m.activation = g;
    m.omega = std::move(w.omega);
    m.b = std::move(w.b);
    const Eigen::MatrixXd h = elm_hidden(m.norm.inputs.apply(x), m.omega, m.b, g);
    m.beta = elm_solve_beta(h, m.norm.scale_target(y)).col(0);
    return m;
}

ElmModel elm_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int l, Activation g, std::uint64_t seed) {
    return elm_fit_weights(x, y, elm_init(static_cast<int>(x.cols()), l, seed), g);
}

}  // namespace battcap
