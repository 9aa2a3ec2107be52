#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "battcap/standardizer.hpp"

namespace battcap {

enum class Activation { sigmoid, tanh };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

struct ElmWeights {
    Eigen::MatrixXd omega;  // l x n
    Eigen::VectorXd b;      // l
};

/// Input weights and biases i.i.d. uniform on [-1, 1]. Draw order: omega
/// row by row, then b.
ElmWeights elm_init(int n, int l, std::uint64_t seed);

/// H(i, j) = g(omega_j . x_i + b_j).
Eigen::MatrixXd elm_hidden(const Eigen::MatrixXd& x, const Eigen::MatrixXd& omega, const Eigen::VectorXd& b,
                           Activation g);

inline constexpr double kPinvCutoff = 1e-10;

/// Minimum-norm least-squares solution of H beta = T through the SVD;
/// singular values below kPinvCutoff * sigma_max count as zero.
Eigen::MatrixXd elm_solve_beta(const Eigen::MatrixXd& h, const Eigen::MatrixXd& t);

/// Input z-scores and target min-max range fixed at fit time.
struct Normalization {
    Standardizer inputs;
    double tmin = 0.0;
    double tmax = 1.0;

    static Normalization fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
    Eigen::VectorXd scale_target(const Eigen::VectorXd& y) const;
    double unscale_target(double s) const { return tmin + s * (tmax - tmin); }
};

struct ElmModel {
    Eigen::MatrixXd omega;
    Eigen::VectorXd b;
    Eigen::VectorXd beta;  // m = 1
    Activation activation = Activation::sigmoid;
    Normalization norm;

    int hidden() const { return static_cast<int>(omega.rows()); }
    int inputs() const { return static_cast<int>(omega.cols()); }

    double predict(std::span<const double> row) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
    void validate() const;
};

/// Fits beta for given input weights. Inputs and target are normalized with
/// statistics of (x, y).
ElmModel elm_fit_weights(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, ElmWeights w, Activation g);

ElmModel elm_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int l, Activation g, std::uint64_t seed);

inline Eigen::VectorXd elm_predict(const ElmModel& m, const Eigen::MatrixXd& x) { return m.predict(x); }

// ---------------------------------------------------------------- baselines

struct TreeParams {
    int max_depth = 8;
    int min_leaf = 2;
    int max_features = 0;  // features tried per split; 0 means all
};

/// Variance-reduction CART regressor, stored as a flat node array.
class RegressionTree {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
    };

    /// Fits on the given rows (repeats allowed, as in a bootstrap sample).
    /// `seed` only matters when max_features < number of features.
    static RegressionTree fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const std::size_t> rows,
                              const TreeParams& params, std::uint64_t seed = 0);
    static RegressionTree fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TreeParams& params,
                              std::uint64_t seed = 0);

    double predict(std::span<const double> row) const;
    const std::vector<Node>& nodes() const { return nodes_; }
    static RegressionTree from_nodes(std::vector<Node> nodes);
    int depth() const;

private:
    std::vector<Node> nodes_;
};

enum class BaselineKind { knn, tree, forest, gbrt };

std::string to_string(BaselineKind k);
BaselineKind parse_baseline_kind(const std::string& name);

struct BaselineParams {
    int k = 5;
    TreeParams tree;
    int n_trees = 100;
    int mtry = 0;  // 0 means ceil(M / 3)
    bool bootstrap = true;
    int gbrt_trees = 200;
    int gbrt_depth = 3;
    double shrinkage = 0.1;
    std::uint64_t seed = 1;

    void validate(BaselineKind kind) const;
};

struct KnnState {
    Standardizer scale;
    Eigen::MatrixXd train_z;
    Eigen::VectorXd train_y;
};

struct ForestState {
    std::vector<RegressionTree> trees;
};

struct GbrtState {
    double init = 0.0;
    std::vector<RegressionTree> trees;
    std::vector<double> train_mse;  // entry r: after r rounds (entry 0 = constant model)
};

struct BaselineModel {
    BaselineKind kind = BaselineKind::knn;
    BaselineParams params;
    std::variant<KnnState, RegressionTree, ForestState, GbrtState> state;

    double predict(std::span<const double> row) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

BaselineModel baseline_fit(BaselineKind kind, const BaselineParams& params, const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& y);

inline Eigen::VectorXd baseline_predict(const BaselineModel& m, const Eigen::MatrixXd& x) { return m.predict(x); }

}  // namespace battcap
