#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "battcap/feature_matrix.hpp"
#include "battcap/fusion.hpp"
#include "battcap/models.hpp"
#include "battcap/woa.hpp"

namespace battcap {

/// What the optimizer minimizes: RMSE on the training rows, or on an inner
/// held-out fraction of them.
struct Fitness {
    enum class Mode { train_rmse, holdout } mode = Mode::train_rmse;
    double holdout_frac = 0.0;

    static Fitness parse(const std::string& spec);  // "train_rmse" or "holdout:0.2"
    std::string to_string() const;
};

struct TrainConfig {
    int hidden_l = 40;
    Activation activation = Activation::sigmoid;
    double split_ratio = 0.7;
    std::uint64_t seed = 1;
    Fitness fitness;
    // Search settings; dim and bounds are filled in from hidden_l and the
    // feature count by woa_config().
    int pop_size = 30;
    int t_max = 500;
    double spiral_b = 1.0;
    GateNorm gate = GateNorm::euclidean;

    WoaConfig woa_config(int n_features) const;
    void validate() const;
};

/// Row-major omega followed by b.
Eigen::VectorXd encode_position(const Eigen::MatrixXd& omega, const Eigen::VectorXd& b);
ElmWeights decode_position(std::span<const double> position, int n, int hidden_l);

struct WoaElmResult {
    ElmModel model;
    WoaResult search;
};

/// Optimizes (omega, b) with WOA, then re-solves beta at the best position on
/// all training rows.
WoaElmResult woa_elm_train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TrainConfig& cfg);

// ---------------------------------------------------------------- metrics

/// Population standard deviation (divide by N).
double standard_deviation(std::span<const double> v);
double rmse(std::span<const double> pred, std::span<const double> actual);
/// 1 - SS_res / SS_tot. Throws on a constant `actual`.
double r_squared(std::span<const double> pred, std::span<const double> actual);

struct Metrics {
    double rmse = 0.0;
    double r2 = 0.0;
    double sd_pred = 0.0;
    double sd_actual = 0.0;
    double pearson_r = 0.0;  // 0 when the predictions are constant
};

Metrics compute_metrics(std::span<const double> pred, std::span<const double> actual);

struct TaylorPoint {
    std::string name;
    double sd_pred = 0.0;
    double pearson_r = 0.0;
    double centered_rmse = 0.0;
    bool degenerate = false;  // constant predictions, angle undefined
};

struct TaylorData {
    double sd_actual = 0.0;
    std::vector<TaylorPoint> points;
};

struct NamedPredictions {
    std::string name;
    std::vector<double> predictions;
};

TaylorData taylor_points(std::span<const NamedPredictions> models, std::span<const double> actual);

/// Quarter-polar diagram: radius = SD, angle = arccos(r), REF on the x axis,
/// dashed centred-RMSE arcs around REF. One element with class "marker" per
/// model plus one for REF.
std::string render_taylor_svg(const TaylorData& data);

// ---------------------------------------------------------------- models

/// A fitted model of any kind, optionally behind a feature fusion stage.
/// Predictions always take the raw feature vector.
struct TrainedModel {
    std::string kind;  // elm, woa-elm, knn, tree, rf, gbrt
    std::uint64_t seed = 0;
    std::vector<std::string> feature_names;
    std::variant<ElmModel, BaselineModel> model;
    std::optional<FeatureFusion> fusion;
    std::optional<WoaResult> search;  // woa-elm only; not persisted

    double predict(std::span<const double> row) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
    std::size_t input_dims() const { return feature_names.size(); }
};

const std::vector<std::string>& model_kinds();

struct ModelSpec {
    std::string kind = "woa-elm";
    TrainConfig train;
    BaselineParams baseline;
    bool fused = false;
    int fused_dims = 2;
    TsneParams tsne;
};

TrainedModel train_model(const FeatureMatrix& train, const ModelSpec& spec);

// ---------------------------------------------------------------- table 1

struct ArmResult {
    double rmse = 0.0;
    double train_r2 = 0.0;
    double test_r2 = 0.0;
    double wall_ms = 0.0;    // WOA-ELM fit call only
    double fusion_ms = 0.0;  // t-SNE + embedder, fused arm only
    int input_dims = 0;
};

struct FusionComparison {
    ArmResult full;
    ArmResult fused;
    // Relative change in percent, signed so that positive means better:
    // reductions for rmse and time, increases for R^2.
    double diff_rmse = 0.0;
    double diff_train_r2 = 0.0;
    double diff_test_r2 = 0.0;
    double diff_time = 0.0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::uint64_t split_seed = 0;
};

FusionComparison fused_comparison(const FeatureMatrix& m, const TrainConfig& cfg, std::uint64_t split_seed,
                                  const TsneParams& tsne = {}, int fused_dims = 2);

}  // namespace battcap
