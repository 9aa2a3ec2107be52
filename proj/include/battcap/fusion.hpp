#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "battcap/standardizer.hpp"

namespace battcap {

/// t-SNE settings. Defaults follow the reference exact implementation.
struct TsneParams {
    double perplexity = 30.0;  // clamped to (N-1)/3 for small N
    double learning_rate = 200.0;
    int iterations = 1000;
    double exaggeration = 4.0;
    int exaggeration_iters = 100;
    double momentum_start = 0.5;
    double momentum_final = 0.8;
    int momentum_switch = 250;
    std::uint64_t seed = 0x5eed;

    void validate() const;
};

struct SigmaCalibration {
    double sigma = 0.0;
    double perplexity = 0.0;  // achieved, 2^H in bits
    std::vector<double> conditional;  // p_{j|i} over the row
};

/// Gaussian conditional distribution for one row of squared distances.
std::vector<double> conditional_row(std::span<const double> sq_distances, double sigma);

/// 2^H(P), H in bits.
double row_perplexity(std::span<const double> probabilities);

/// Bisection on sigma until the row's perplexity matches the target.
SigmaCalibration calibrate_sigma(std::span<const double> sq_distances, double target_perplexity);

struct AffinityMatrix {
    Eigen::MatrixXd p;  // symmetric joint distribution, zero diagonal
    double perplexity = 0.0;
    std::vector<double> sigmas;
};

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x);

/// p_ij = (p_{j|i} + p_{i|j}) / 2N. Rejects duplicate rows.
AffinityMatrix joint_affinities(const Eigen::MatrixXd& x, double perplexity);

/// Student-t (one degree of freedom) joint affinities of an embedding.
Eigen::MatrixXd student_t_affinities(const Eigen::MatrixXd& y);

/// sum P log(P/Q), natural log, 0 log 0 = 0.
double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q);

/// Analytic gradient 4 sum_j (p_ij - q_ij)(y_i - y_j) / (1 + |y_i - y_j|^2).
Eigen::MatrixXd tsne_gradient(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q, const Eigen::MatrixXd& y);

struct EmbeddingResult {
    Eigen::MatrixXd y;
    double final_kl = 0.0;
    std::vector<double> kl_history;  // KL of the state entering each iteration
    TsneParams params;
    AffinityMatrix affinities;
};

double effective_perplexity(double requested, std::size_t n_points);

EmbeddingResult tsne_embed(const Eigen::MatrixXd& x, int dims, const TsneParams& params = {});

struct DimensionScreen {
    struct Entry {
        int dims = 0;
        double final_kl = 0.0;
        Eigen::MatrixXd y;
    };
    std::vector<Entry> entries;
    int recommended_dims = 0;  // argmin final KL
    TsneParams params;
};

DimensionScreen screen_dimensions(const Eigen::MatrixXd& x, std::span<const int> dims, const TsneParams& params = {});

/// Places unseen points in a fixed embedding as an inverse-squared-distance
/// barycentre of their nearest training points in the input space.
class OutOfSampleEmbedder {
public:
    OutOfSampleEmbedder() = default;
    OutOfSampleEmbedder(Eigen::MatrixXd train_x, Eigen::MatrixXd train_y, int neighbors = 5);

    Eigen::VectorXd embed(std::span<const double> x) const;

    const Eigen::MatrixXd& train_x() const { return train_x_; }
    const Eigen::MatrixXd& train_y() const { return train_y_; }
    int neighbors() const { return neighbors_; }

private:
    Eigen::MatrixXd train_x_;
    Eigen::MatrixXd train_y_;
    int neighbors_ = 5;
};

/// Standardize, embed with t-SNE, and keep what is needed to place new rows.
struct FeatureFusion {
    Standardizer scale;
    OutOfSampleEmbedder embedder;
    double final_kl = 0.0;

    static FeatureFusion fit(const Eigen::MatrixXd& x, int dims, const TsneParams& params);
    int dims() const { return static_cast<int>(embedder.train_y().cols()); }
    Eigen::VectorXd transform(std::span<const double> row) const;
    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
};

}  // namespace battcap
