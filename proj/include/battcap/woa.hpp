#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace battcap {

/// Cost to minimize. Must be deterministic: same position, same cost.
using Objective = std::function<double(std::span<const double>)>;

/// How |A| < 1 is decided. `euclidean` gates a whole whale on the norm of the
/// A vector; `componentwise` picks encircling or random search per coordinate.
enum class GateNorm { euclidean, componentwise };

struct WoaConfig {
    int dim = 0;
    Eigen::VectorXd lo, hi;
    int pop_size = 30;
    int t_max = 500;
    double spiral_b = 1.0;
    std::uint64_t seed = 1;
    GateNorm gate = GateNorm::euclidean;

    static WoaConfig box(int dim, double lo, double hi);
    void validate() const;
};

struct Coefficients {
    double a = 0.0;
    Eigen::VectorXd A, C;
};

/// a = 2 - 2t/t_max, A = 2a r1 - a, C = 2 r2.
Coefficients update_coefficients(int t, int t_max, const Eigen::VectorXd& r1, const Eigen::VectorXd& r2);

/// Shrinking encirclement: X' = X* - A o |C o X* - X|.
Eigen::VectorXd encircle_step(const Eigen::VectorXd& x, const Eigen::VectorXd& best, const Eigen::VectorXd& A,
                              const Eigen::VectorXd& C, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

/// Logarithmic spiral around X*: X' = |X* - X| e^{bl} cos(2 pi l) + X*.
Eigen::VectorXd spiral_step(const Eigen::VectorXd& x, const Eigen::VectorXd& best, double b, double spiral_l,
                            const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

/// Exploration around a random whale: X' = X_rand - A o |C o X_rand - X|.
Eigen::VectorXd random_search_step(const Eigen::VectorXd& x, const Eigen::VectorXd& x_rand, const Eigen::VectorXd& A,
                                   const Eigen::VectorXd& C, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

struct WoaResult {
    Eigen::VectorXd best_position;
    double best_cost = 0.0;
    std::vector<double> history;  // best cost after each iteration, t_max entries
    long evaluations = 0;
};

WoaResult woa_optimize(const Objective& f, const WoaConfig& cfg);

}  // namespace battcap
