#include "battcap/fusion.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "battcap/error.hpp"
#include "battcap/rng.hpp"

namespace battcap {

void TsneParams::validate() const {
    if (!(perplexity >= 2.0)) throw Error("invariant", "perplexity must be at least 2");
    if (iterations < 250) throw Error("invariant", "t-SNE needs at least 250 iterations");
    if (!(learning_rate > 0.0)) throw Error("invariant", "learning rate must be positive");
    if (exaggeration_iters < 0 || exaggeration_iters >= iterations) {
        throw Error("invariant", "early exaggeration must end before the last iteration");
    }
}

std::vector<double> conditional_row(std::span<const double> sq_distances, double sigma) {
    const double dmin = *std::min_element(sq_distances.begin(), sq_distances.end());
    const double inv = 1.0 / (2.0 * sigma * sigma);
    std::vector<double> p(sq_distances.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        p[j] = std::exp(-(sq_distances[j] - dmin) * inv);
        sum += p[j];
    }
    for (auto& v : p) v /= sum;
    return p;
}

double row_perplexity(std::span<const double> probabilities) {
    double h = 0.0;
    for (double v : probabilities) {
        if (v > 0.0) h -= v * std::log2(v);
    }
    return std::exp2(h);
}

SigmaCalibration calibrate_sigma(std::span<const double> sq_distances, double target_perplexity) {
    if (sq_distances.empty()) throw Error("invariant", "empty distance row");
    if (std::any_of(sq_distances.begin(), sq_distances.end(), [](double d) { return !(d >= 0.0); })) {
        throw Error("invariant", "squared distances must be non-negative");
    }
    if (std::all_of(sq_distances.begin(), sq_distances.end(), [](double d) { return d == 0.0; })) {
        throw Error("duplicate", "all distances are zero (duplicate points)");
    }
    constexpr double kTolerance = 1e-4;
    constexpr int kMaxSteps = 200;

    auto perp = [&](double sigma) { return row_perplexity(conditional_row(sq_distances, sigma)); };

    std::vector<double> positive;
    for (double d : sq_distances) {
        if (d > 0.0) positive.push_back(d);
    }
    std::nth_element(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(positive.size() / 2),
                     positive.end());
    const double start = std::sqrt(positive[positive.size() / 2]);

    double lo = start, hi = start;
    for (int i = 0; i < kMaxSteps && perp(hi) < target_perplexity; ++i) hi *= 2.0;
    for (int i = 0; i < kMaxSteps && perp(lo) > target_perplexity; ++i) lo *= 0.5;

    double sigma = std::sqrt(lo * hi);
    double achieved = perp(sigma);
    for (int step = 0; step < kMaxSteps && std::abs(achieved - target_perplexity) >= kTolerance; ++step) {
        if (achieved < target_perplexity) {
            lo = sigma;
        } else {
            hi = sigma;
        }
        sigma = std::sqrt(lo * hi);
        achieved = perp(sigma);
    }
    return {sigma, achieved, conditional_row(sq_distances, sigma)};
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = (x.row(i) - x.row(j)).squaredNorm();
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return d;
}

AffinityMatrix joint_affinities(const Eigen::MatrixXd& x, double perplexity) {
    const Eigen::Index n = x.rows();
    if (n < 4) throw Error("invariant", "t-SNE needs at least 4 points");
    if (!x.allFinite()) throw Error("invariant", "t-SNE input has non-finite entries");
    const Eigen::MatrixXd d = squared_distances(x);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (d(i, j) == 0.0) {
                throw Error("duplicate", "rows " + std::to_string(i) + " and " + std::to_string(j) + " are identical");
            }
        }
    }

    AffinityMatrix out;
    out.perplexity = perplexity;
    out.sigmas.resize(static_cast<std::size_t>(n));
    Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(n, n);
    std::vector<double> row(static_cast<std::size_t>(n - 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t k = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) row[k++] = d(i, j);
        }
        const auto cal = calibrate_sigma(row, perplexity);
        out.sigmas[static_cast<std::size_t>(i)] = cal.sigma;
        k = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) cond(i, j) = cal.conditional[k++];
        }
    }
    out.p = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
    return out;
}

namespace {

Eigen::MatrixXd student_t_kernel(const Eigen::MatrixXd& y) {
    const Eigen::Index n = y.rows();
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
            w(i, j) = v;
            w(j, i) = v;
        }
    }
    return w;
}

}  // namespace

Eigen::MatrixXd student_t_affinities(const Eigen::MatrixXd& y) {
    if (y.rows() < 2) throw Error("invariant", "need at least 2 points");
    const Eigen::MatrixXd w = student_t_kernel(y);
    return w / w.sum();
}

double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
    if (p.rows() != q.rows() || p.cols() != q.cols()) throw Error("invariant", "KL: shape mismatch");
    double kl = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            const double pv = p(i, j);
            if (pv <= 0.0) continue;
            const double qv = q(i, j);
            if (!(qv > 0.0)) throw Error("invariant", "KL: Q is zero where P is positive");
            kl += pv * std::log(pv / qv);
        }
    }
    return kl;
}

Eigen::MatrixXd tsne_gradient(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q, const Eigen::MatrixXd& y) {
    const Eigen::Index n = y.rows();
    if (p.rows() != n || p.cols() != n || q.rows() != n || q.cols() != n) {
        throw Error("invariant", "gradient: shape mismatch");
    }
    const Eigen::MatrixXd w = student_t_kernel(y);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, y.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double mult = 4.0 * (p(i, j) - q(i, j)) * w(i, j);
            grad.row(i) += mult * (y.row(i) - y.row(j));
        }
    }
    return grad;
}

double effective_perplexity(double requested, std::size_t n_points) {
    const double cap = static_cast<double>(n_points - 1) / 3.0;
    return std::max(std::min(requested, cap), std::min(2.0, static_cast<double>(n_points - 1)));
}

EmbeddingResult tsne_embed(const Eigen::MatrixXd& x, int dims, const TsneParams& params) {
    params.validate();
    if (dims < 1 || dims > 3) throw Error("invariant", "embedding dimension must be 1, 2 or 3");
    const Eigen::Index n = x.rows();
    if (n < 4) throw Error("invariant", "t-SNE needs at least 4 points");

    EmbeddingResult out;
    out.params = params;
    out.params.perplexity = effective_perplexity(params.perplexity, static_cast<std::size_t>(n));
    out.affinities = joint_affinities(x, out.params.perplexity);
    const Eigen::MatrixXd& p = out.affinities.p;

    Rng rng(params.seed);
    Eigen::MatrixXd y(n, dims);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < dims; ++k) y(i, k) = rng.normal(0.0, 1e-4);
    }
    Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, dims);
    Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, dims);
    out.kl_history.reserve(static_cast<std::size_t>(params.iterations));

    for (int it = 0; it < params.iterations; ++it) {
        const Eigen::MatrixXd q = student_t_affinities(y);
        out.kl_history.push_back(kl_divergence(p, q));

        // The exaggeration is applied as a factor on the attractive term;
        // the stored P is never modified.
        const double exaggeration = it < params.exaggeration_iters ? params.exaggeration : 1.0;
        const Eigen::MatrixXd grad = tsne_gradient(exaggeration * p, q, y);

        const double momentum = it < params.momentum_switch ? params.momentum_start : params.momentum_final;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index k = 0; k < dims; ++k) {
                const bool same_sign = (grad(i, k) > 0.0) == (velocity(i, k) > 0.0);
                gains(i, k) = same_sign ? std::max(gains(i, k) * 0.8, 0.01) : gains(i, k) + 0.2;
                velocity(i, k) = momentum * velocity(i, k) - params.learning_rate * gains(i, k) * grad(i, k);
                y(i, k) += velocity(i, k);
            }
        }
        const Eigen::RowVectorXd mean = y.colwise().mean();
        y.rowwise() -= mean;
    }
    out.final_kl = kl_divergence(p, student_t_affinities(y));
    out.y = std::move(y);
    return out;
}

DimensionScreen screen_dimensions(const Eigen::MatrixXd& x, std::span<const int> dims, const TsneParams& params) {
    if (dims.empty()) throw Error("invariant", "no dimensions requested");
    DimensionScreen screen;
    screen.params = params;
    double best = std::numeric_limits<double>::infinity();
    for (int d : dims) {
        TsneParams run = params;
        run.seed = derive_seed(params.seed, static_cast<std::uint64_t>(d));
        auto res = tsne_embed(x, d, run);
        screen.params.perplexity = res.params.perplexity;
        if (res.final_kl < best) {
            best = res.final_kl;
            screen.recommended_dims = d;
        }
        screen.entries.push_back({d, res.final_kl, std::move(res.y)});
    }
    return screen;
}

OutOfSampleEmbedder::OutOfSampleEmbedder(Eigen::MatrixXd train_x, Eigen::MatrixXd train_y, int neighbors)
    : train_x_(std::move(train_x)), train_y_(std::move(train_y)), neighbors_(neighbors) {
    if (train_x_.rows() != train_y_.rows() || train_x_.rows() == 0) {
        throw Error("invariant", "embedder needs matching, non-empty training sets");
    }
    if (neighbors_ < 1) throw Error("invariant", "embedder needs at least one neighbor");
}

Eigen::VectorXd OutOfSampleEmbedder::embed(std::span<const double> x) const {
    if (static_cast<Eigen::Index>(x.size()) != train_x_.cols()) throw Error("invariant", "embedder: width mismatch");
    const Eigen::Map<const Eigen::RowVectorXd> point(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::Index n = train_x_.rows();
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) dist[static_cast<std::size_t>(i)] = {(train_x_.row(i) - point).squaredNorm(), i};
    const auto k = static_cast<std::size_t>(std::min<Eigen::Index>(neighbors_, n));
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    if (dist.front().first == 0.0) return train_y_.row(dist.front().second).transpose();

    // Convex weights 1/d^2, so the point stays inside its neighbours' hull
    // in the embedding.
    Eigen::VectorXd out = Eigen::VectorXd::Zero(train_y_.cols());
    double total = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        const double w = 1.0 / dist[a].first;
        out += w * train_y_.row(dist[a].second).transpose();
        total += w;
    }
    return out / total;
}

FeatureFusion FeatureFusion::fit(const Eigen::MatrixXd& x, int dims, const TsneParams& params) {
    FeatureFusion f;
    f.scale = Standardizer::fit(x);
    Eigen::MatrixXd z = f.scale.apply(x);
    auto res = tsne_embed(z, dims, params);
    f.final_kl = res.final_kl;
    f.embedder = OutOfSampleEmbedder(std::move(z), std::move(res.y));
    return f;
}

Eigen::VectorXd FeatureFusion::transform(std::span<const double> row) const {
    std::vector<double> z(row.begin(), row.end());
    scale.apply_inplace(z);
    return embedder.embed(z);
}

Eigen::MatrixXd FeatureFusion::transform(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd out(x.rows(), dims());
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
        out.row(i) = transform(row).transpose();
    }
    return out;
}

}  // namespace battcap
