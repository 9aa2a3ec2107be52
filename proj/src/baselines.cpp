#include <algorithm>
#include <cmath>
#include <numeric>

#include "battcap/error.hpp"
#include "battcap/models.hpp"
#include "battcap/rng.hpp"

namespace battcap {

namespace {

struct TreeBuilder {
    const Eigen::MatrixXd& x;
    const Eigen::VectorXd& y;
    TreeParams params;
    Rng rng;
    std::vector<RegressionTree::Node> nodes;

    std::vector<int> candidate_features() {
        const int m = static_cast<int>(x.cols());
        std::vector<int> f(static_cast<std::size_t>(m));
        std::iota(f.begin(), f.end(), 0);
        if (params.max_features <= 0 || params.max_features >= m) return f;
        // Partial Fisher-Yates: the first max_features slots are the draw.
        for (int i = 0; i < params.max_features; ++i) {
            const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(m - i)));
            std::swap(f[static_cast<std::size_t>(i)], f[static_cast<std::size_t>(j)]);
        }
        f.resize(static_cast<std::size_t>(params.max_features));
        return f;
    }

    int build(std::vector<std::size_t> rows, int depth) {
        const int id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        const double n = static_cast<double>(rows.size());
        double sum = 0.0, sum_sq = 0.0;
        for (auto r : rows) {
            sum += y(static_cast<Eigen::Index>(r));
            sum_sq += y(static_cast<Eigen::Index>(r)) * y(static_cast<Eigen::Index>(r));
        }
        nodes[static_cast<std::size_t>(id)].value = sum / n;

        const auto min_leaf = static_cast<std::size_t>(std::max(1, params.min_leaf));
        if (depth >= params.max_depth || rows.size() < 2 * min_leaf) return id;

        const double parent_score = sum * sum / n;
        double best_score = parent_score + 1e-12 * std::max(1.0, sum_sq);
        int best_feature = -1;
        double best_threshold = 0.0;

        std::vector<std::pair<double, double>> pairs(rows.size());
        for (int f : candidate_features()) {
            for (std::size_t k = 0; k < rows.size(); ++k) {
                const auto r = static_cast<Eigen::Index>(rows[k]);
                pairs[k] = {x(r, f), y(r)};
            }
            std::stable_sort(pairs.begin(), pairs.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            double left = 0.0;
            for (std::size_t i = 1; i < pairs.size(); ++i) {
                left += pairs[i - 1].second;
                if (i < min_leaf || pairs.size() - i < min_leaf) continue;
                if (!(pairs[i - 1].first < pairs[i].first)) continue;
                const double nl = static_cast<double>(i);
                const double right = sum - left;
                const double score = left * left / nl + right * right / (n - nl);
                if (score > best_score) {
                    best_score = score;
                    best_feature = f;
                    double t = 0.5 * (pairs[i - 1].first + pairs[i].first);
                    if (!(t < pairs[i].first)) t = pairs[i - 1].first;
                    best_threshold = t;
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> lrows, rrows;
        for (auto r : rows) {
            (x(static_cast<Eigen::Index>(r), best_feature) <= best_threshold ? lrows : rrows).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        const int l = build(std::move(lrows), depth + 1);
        const int r = build(std::move(rrows), depth + 1);
        auto& node = nodes[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        return id;
    }
};

void check_training_set(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() == 0) throw Error("invariant", "empty training set");
    if (x.rows() != y.size()) throw Error("invariant", "x and y row counts differ");
    if (!x.allFinite() || !y.allFinite()) throw Error("non_finite", "training data has non-finite entries");
}

std::vector<std::size_t> all_rows(Eigen::Index n) {
    std::vector<std::size_t> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

}  // namespace

RegressionTree RegressionTree::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   std::span<const std::size_t> rows, const TreeParams& params, std::uint64_t seed) {
    check_training_set(x, y);
    if (rows.empty()) throw Error("invariant", "tree fitted on no rows");
    TreeBuilder b{x, y, params, Rng(seed), {}};
    b.build(std::vector<std::size_t>(rows.begin(), rows.end()), 0);
    RegressionTree t;
    t.nodes_ = std::move(b.nodes);
    return t;
}

RegressionTree RegressionTree::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TreeParams& params,
                                   std::uint64_t seed) {
    const auto rows = all_rows(x.rows());
    return fit(x, y, rows, params, seed);
}

double RegressionTree::predict(std::span<const double> row) const {
    if (nodes_.empty()) throw Error("invariant", "tree is not fitted");
    std::size_t i = 0;
    while (nodes_[i].feature >= 0) {
        const auto f = static_cast<std::size_t>(nodes_[i].feature);
        if (f >= row.size()) throw Error("invariant", "tree split on a feature the row does not have");
        i = static_cast<std::size_t>(row[f] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right);
    }
    return nodes_[i].value;
}

RegressionTree RegressionTree::from_nodes(std::vector<Node> nodes) {
    if (nodes.empty()) throw Error("schema", "tree has no nodes");
    const int n = static_cast<int>(nodes.size());
    for (int i = 0; i < n; ++i) {
        const auto& node = nodes[static_cast<std::size_t>(i)];
        if (node.feature < 0) continue;
        // Children always come after their parent, which also rules out cycles.
        if (node.left <= i || node.right <= i || node.left >= n || node.right >= n) {
            throw Error("schema", "tree node " + std::to_string(i) + " has invalid children");
        }
    }
    RegressionTree t;
    t.nodes_ = std::move(nodes);
    return t;
}

int RegressionTree::depth() const {
    std::vector<int> d(nodes_.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        best = std::max(best, d[i]);
        if (nodes_[i].feature >= 0) {
            d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
        }
    }
    return best;
}

std::string to_string(BaselineKind k) {
    switch (k) {
        case BaselineKind::knn: return "knn";
        case BaselineKind::tree: return "tree";
        case BaselineKind::forest: return "rf";
        case BaselineKind::gbrt: return "gbrt";
    }
    return "knn";
}

BaselineKind parse_baseline_kind(const std::string& name) {
    if (name == "knn") return BaselineKind::knn;
    if (name == "tree") return BaselineKind::tree;
    if (name == "rf" || name == "forest") return BaselineKind::forest;
    if (name == "gbrt") return BaselineKind::gbrt;
    throw Error("schema", "unknown model kind '" + name + "'");
}

void BaselineParams::validate(BaselineKind kind) const {
    switch (kind) {
        case BaselineKind::knn:
            if (k < 1) throw Error("invariant", "knn needs k >= 1");
            break;
        case BaselineKind::tree:
            if (tree.max_depth < 1) throw Error("invariant", "tree needs depth >= 1");
            break;
        case BaselineKind::forest:
            if (n_trees < 1) throw Error("invariant", "forest needs at least one tree");
            if (tree.max_depth < 1) throw Error("invariant", "tree needs depth >= 1");
            break;
        case BaselineKind::gbrt:
            if (!(shrinkage > 0.0 && shrinkage <= 1.0)) throw Error("invariant", "shrinkage must lie in (0, 1]");
            if (gbrt_trees < 1) throw Error("invariant", "gbrt needs at least one tree");
            if (gbrt_depth < 1) throw Error("invariant", "tree needs depth >= 1");
            break;
    }
    if (tree.min_leaf < 1) throw Error("invariant", "min leaf size must be >= 1");
}

BaselineModel baseline_fit(BaselineKind kind, const BaselineParams& params, const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& y) {
    params.validate(kind);
    check_training_set(x, y);
    BaselineModel model;
    model.kind = kind;
    model.params = params;
    const Eigen::Index n = x.rows();

    switch (kind) {
        case BaselineKind::knn: {
            if (params.k > n) {
                throw Error("invariant", "k = " + std::to_string(params.k) + " exceeds the " + std::to_string(n) +
                                             " training rows");
            }
            KnnState s;
            s.scale = Standardizer::fit(x);
            s.train_z = s.scale.apply(x);
            s.train_y = y;
            model.state = std::move(s);
            break;
        }
        case BaselineKind::tree:
            model.state = RegressionTree::fit(x, y, params.tree, params.seed);
            break;
        case BaselineKind::forest: {
            TreeParams tp = params.tree;
            const int m = static_cast<int>(x.cols());
            tp.max_features = params.mtry > 0 ? params.mtry : (m + 2) / 3;
            ForestState s;
            for (int t = 0; t < params.n_trees; ++t) {
                const std::uint64_t tree_seed = derive_seed(params.seed, static_cast<std::uint64_t>(t));
                Rng rng(tree_seed);
                std::vector<std::size_t> rows;
                if (params.bootstrap) {
                    rows.resize(static_cast<std::size_t>(n));
                    for (auto& r : rows) r = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)));
                } else {
                    rows = all_rows(n);
                }
                s.trees.push_back(RegressionTree::fit(x, y, rows, tp, rng.next()));
            }
            model.state = std::move(s);
            break;
        }
        case BaselineKind::gbrt: {
            TreeParams tp = params.tree;
            tp.max_depth = params.gbrt_depth;
            tp.max_features = 0;
            GbrtState s;
            s.init = y.mean();
            Eigen::VectorXd f = Eigen::VectorXd::Constant(n, s.init);
            s.train_mse.push_back((y - f).squaredNorm() / static_cast<double>(n));
            std::vector<double> row(static_cast<std::size_t>(x.cols()));
            for (int t = 0; t < params.gbrt_trees; ++t) {
                const Eigen::VectorXd residual = y - f;
                auto tree = RegressionTree::fit(x, residual, tp, 0);
                for (Eigen::Index i = 0; i < n; ++i) {
                    for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
                    f(i) += params.shrinkage * tree.predict(row);
                }
                s.train_mse.push_back((y - f).squaredNorm() / static_cast<double>(n));
                s.trees.push_back(std::move(tree));
            }
            model.state = std::move(s);
            break;
        }
    }
    return model;
}

double BaselineModel::predict(std::span<const double> row) const {
    switch (kind) {
        case BaselineKind::knn: {
            const auto& s = std::get<KnnState>(state);
            if (static_cast<Eigen::Index>(row.size()) != s.train_z.cols()) {
                throw Error("invariant", "expected " + std::to_string(s.train_z.cols()) + " features, got " +
                                             std::to_string(row.size()));
            }
            std::vector<double> z(row.begin(), row.end());
            s.scale.apply_inplace(z);
            const Eigen::Index n = s.train_z.rows();
            std::vector<std::pair<double, Eigen::Index>> d(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                double acc = 0.0;
                for (Eigen::Index j = 0; j < s.train_z.cols(); ++j) {
                    const double diff = s.train_z(i, j) - z[static_cast<std::size_t>(j)];
                    acc += diff * diff;
                }
                d[static_cast<std::size_t>(i)] = {acc, i};
            }
            // Pairs compare by distance, then by row index.
            const auto k = static_cast<std::size_t>(params.k);
            std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
            double sum = 0.0;
            for (std::size_t i = 0; i < k; ++i) sum += s.train_y(d[i].second);
            return sum / static_cast<double>(k);
        }
        case BaselineKind::tree:
            return std::get<RegressionTree>(state).predict(row);
        case BaselineKind::forest: {
            const auto& s = std::get<ForestState>(state);
            double sum = 0.0;
            for (const auto& t : s.trees) sum += t.predict(row);
            return sum / static_cast<double>(s.trees.size());
        }
        case BaselineKind::gbrt: {
            const auto& s = std::get<GbrtState>(state);
            double f = s.init;
            for (const auto& t : s.trees) f += params.shrinkage * t.predict(row);
            return f;
        }
    }
    return 0.0;
}

Eigen::VectorXd BaselineModel::predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out(x.rows());
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
        out(i) = predict(row);
    }
    return out;
}

}  // namespace battcap
