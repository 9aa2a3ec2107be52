#include "battcap/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "battcap/data.hpp"
#include "battcap/error.hpp"
#include "battcap/format.hpp"
#include "battcap/rng.hpp"

namespace battcap {

Fitness Fitness::parse(const std::string& spec) {
    Fitness f;
    if (spec == "train_rmse") return f;
    const std::string prefix = "holdout:";
    if (spec.rfind(prefix, 0) == 0) {
        std::size_t used = 0;
        double frac = 0.0;
        try {
            frac = std::stod(spec.substr(prefix.size()), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != spec.size() - prefix.size() || !(frac > 0.0 && frac < 1.0)) {
            throw Error("schema", "holdout fraction must be a number in (0, 1): '" + spec + "'");
        }
        f.mode = Mode::holdout;
        f.holdout_frac = frac;
        return f;
    }
    throw Error("schema", "unknown fitness '" + spec + "' (expected train_rmse or holdout:<frac>)");
}

std::string Fitness::to_string() const {
    return mode == Mode::train_rmse ? "train_rmse" : "holdout:" + format_number(holdout_frac);
}

WoaConfig TrainConfig::woa_config(int n_features) const {
    WoaConfig w = WoaConfig::box(hidden_l * n_features + hidden_l, -1.0, 1.0);
    w.pop_size = pop_size;
    w.t_max = t_max;
    w.spiral_b = spiral_b;
    w.gate = gate;
    w.seed = derive_seed(seed, "woa");
    return w;
}

void TrainConfig::validate() const {
    if (hidden_l < 1) throw Error("invariant", "hidden_l must be >= 1");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw Error("invariant", "split ratio must lie in (0, 1)");
    if (pop_size < 2) throw Error("invariant", "WOA population must be >= 2");
    if (t_max < 1) throw Error("invariant", "WOA t_max must be >= 1");
}

Eigen::VectorXd encode_position(const Eigen::MatrixXd& omega, const Eigen::VectorXd& b) {
    if (omega.rows() != b.size()) throw Error("invariant", "omega rows and b length differ");
    const Eigen::Index l = omega.rows(), n = omega.cols();
    Eigen::VectorXd v(l * n + l);
    for (Eigen::Index i = 0; i < l; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) v(i * n + j) = omega(i, j);
    }
    v.tail(l) = b;
    return v;
}

ElmWeights decode_position(std::span<const double> position, int n, int hidden_l) {
    if (n < 1 || hidden_l < 1) throw Error("invariant", "decode_position: n and hidden_l must be >= 1");
    const auto expected = static_cast<std::size_t>(hidden_l) * static_cast<std::size_t>(n + 1);
    if (position.size() != expected) {
        throw Error("invariant", "position has length " + std::to_string(position.size()) + ", expected " +
                                     std::to_string(expected));
    }
    ElmWeights w{Eigen::MatrixXd(hidden_l, n), Eigen::VectorXd(hidden_l)};
    std::size_t k = 0;
    for (int i = 0; i < hidden_l; ++i) {
        for (int j = 0; j < n; ++j) w.omega(i, j) = position[k++];
    }
    for (int i = 0; i < hidden_l; ++i) w.b(i) = position[k++];
    return w;
}

WoaElmResult woa_elm_train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TrainConfig& cfg) {
    cfg.validate();
    if (x.rows() != y.size()) throw Error("invariant", "x and y row counts differ");
    const int n = static_cast<int>(x.cols());
    const Normalization norm = Normalization::fit(x, y);
    const Eigen::MatrixXd xz = norm.inputs.apply(x);
    const Eigen::VectorXd ts = norm.scale_target(y);
    const double range = norm.tmax - norm.tmin;

    // Rows used to solve beta and rows used to score it.
    std::vector<Eigen::Index> fit_rows(static_cast<std::size_t>(x.rows()));
    std::iota(fit_rows.begin(), fit_rows.end(), Eigen::Index{0});
    std::vector<Eigen::Index> score_rows = fit_rows;
    if (cfg.fitness.mode == Fitness::Mode::holdout) {
        const auto inner = split_rows(static_cast<std::size_t>(x.rows()), 1.0 - cfg.fitness.holdout_frac,
                                      derive_seed(cfg.seed, "holdout"));
        fit_rows.assign(inner.train.begin(), inner.train.end());
        score_rows.assign(inner.test.begin(), inner.test.end());
    }
    const Eigen::MatrixXd x_fit = xz(fit_rows, Eigen::all);
    const Eigen::VectorXd t_fit = ts(fit_rows);
    const Eigen::MatrixXd x_score = xz(score_rows, Eigen::all);
    const Eigen::VectorXd t_score = ts(score_rows);
    const bool same_rows = cfg.fitness.mode == Fitness::Mode::train_rmse;

    const Objective fitness = [&](std::span<const double> position) {
        const ElmWeights w = decode_position(position, n, cfg.hidden_l);
        const Eigen::MatrixXd h = elm_hidden(x_fit, w.omega, w.b, cfg.activation);
        const Eigen::VectorXd beta = elm_solve_beta(h, t_fit).col(0);
        const Eigen::VectorXd resid =
            same_rows ? Eigen::VectorXd(h * beta - t_fit)
                      : Eigen::VectorXd(elm_hidden(x_score, w.omega, w.b, cfg.activation) * beta - t_score);
        return std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size())) * range;
    };

    WoaElmResult out;
    out.search = woa_optimize(fitness, cfg.woa_config(n));
    const auto& best = out.search.best_position;
    out.model = elm_fit_weights(x, y, decode_position({best.data(), static_cast<std::size_t>(best.size())}, n,
                                                      cfg.hidden_l),
                                cfg.activation);
    return out;
}

// ---------------------------------------------------------------- models

double TrainedModel::predict(std::span<const double> row) const {
    if (row.size() != feature_names.size()) {
        throw Error("invariant", "model expects " + std::to_string(feature_names.size()) + " features, got " +
                                     std::to_string(row.size()));
    }
    if (fusion) {
        const Eigen::VectorXd z = fusion->transform(row);
        const std::span<const double> zs(z.data(), static_cast<std::size_t>(z.size()));
        return std::visit([&](const auto& m) { return m.predict(zs); }, model);
    }
    return std::visit([&](const auto& m) { return m.predict(row); }, model);
}

Eigen::VectorXd TrainedModel::predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out(x.rows());
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
        out(i) = predict(row);
    }
    return out;
}

const std::vector<std::string>& model_kinds() {
    static const std::vector<std::string> kinds{"elm", "woa-elm", "knn", "tree", "rf", "gbrt"};
    return kinds;
}

TrainedModel train_model(const FeatureMatrix& train, const ModelSpec& spec) {
    train.validate(3);
    TrainedModel out;
    out.kind = spec.kind;
    out.seed = spec.train.seed;
    out.feature_names = train.feature_names;

    Eigen::MatrixXd x = train.x;
    if (spec.fused) {
        out.fusion = FeatureFusion::fit(train.x, spec.fused_dims, spec.tsne);
        x = out.fusion->transform(train.x);
    }

    if (spec.kind == "elm") {
        spec.train.validate();
        out.model = elm_fit(x, train.y, spec.train.hidden_l, spec.train.activation,
                            derive_seed(spec.train.seed, "elm"));
    } else if (spec.kind == "woa-elm") {
        auto r = woa_elm_train(x, train.y, spec.train);
        out.model = std::move(r.model);
        out.search = std::move(r.search);
    } else {
        const BaselineKind kind = parse_baseline_kind(spec.kind);
        BaselineParams params = spec.baseline;
        params.seed = derive_seed(spec.train.seed, spec.kind);
        out.model = baseline_fit(kind, params, x, train.y);
    }
    return out;
}

// ---------------------------------------------------------------- table 1

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

std::span<const double> view(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

ArmResult run_arm(const Eigen::MatrixXd& xtr, const Eigen::VectorXd& ytr, const Eigen::MatrixXd& xte,
                  const Eigen::VectorXd& yte, const TrainConfig& cfg) {
    ArmResult r;
    r.input_dims = static_cast<int>(xtr.cols());
    const auto t0 = std::chrono::steady_clock::now();
    const auto fit = woa_elm_train(xtr, ytr, cfg);
    r.wall_ms = elapsed_ms(t0);
    const Eigen::VectorXd ptr = fit.model.predict(xtr);
    const Eigen::VectorXd pte = fit.model.predict(xte);
    r.rmse = rmse(view(pte), view(yte));
    r.train_r2 = r_squared(view(ptr), view(ytr));
    r.test_r2 = r_squared(view(pte), view(yte));
    return r;
}

double percent_change(double before, double after) {
    if (before == 0.0) return 0.0;
    return 100.0 * (after - before) / std::abs(before);
}

}  // namespace

FusionComparison fused_comparison(const FeatureMatrix& m, const TrainConfig& cfg, std::uint64_t split_seed,
                                  const TsneParams& tsne, int fused_dims) {
    m.validate(3);
    cfg.validate();
    const auto split = split_rows(m.rows(), cfg.split_ratio, split_seed);
    const FeatureMatrix tr = m.subset(split.train);
    const FeatureMatrix te = m.subset(split.test);

    FusionComparison out;
    out.n_train = tr.rows();
    out.n_test = te.rows();
    out.split_seed = split_seed;
    out.full = run_arm(tr.x, tr.y, te.x, te.y, cfg);

    const auto t0 = std::chrono::steady_clock::now();
    const FeatureFusion fusion = FeatureFusion::fit(tr.x, fused_dims, tsne);
    const Eigen::MatrixXd ztr = fusion.transform(tr.x);
    const Eigen::MatrixXd zte = fusion.transform(te.x);
    const double fusion_ms = elapsed_ms(t0);
    out.fused = run_arm(ztr, tr.y, zte, te.y, cfg);
    out.fused.fusion_ms = fusion_ms;

    out.diff_rmse = -percent_change(out.full.rmse, out.fused.rmse);
    out.diff_train_r2 = percent_change(out.full.train_r2, out.fused.train_r2);
    out.diff_test_r2 = percent_change(out.full.test_r2, out.fused.test_r2);
    out.diff_time = -percent_change(out.full.wall_ms, out.fused.wall_ms);
    return out;
}

}  // namespace battcap
