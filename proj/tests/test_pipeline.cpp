#include <algorithm>
#include <cmath>

#include "battcap/error.hpp"
#include "battcap/pipeline.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace battcap;

namespace {

std::span<const double> view(const std::vector<double>& v) { return v; }
std::span<const double> view(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

std::size_t count(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
}

double train_rmse(const ElmModel& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    return rmse(view(Eigen::VectorXd(m.predict(x))), view(y));
}

}  // namespace

TEST_CASE("position encoding round trip") {
    Rng gen(4);
    const Eigen::MatrixXd omega = testing_support::random_matrix(gen, 3, 2);
    const Eigen::VectorXd b = testing_support::random_matrix(gen, 3, 1).col(0);
    const Eigen::VectorXd pos = encode_position(omega, b);
    REQUIRE(pos.size() == 9);
    CHECK(pos(1) == omega(0, 1));
    CHECK(pos(2) == omega(1, 0));
    CHECK(pos(6) == b(0));
    const auto w = decode_position({pos.data(), 9}, 2, 3);
    CHECK(w.omega == omega);
    CHECK(w.b == b);
    CHECK_THROWS_AS(decode_position({pos.data(), 8}, 2, 3), Error);
    CHECK_THROWS_AS(encode_position(omega, Eigen::VectorXd::Zero(2)), Error);

    TrainConfig cfg;
    cfg.hidden_l = 40;
    const auto wc = cfg.woa_config(13);
    CHECK(wc.dim == 40 * 14);
    CHECK(wc.lo.minCoeff() == -1.0);
    CHECK(wc.hi.maxCoeff() == 1.0);
}

TEST_CASE("metric hand values") {
    CHECK(standard_deviation(std::vector<double>{0, 2}) == 1.0);
    CHECK(standard_deviation(std::vector<double>{1, 2, 3, 4}) == doctest::Approx(std::sqrt(1.25)).epsilon(1e-15));
    CHECK(rmse(std::vector<double>{3, -4}, std::vector<double>{0, 0}) == doctest::Approx(std::sqrt(12.5)));
    // SS_res = 1, SS_tot = 2.
    CHECK(r_squared(std::vector<double>{1, 1, 3}, std::vector<double>{1, 2, 3}) == doctest::Approx(0.5));
    CHECK(r_squared(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}) == 0.0);
    CHECK(r_squared(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 1.0);
    CHECK_THROWS_AS(r_squared(std::vector<double>{1, 2}, std::vector<double>{5, 5}), Error);
    CHECK_THROWS_AS(rmse(std::vector<double>{1, 2}, std::vector<double>{1}), Error);
}

TEST_CASE("r squared and rmse agree on random series") {
    Rng gen(8);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + gen.below(80);
        const auto y = testing_support::random_series(gen, n, 100, 170);
        const auto p = testing_support::random_series(gen, n, 100, 170);
        const double sd = standard_deviation(view(y));
        const double e = rmse(view(p), view(y));
        CHECK(r_squared(view(p), view(y)) == doctest::Approx(1.0 - e * e / (sd * sd)).epsilon(1e-10));
        CHECK(e >= 0.0);
    }
}

TEST_CASE("taylor points satisfy the law of cosines") {
    Rng gen(12);
    const auto actual = testing_support::random_series(gen, 40, 0, 10);
    std::vector<NamedPredictions> models;
    for (int k = 0; k < 5; ++k) {
        auto p = actual;
        for (auto& v : p) v += gen.uniform(-1.0, 1.0) * k;
        models.push_back({"m" + std::to_string(k), p});
    }
    models.push_back({"flat", std::vector<double>(40, 3.0)});
    const auto td = taylor_points(models, view(actual));
    CHECK(td.sd_actual == doctest::Approx(standard_deviation(view(actual))));
    REQUIRE(td.points.size() == 6);
    CHECK(td.points[0].sd_pred == doctest::Approx(td.sd_actual));
    CHECK(td.points[0].pearson_r == doctest::Approx(1.0));
    CHECK(td.points[0].centered_rmse == doctest::Approx(0.0).epsilon(1e-12));
    for (const auto& pt : td.points) {
        if (pt.degenerate) continue;
        const double law = pt.sd_pred * pt.sd_pred + td.sd_actual * td.sd_actual -
                           2 * pt.sd_pred * td.sd_actual * pt.pearson_r;
        CHECK(pt.centered_rmse * pt.centered_rmse == doctest::Approx(law).epsilon(1e-9));
    }
    CHECK(td.points[5].degenerate);

    const std::string svg = render_taylor_svg(td);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(count(svg, "class=\"marker ") == td.points.size() + 1);
}

TEST_CASE("fitness parsing") {
    CHECK(Fitness::parse("train_rmse").mode == Fitness::Mode::train_rmse);
    const auto h = Fitness::parse("holdout:0.2");
    CHECK(h.mode == Fitness::Mode::holdout);
    CHECK(h.holdout_frac == 0.2);
    CHECK(h.to_string() == "holdout:0.2");
    CHECK_THROWS_AS(Fitness::parse("holdout:1.5"), Error);
    CHECK_THROWS_AS(Fitness::parse("holdout:x"), Error);
    CHECK_THROWS_AS(Fitness::parse("holdout:0.2x"), Error);
    CHECK_THROWS_AS(Fitness::parse("test_rmse"), Error);
}

TEST_CASE("woa_elm_train interpolates when rows do not exceed hidden nodes") {
    Rng gen(21);
    const Eigen::MatrixXd x = testing_support::random_matrix(gen, 20, 3);
    const Eigen::VectorXd y = testing_support::random_matrix(gen, 20, 1, 100, 160).col(0);
    TrainConfig cfg;
    cfg.hidden_l = 30;
    cfg.pop_size = 6;
    cfg.t_max = 10;
    const auto r = woa_elm_train(x, y, cfg);
    CHECK(train_rmse(r.model, x, y) < 1e-4);
    for (std::size_t t = 1; t < r.search.history.size(); ++t) CHECK(r.search.history[t] <= r.search.history[t - 1]);
    CHECK(r.search.history.size() == 10);

    // Refit on the best position reproduces the search cost.
    const auto again = woa_elm_train(x, y, cfg);
    CHECK(again.search.history == r.search.history);
    CHECK(again.model.beta == r.model.beta);
}

TEST_CASE("woa_elm_train fitness matches the refit model") {
    const auto& fx = testing_support::synthetic_fixture().m;
    TrainConfig cfg;
    cfg.hidden_l = 8;
    cfg.pop_size = 8;
    cfg.t_max = 15;
    const auto r = woa_elm_train(fx.x, fx.y, cfg);
    CHECK(train_rmse(r.model, fx.x, fx.y) == doctest::Approx(r.search.best_cost).epsilon(1e-8));

    cfg.fitness = Fitness::parse("holdout:0.25");
    const auto h = woa_elm_train(fx.x, fx.y, cfg);
    CHECK(std::isfinite(h.search.best_cost));
    CHECK(h.search.history != r.search.history);
}

TEST_CASE("woa search does not do worse than a random ELM on training rows") {
    const auto& fx = testing_support::synthetic_fixture().m;
    std::vector<double> woa, plain;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TrainConfig cfg;
        cfg.hidden_l = 10;
        cfg.pop_size = 10;
        cfg.t_max = 30;
        cfg.seed = seed;
        woa.push_back(train_rmse(woa_elm_train(fx.x, fx.y, cfg).model, fx.x, fx.y));
        plain.push_back(train_rmse(elm_fit(fx.x, fx.y, 10, Activation::sigmoid, seed), fx.x, fx.y));
    }
    std::sort(woa.begin(), woa.end());
    std::sort(plain.begin(), plain.end());
    CHECK(woa[2] <= plain[2]);
}

TEST_CASE("train_model kinds and fusion") {
    const auto& fx = testing_support::synthetic_fixture().m;
    const auto split = split_rows(fx.rows(), 0.7, 3);
    const FeatureMatrix tr = fx.subset(split.train);
    for (const auto& kind : model_kinds()) {
        ModelSpec spec;
        spec.kind = kind;
        spec.train.hidden_l = 10;
        spec.train.pop_size = 5;
        spec.train.t_max = 5;
        spec.baseline.n_trees = 10;
        spec.baseline.gbrt_trees = 20;
        const auto m = train_model(tr, spec);
        CHECK(m.kind == kind);
        CHECK(m.search.has_value() == (kind == "woa-elm"));
        const Eigen::VectorXd p = m.predict(fx.x);
        CHECK(p.allFinite());
        CHECK_THROWS_AS(m.predict(std::vector<double>(12, 0.0)), Error);
    }
    ModelSpec spec;
    spec.kind = "elm";
    spec.train.hidden_l = 10;
    spec.fused = true;
    spec.tsne.iterations = 300;
    const auto m = train_model(tr, spec);
    REQUIRE(m.fusion.has_value());
    CHECK(m.input_dims() == 13);
    CHECK(std::get<ElmModel>(m.model).inputs() == 2);
    CHECK(m.predict(fx.x).allFinite());
    spec.kind = "svm";
    CHECK_THROWS_AS(train_model(tr, spec), Error);
}

TEST_CASE("fused_comparison bookkeeping") {
    const auto& fx = testing_support::synthetic_fixture().m;
    TrainConfig cfg;
    cfg.hidden_l = 10;
    cfg.pop_size = 6;
    cfg.t_max = 10;
    TsneParams tp;
    tp.iterations = 300;
    const auto c = fused_comparison(fx, cfg, 9, tp);
    CHECK(c.n_train == 140);
    CHECK(c.n_test == 60);
    CHECK(c.full.input_dims == 13);
    CHECK(c.fused.input_dims == 2);
    CHECK(c.full.fusion_ms == 0.0);
    CHECK(c.fused.fusion_ms > 0.0);
    CHECK(c.diff_rmse == doctest::Approx(100.0 * (c.full.rmse - c.fused.rmse) / c.full.rmse));
    CHECK(c.diff_test_r2 == doctest::Approx(100.0 * (c.fused.test_r2 - c.full.test_r2) / std::abs(c.full.test_r2)));
    CHECK(c.diff_time == doctest::Approx(100.0 * (c.full.wall_ms - c.fused.wall_ms) / c.full.wall_ms));
}
