// One line per acceptance criterion; nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "battcap/attribution.hpp"
#include "battcap/cli.hpp"
#include "battcap/correlation.hpp"
#include "battcap/features.hpp"
#include "battcap/fusion.hpp"
#include "battcap/io.hpp"
#include "battcap/pipeline.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace battcap;
namespace fs = std::filesystem;
using testing_support::random_matrix;
using testing_support::random_series;

namespace {

struct Failed {
    std::string why;
};

void expect(bool ok, const std::string& why) {
    if (!ok) throw Failed{why};
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::span<const double> view(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::size_t rank_of(const std::vector<std::string>& ranking, const std::string& name) {
    return static_cast<std::size_t>(std::find(ranking.begin(), ranking.end(), name) - ranking.begin());
}

// The dataset `synth` writes for master seed 1, segmented and featurized the
// way the CLI does it.
const FeatureMatrix& shipped_features() {
    static const FeatureMatrix m = [] {
        SynthConfig sc;
        sc.seed = derive_seed(1, "synth");
        const Dataset ds = synth_dataset(sc);
        const auto split = split_rows(ds.cycles.size(), 0.7, split_seed_for(1));
        const auto seg = detect_segments(ds.cycles[reference_row(split.train)]);
        return build_matrix(ds, seg, TargetMode::raw);
    }();
    return m;
}

struct Split {
    FeatureMatrix train, test;
};

Split split_for(std::uint64_t master) {
    const auto& m = shipped_features();
    const auto s = split_rows(m.rows(), 0.7, split_seed_for(master));
    return {m.subset(s.train), m.subset(s.test)};
}

TrainedModel train_for(const Split& s, std::uint64_t master, const std::string& kind) {
    ModelSpec spec;
    spec.kind = kind;
    spec.train.seed = derive_seed(master, "train");
    return train_model(s.train, spec);
}

// ---------------------------------------------------------------- criteria

std::string metric_identities() {
    Rng gen(101);
    double worst_cos = 0.0, worst_id = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 5 + gen.below(200);
        const auto y = random_series(gen, n, 100, 170);
        std::vector<NamedPredictions> models;
        for (int k = 0; k < 4; ++k) {
            auto p = y;
            const double noise = gen.uniform(0.0, 20.0), bias = gen.uniform(-5, 5);
            for (auto& v : p) v = (k == 3 ? 0.5 * v : v) + bias + gen.uniform(-noise, noise);
            models.push_back({"m" + std::to_string(k), p});
        }
        const auto td = taylor_points(models, y);
        for (const auto& pt : td.points) {
            expect(!pt.degenerate, "unexpected degenerate point");
            const double law = pt.sd_pred * pt.sd_pred + td.sd_actual * td.sd_actual -
                               2.0 * pt.sd_pred * td.sd_actual * pt.pearson_r;
            worst_cos = std::max(worst_cos, std::abs(pt.centered_rmse * pt.centered_rmse - law) / std::max(1.0, law));
        }
        const auto& p = models[0].predictions;
        const double sd = standard_deviation(y), e = rmse(p, y);
        worst_id = std::max(worst_id, std::abs(r_squared(p, y) - (1.0 - e * e / (sd * sd))));
    }
    expect(worst_cos < 1e-9, "law of cosines off by " + fmt(worst_cos));
    expect(worst_id < 1e-9, "r2/rmse/sd identity off by " + fmt(worst_id));
    return "max residuals " + fmt(worst_cos) + ", " + fmt(worst_id);
}

std::string least_squares_oracle() {
    Rng gen(202);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 20 + static_cast<Eigen::Index>(gen.below(80));
        const Eigen::Index l = 2 + static_cast<Eigen::Index>(gen.below(15));
        Eigen::MatrixXd h = random_matrix(gen, n, l);
        h.topRows(l) += 3.0 * Eigen::MatrixXd::Identity(l, l);
        const Eigen::MatrixXd t = random_matrix(gen, n, 1, -5, 5);
        worst = std::max(worst, (elm_solve_beta(h, t) - testing_support::normal_equations(h, t)).cwiseAbs().maxCoeff());
    }
    expect(worst < 1e-6, "well-conditioned beta differs by " + fmt(worst));

    // Duplicated column: the minimum-norm solution splits the reduced
    // system's coefficient evenly between the two copies.
    Eigen::MatrixXd base = random_matrix(gen, 30, 5);
    base.topRows(5) += 3.0 * Eigen::MatrixXd::Identity(5, 5);
    Eigen::MatrixXd h(30, 6);
    h << base, base.col(2);
    const Eigen::MatrixXd t = random_matrix(gen, 30, 1);
    const Eigen::MatrixXd reduced = testing_support::normal_equations(base, t);
    Eigen::VectorXd expect_beta(6);
    expect_beta << reduced.col(0), 0.0;
    expect_beta(2) = expect_beta(5) = 0.5 * reduced(2, 0);
    const double dev = (elm_solve_beta(h, t).col(0) - expect_beta).cwiseAbs().maxCoeff();
    expect(dev < 1e-6, "rank-deficient beta is not minimum norm (" + fmt(dev) + ")");
    return "max deviation " + fmt(worst) + ", rank-deficient " + fmt(dev);
}

std::string shapley_exactness() {
    Rng gen(303);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 1 + gen.below(6);
        const testing_support::RandomModel model(gen, m);
        const auto x = random_series(gen, m), bg = random_series(gen, m);
        const auto r = shapley_exact(model, x, bg);
        const auto oracle = testing_support::permutation_shapley(model, x, bg);
        for (std::size_t j = 0; j < m; ++j) worst = std::max(worst, std::abs(r.phi[j] - oracle[j]));
    }
    expect(worst < 1e-12, "permutation brute force differs by " + fmt(worst));

    const auto& fx = testing_support::synthetic_fixture().m;
    const ElmModel elm = elm_fit(fx.x, fx.y, 40, Activation::sigmoid, 7);
    const Predictor p = [&](std::span<const double> row) { return elm.predict(row); };
    const auto bg = background_vector(fx, BackgroundMode::mean);
    const auto t0 = std::chrono::steady_clock::now();
    double local = 0.0;
    for (Eigen::Index i = 0; i < 100; ++i) {
        std::vector<double> x(13);
        for (Eigen::Index j = 0; j < 13; ++j) x[static_cast<std::size_t>(j)] = fx.x(i, j);
        const auto r = shapley_exact(p, x, bg);
        double s = r.base_value;
        for (double v : r.phi) s += v;
        local = std::max(local, std::abs(s - p(x)));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    expect(local < 1e-9, "local accuracy off by " + fmt(local));
    expect(secs < 60.0, "100 rows took " + fmt(secs) + " s");
    return "brute force " + fmt(worst) + ", local accuracy " + fmt(local) + ", 100 rows in " + fmt(secs) + " s";
}

std::string tsne_analytics() {
    Rng gen(404);
    double worst_perp = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 10 + gen.below(190);
        const auto row = random_series(gen, n, 0.0, gen.uniform(0.1, 50.0));
        const double target = gen.uniform(2.0, static_cast<double>(n - 1) / 3.0);
        const auto c = calibrate_sigma(row, target);
        worst_perp = std::max(worst_perp, std::abs(row_perplexity(c.conditional) - target));
    }
    const Eigen::MatrixXd x = random_matrix(gen, 6, 5);
    const auto aff = joint_affinities(x, 2.0);
    for (double s : aff.sigmas) {
        expect(s > 0.0, "non-positive sigma");
    }
    const Eigen::MatrixXd& p = aff.p;
    Eigen::MatrixXd y = random_matrix(gen, 6, 2);
    const Eigen::MatrixXd grad = tsne_gradient(p, student_t_affinities(y), y);
    double worst_grad = 0.0;
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < 6; ++i) {
        for (Eigen::Index k = 0; k < 2; ++k) {
            Eigen::MatrixXd yp = y, ym = y;
            yp(i, k) += h;
            ym(i, k) -= h;
            const double fd = (kl_divergence(p, student_t_affinities(yp)) - kl_divergence(p, student_t_affinities(ym))) / (2 * h);
            worst_grad = std::max(worst_grad, std::abs(grad(i, k) - fd) / std::max(std::abs(fd), 1e-12));
        }
    }
    const double kl = kl_divergence(p, student_t_affinities(y));
    expect(worst_perp < 1e-3, "perplexity off by " + fmt(worst_perp));
    expect(worst_grad < 1e-4, "gradient relative error " + fmt(worst_grad));
    expect(kl >= 0.0, "negative KL");
    expect(kl_divergence(p, p) == 0.0, "KL(P||P) != 0");
    return "perplexity " + fmt(worst_perp) + ", gradient " + fmt(worst_grad) + ", KL " + fmt(kl);
}

std::string woa_convergence() {
    const Objective sphere = [](std::span<const double> z) {
        double s = 0.0;
        for (double v : z) s += v * v;
        return s;
    };
    int solved = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        WoaConfig cfg = WoaConfig::box(10, -10, 10);
        cfg.seed = seed;
        const auto r = woa_optimize(sphere, cfg);
        for (std::size_t t = 1; t < r.history.size(); ++t) {
            expect(r.history[t] <= r.history[t - 1], "history increases for seed " + std::to_string(seed));
        }
        solved += r.best_cost < 1e-5;
        worst = std::max(worst, r.best_cost);
    }
    expect(solved >= 8, std::to_string(solved) + "/10 seeds below 1e-5");
    return std::to_string(solved) + "/10 seeds below 1e-5, worst " + fmt(worst);
}

std::string woa_elm_superiority() {
    std::vector<double> woa_rmse, elm_rmse, woa_r2;
    for (std::uint64_t master = 1; master <= 10; ++master) {
        const Split s = split_for(master);
        for (const char* kind : {"woa-elm", "elm"}) {
            const Eigen::VectorXd p = train_for(s, master, kind).predict(s.test.x);
            (std::string(kind) == "elm" ? elm_rmse : woa_rmse).push_back(rmse(view(p), view(s.test.y)));
            if (std::string(kind) == "woa-elm") woa_r2.push_back(r_squared(view(p), view(s.test.y)));
        }
    }
    const double mw = median(woa_rmse), me = median(elm_rmse);
    const double min_r2 = *std::min_element(woa_r2.begin(), woa_r2.end());
    expect(mw <= me, "median test RMSE WOA-ELM " + fmt(mw) + " > ELM " + fmt(me));
    expect(min_r2 >= 0.99, "WOA-ELM test R2 fell to " + fmt(min_r2));
    return "median test RMSE WOA-ELM " + fmt(mw) + " vs ELM " + fmt(me) + ", min WOA-ELM R2 " + fmt(min_r2);
}

std::string feature_sanity() {
    const auto& m = shipped_features();
    const auto corr = correlation_report(m);
    const Split s = split_for(1);
    const TrainedModel model = train_for(s, 1, "woa-elm");
    const Predictor p = [&](std::span<const double> row) { return model.predict(row); };
    const auto shap = shapley_summary(p, m, s.train);
    const auto a = rank_of(corr.ranking_pcc, "F8"), b = rank_of(corr.ranking_gra, "F8"), c = rank_of(shap.ranking, "F8");
    const std::string ranks = "F8 rank PCC " + std::to_string(a + 1) + ", GRA " + std::to_string(b + 1) + ", SHAP " +
                              std::to_string(c + 1);
    expect(a < 3 && b < 3 && c < 3, ranks);
    return ranks;
}

std::string table1_property() {
    TrainConfig cfg;
    cfg.seed = derive_seed(1, "table1");
    TsneParams tp;
    tp.seed = derive_seed(1, "table1-fusion");
    const auto r = fused_comparison(shipped_features(), cfg, split_seed_for(1), tp);
    const std::string detail = "fit " + fmt(r.full.wall_ms) + " ms -> " + fmt(r.fused.wall_ms) + " ms, test R2 " +
                               fmt(r.full.test_r2) + " -> " + fmt(r.fused.test_r2);
    expect(r.fused.wall_ms < r.full.wall_ms, "fused fit not faster: " + detail);
    expect(std::abs(r.fused.test_r2 - r.full.test_r2) <= 0.05, "test R2 gap too large: " + detail);
    return detail;
}

// Runs every command once into `dir` with master seed 1.
void run_pipeline(const fs::path& dir) {
    fs::create_directories(dir);
    auto f = [&](const char* name) { return (dir / name).string(); };
    const std::vector<std::vector<std::string>> steps{
        {"synth", "--out-dir", dir.string()},
        {"segment", "--samples", f("samples.csv"), "--capacity", f("capacity.csv"), "--out", f("segments.json")},
        {"features", "--samples", f("samples.csv"), "--capacity", f("capacity.csv"), "--segments",
         f("segments.json"), "--out", f("features.csv")},
        {"correlate", "--features", f("features.csv"), "--out", f("correlation.json")},
        {"fuse", "--features", f("features.csv"), "--out", f("fusion.json")},
        {"train", "--features", f("features.csv"), "--model-out", f("model.json"), "--trace", f("woa_trace.json")},
        {"evaluate", "--model", f("model.json"), "--features", f("features.csv"), "--out", f("metrics.json")},
        {"compare", "--features", f("features.csv"), "--out", f("taylor.json"), "--svg", f("taylor.svg")},
        {"shap", "--model", f("model.json"), "--features", f("features.csv"), "--out", f("shap.json")},
        {"table1", "--features", f("features.csv"), "--out", f("fusion_report.json")},
    };
    const std::vector<std::string> seeded{"synth", "segment", "fuse", "train", "compare", "table1"};
    for (auto args : steps) {
        if (std::find(seeded.begin(), seeded.end(), args[0]) != seeded.end()) args.insert(args.end(), {"--seed", "1"});
        std::ostringstream out, err;
        if (run_cli(args, out, err) != 0) throw Failed{args[0] + " failed: " + err.str()};
    }
}

// Wall times differ between runs by nature; everything else must not.
std::string without_timings(const fs::path& p) {
    Json j = read_json(p);
    j["before_fusion"].erase("time_ms");
    j["after_fusion"].erase("time_ms");
    j["after_fusion"].erase("fusion_ms");
    j["diff_percent"].erase("time_ms");
    return dump(j);
}

const fs::path kRunDir = fs::temp_directory_path() / "battcap_acceptance";

std::string determinism() {
    fs::remove_all(kRunDir);
    run_pipeline(kRunDir / "a");
    run_pipeline(kRunDir / "b");
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(kRunDir / "a")) {
        const auto name = entry.path().filename().string();
        const fs::path other = kRunDir / "b" / name;
        expect(fs::exists(other), name + " missing from the second run");
        const bool same = name == "fusion_report.json" ? without_timings(entry.path()) == without_timings(other)
                                                       : read_text(entry.path()) == read_text(other);
        expect(same, name + " differs between runs");
        compared += entry.path().extension() == ".json";
    }
    expect(compared == 9, "expected 9 JSON artifacts, found " + std::to_string(compared) + " JSON artifacts");
    return std::to_string(compared) + " JSON artifacts identical (timings excluded from fusion_report.json)";
}

std::string predict_latency() {
    const fs::path model = kRunDir / "a" / "model.json";
    const auto m = parse_features_csv(read_text(kRunDir / "a" / "features.csv"));
    std::vector<double> row(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) row[j] = m.x(0, static_cast<Eigen::Index>(j));
    write_text(kRunDir / "input.json", Json(row).dump());
    std::ostringstream out, err;
    const auto t0 = std::chrono::steady_clock::now();
    const int code = run_cli({"predict", "--model", model.string(), "--input", (kRunDir / "input.json").string()}, out, err);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    expect(code == 0, "predict failed: " + err.str());
    expect(secs < 3.0, "predict took " + fmt(secs) + " s");

    // The recorded model and input reproduce the recorded prediction.
    std::ostringstream gout, gerr;
    const std::string dir = FIXTURE_DIR;
    expect(run_cli({"predict", "--model", dir + "/golden_model.json", "--input", dir + "/golden_input.json"}, gout,
                   gerr) == 0,
           "golden predict failed: " + gerr.str());
    expect(gout.str() == read_text(dir + "/golden_prediction.txt"), "golden prediction changed: " + gout.str());
    return "predicted " + out.str().substr(0, out.str().size() - 1) + " in " + fmt(secs) + " s";
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0 means no stated limit
    std::function<std::string()> run;
};

}  // namespace

int main() {
    ::unsetenv("RUN_SEED");
    const std::vector<Criterion> criteria{
        {1, "metric identities", 1.0, metric_identities},
        {2, "least-squares oracle", 1.0, least_squares_oracle},
        {3, "Shapley exactness", 60.0, shapley_exactness},
        {4, "t-SNE analytics", 10.0, tsne_analytics},
        {5, "WOA convergence", 30.0, woa_convergence},
        {6, "WOA-ELM versus ELM", 300.0, woa_elm_superiority},
        {7, "feature analysis sanity", 120.0, feature_sanity},
        {8, "fusion table property", 300.0, table1_property},
        {9, "determinism", 0.0, determinism},
        {10, "predict latency", 0.0, predict_latency},
    };
    // Build the shared feature matrix outside any one criterion's clock.
    shipped_features();
    (void)testing_support::synthetic_fixture();

    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        try {
            detail = c.run();
        } catch (const Failed& f) {
            ok = false;
            detail = f.why;
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (ok && c.budget_s > 0.0 && secs >= c.budget_s) {
            ok = false;
            detail += "; over the " + fmt(c.budget_s) + " s budget";
        }
        failures += !ok;
        std::printf("%s criterion %d: %s (%s) [%.2f s]\n", ok ? "PASS" : "FAIL", c.id, c.name, detail.c_str(), secs);
        std::fflush(stdout);
    }
    fs::remove_all(kRunDir);
    return failures == 0 ? 0 : 1;
}
