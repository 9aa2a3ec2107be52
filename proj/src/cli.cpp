#include "battcap/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "battcap/attribution.hpp"
#include "battcap/correlation.hpp"
#include "battcap/error.hpp"
#include "battcap/format.hpp"
#include "battcap/rng.hpp"

namespace battcap {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

namespace {

void reject_unknown(const Json& j, const std::string& where, std::initializer_list<const char*> known) {
    if (!j.is_object()) throw Error("schema", where + " must be an object");
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw Error("schema", "unknown key '" + key + "' in " + where);
    }
}

template <class T>
void take(const Json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::from_json(const Json& j) {
    try {
        RunConfig c;
        reject_unknown(j, "config", {"seed", "synth", "segment", "tsne", "train", "baseline", "models", "target"});
        take(j, "seed", c.seed);
        if (j.contains("synth")) {
            const auto& s = j.at("synth");
            reject_unknown(s, "synth", {"battery_id", "nominal_capacity_mah", "n_cycles", "q0", "fade_rate",
                                        "fade_power", "plateau_voltage", "noise_sd"});
            take(s, "battery_id", c.synth.battery_id);
            take(s, "nominal_capacity_mah", c.synth.nominal_capacity);
            take(s, "n_cycles", c.synth.n_cycles);
            take(s, "q0", c.synth.q0);
            take(s, "fade_rate", c.synth.fade_rate);
            take(s, "fade_power", c.synth.fade_power);
            take(s, "plateau_voltage", c.synth.plateau_voltage);
            take(s, "noise_sd", c.synth.noise_sd);
        }
        if (j.contains("segment")) {
            const auto& s = j.at("segment");
            reject_unknown(s, "segment", {"alpha", "grid_mv", "smoothing"});
            take(s, "alpha", c.segment.alpha);
            take(s, "grid_mv", c.segment.grid_mv);
            take(s, "smoothing", c.segment.smoothing);
        }
        if (j.contains("tsne")) {
            const auto& s = j.at("tsne");
            reject_unknown(s, "tsne", {"perplexity", "learning_rate", "iterations", "exaggeration",
                                       "exaggeration_iters", "momentum_switch"});
            take(s, "perplexity", c.tsne.perplexity);
            take(s, "learning_rate", c.tsne.learning_rate);
            take(s, "iterations", c.tsne.iterations);
            take(s, "exaggeration", c.tsne.exaggeration);
            take(s, "exaggeration_iters", c.tsne.exaggeration_iters);
            take(s, "momentum_switch", c.tsne.momentum_switch);
            c.tsne.validate();
        }
        auto& t = c.model.train;
        if (j.contains("train")) {
            const auto& s = j.at("train");
            reject_unknown(s, "train", {"kind", "hidden_l", "activation", "split_ratio", "pop_size", "t_max",
                                        "spiral_b", "gate", "fitness", "fused", "fused_dims"});
            take(s, "kind", c.model.kind);
            take(s, "hidden_l", t.hidden_l);
            if (s.contains("activation")) t.activation = parse_activation(s.at("activation").get<std::string>());
            take(s, "split_ratio", t.split_ratio);
            take(s, "pop_size", t.pop_size);
            take(s, "t_max", t.t_max);
            take(s, "spiral_b", t.spiral_b);
            if (s.contains("gate")) {
                const auto g = s.at("gate").get<std::string>();
                if (g == "euclidean") {
                    t.gate = GateNorm::euclidean;
                } else if (g == "componentwise") {
                    t.gate = GateNorm::componentwise;
                } else {
                    throw Error("schema", "gate must be euclidean or componentwise");
                }
            }
            if (s.contains("fitness")) t.fitness = Fitness::parse(s.at("fitness").get<std::string>());
            take(s, "fused", c.model.fused);
            take(s, "fused_dims", c.model.fused_dims);
            t.validate();
        }
        if (j.contains("baseline")) {
            const auto& s = j.at("baseline");
            reject_unknown(s, "baseline", {"k", "max_depth", "min_leaf", "n_trees", "mtry", "bootstrap",
                                           "gbrt_trees", "gbrt_depth", "shrinkage"});
            auto& b = c.model.baseline;
            take(s, "k", b.k);
            take(s, "max_depth", b.tree.max_depth);
            take(s, "min_leaf", b.tree.min_leaf);
            take(s, "n_trees", b.n_trees);
            take(s, "mtry", b.mtry);
            take(s, "bootstrap", b.bootstrap);
            take(s, "gbrt_trees", b.gbrt_trees);
            take(s, "gbrt_depth", b.gbrt_depth);
            take(s, "shrinkage", b.shrinkage);
        }
        take(j, "models", c.compare_models);
        if (j.contains("target")) {
            const auto m = j.at("target").get<std::string>();
            if (m == "raw") {
                c.target = TargetMode::raw;
            } else if (m == "normalized") {
                c.target = TargetMode::normalized;
            } else {
                throw Error("schema", "target must be raw or normalized");
            }
        }
        return c;
    } catch (const Json::exception& e) {
        throw Error("schema", std::string("config: ") + e.what());
    }
}

std::uint64_t resolve_master_seed(const RunConfig& cfg, std::optional<std::uint64_t> flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("RUN_SEED"); env && *env) {
        const std::string s(env);
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(s, &used, 0);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size() || s.front() == '-') throw Error("schema", "RUN_SEED must be a non-negative integer");
        return v;
    }
    return cfg.seed;
}

// ---------------------------------------------------------------- commands

namespace {

struct Context {
    std::ostream& out;
    std::ostream& err;
};

void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw Error("usage", std::string("missing --") + what);
    if (!fs::is_regular_file(path)) throw Error("io", std::string(what) + " file not found: " + path);
}

RunConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    require_file(path, "config");
    return RunConfig::from_json(read_json(path));
}

Dataset load_dataset(const std::string& samples, const std::string& capacity, double nominal) {
    require_file(samples, "samples");
    require_file(capacity, "capacity");
    const auto st = parse_samples(read_text(samples));
    const auto ct = parse_capacity(read_text(capacity));
    return assemble_dataset(st, ct, st.battery_id, nominal);
}

FeatureMatrix load_features(const std::string& path) {
    require_file(path, "features");
    return parse_features_csv(read_text(path));
}

TrainedModel load_model(const std::string& path, SplitInfo* split = nullptr) {
    require_file(path, "model");
    return model_from_json(read_json(path), split);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::span<const double> view(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

struct Split {
    FeatureMatrix train, test;
    SplitDataset rows;
};

Split split_matrix(const FeatureMatrix& m, double ratio, std::uint64_t seed) {
    Split s;
    s.rows = split_rows(m.rows(), ratio, seed);
    s.train = m.subset(s.rows.train);
    s.test = m.subset(s.rows.test);
    return s;
}

std::vector<double> read_input_vector(const Json& j, const std::vector<std::string>& names) {
    const Json* arr = &j;
    if (j.is_object() && j.contains("features")) arr = &j.at("features");
    std::vector<double> v;
    if (arr->is_array()) {
        for (const auto& x : *arr) {
            if (!x.is_number()) throw Error("schema", "input vector must contain numbers only");
            v.push_back(x.get<double>());
        }
    } else if (arr->is_object()) {
        for (const auto& n : names) {
            if (!arr->contains(n)) throw Error("schema", "input is missing feature '" + n + "'");
            v.push_back(arr->at(n).get<double>());
        }
        if (arr->size() != names.size()) throw Error("schema", "input has features the model does not use");
    } else {
        throw Error("schema", "input must be an array, {\"features\": [...]}, or an object keyed by feature name");
    }
    if (v.size() != names.size()) {
        throw Error("schema", "model expects " + std::to_string(names.size()) + " features, input has " +
                                  std::to_string(v.size()));
    }
    return v;
}

void warn_small_training_set(const Context& ctx, std::size_t n_train, const ModelSpec& spec) {
    if ((spec.kind == "elm" || spec.kind == "woa-elm") && n_train <= static_cast<std::size_t>(spec.train.hidden_l)) {
        ctx.err << "warning: " << n_train << " training rows for " << spec.train.hidden_l
                << " hidden nodes; the fit will interpolate\n";
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Context ctx{out, err};
    CLI::App app{"Battery capacity analysis: voltage-segment features, attribution, fusion and WOA-ELM models"};
    app.name("battcap");
    app.require_subcommand(1);

    std::string config_path, samples, capacity, segments_path, features_path, out_path, model_path, input_path;
    std::string out_dir, svg_path, trace_path, models_list, dims_list = "1,2,3", kind, target_mode, rows_mode = "all",
                                                         background_mode = "mean";
    std::optional<std::uint64_t> seed_flag, split_seed_flag;
    std::optional<double> alpha, grid_mv, rho_flag;
    std::optional<int> force_dim;
    double nominal = 170.0;
    bool fused = false;

    auto add_seed = [&](CLI::App* c) {
        c->add_option("--seed", seed_flag, "Master seed (overrides RUN_SEED and the config)");
    };
    auto add_split_seed = [&](CLI::App* c) {
        c->add_option("--split-seed", split_seed_flag, "Seed of the 70/30 row split (default: derived from the master seed)");
    };

    auto* synth = app.add_subcommand("synth", "Generate a synthetic LFP charging dataset");
    synth->add_option("--config", config_path, "Run config JSON");
    synth->add_option("--out-dir", out_dir, "Directory for samples.csv and capacity.csv")->required();
    add_seed(synth);

    auto* segment = app.add_subcommand("segment", "Detect VS1/VS2/VS3 on the reference training curve");
    segment->add_option("--samples", samples, "samples.csv")->required();
    segment->add_option("--capacity", capacity, "capacity.csv")->required();
    segment->add_option("--alpha", alpha, "Plateau threshold as a fraction of the median slope (default 0.5)");
    segment->add_option("--grid-mv", grid_mv, "Boundary snapping grid in mV (default 10)");
    segment->add_option("--nominal", nominal, "Nominal capacity in mAh");
    segment->add_option("--config", config_path, "Run config JSON");
    segment->add_option("--out", out_path, "segments.json")->required();
    add_seed(segment);
    add_split_seed(segment);

    auto* features = app.add_subcommand("features", "Extract F1..F13 per cycle");
    features->add_option("--samples", samples, "samples.csv")->required();
    features->add_option("--capacity", capacity, "capacity.csv")->required();
    features->add_option("--segments", segments_path, "segments.json")->required();
    features->add_option("--nominal", nominal, "Nominal capacity in mAh");
    features->add_option("--target", target_mode, "raw (mAh) or normalized (fraction of nominal)");
    features->add_option("--config", config_path, "Run config JSON");
    features->add_option("--out", out_path, "features.csv")->required();

    auto* correlate = app.add_subcommand("correlate", "Pearson and grey relational analysis against the target");
    correlate->add_option("--features", features_path, "features.csv")->required();
    correlate->add_option("--rho", rho_flag, "GRA distinguishing coefficient in (0, 1] (default 0.5)");
    correlate->add_option("--out", out_path, "correlation.json")->required();

    auto* fuse = app.add_subcommand("fuse", "t-SNE embeddings and KL screening over target dimensions");
    fuse->add_option("--features", features_path, "features.csv")->required();
    fuse->add_option("--dims", dims_list, "Comma-separated dimensions to screen");
    fuse->add_option("--force-dim", force_dim, "Report this dimension as recommended instead of the KL argmin");
    fuse->add_option("--config", config_path, "Run config JSON");
    fuse->add_option("--out", out_path, "fusion.json")->required();
    add_seed(fuse);

    auto* train = app.add_subcommand("train", "Fit a model on the training split");
    train->add_option("--features", features_path, "features.csv")->required();
    train->add_option("--config", config_path, "Run config JSON");
    train->add_option("--model-out", model_path, "model.json")->required();
    train->add_option("--kind", kind, "elm, woa-elm, knn, tree, rf or gbrt (default from config, else woa-elm)");
    train->add_flag("--fused", fused, "Train on the 2-D t-SNE fusion of the features");
    train->add_option("--trace", trace_path, "Write the WOA best-cost history (woa-elm only)");
    add_seed(train);
    add_split_seed(train);

    auto* evaluate = app.add_subcommand("evaluate", "Train and test metrics of a stored model");
    evaluate->add_option("--model", model_path, "model.json")->required();
    evaluate->add_option("--features", features_path, "features.csv")->required();
    evaluate->add_option("--out", out_path, "metrics.json")->required();
    add_split_seed(evaluate);

    auto* compare = app.add_subcommand("compare", "Fit several model kinds and emit Taylor-diagram data");
    compare->add_option("--features", features_path, "features.csv")->required();
    compare->add_option("--models", models_list, "Comma-separated model kinds");
    compare->add_option("--config", config_path, "Run config JSON");
    compare->add_option("--out", out_path, "taylor.json")->required();
    compare->add_option("--svg", svg_path, "taylor.svg");
    add_seed(compare);
    add_split_seed(compare);

    auto* shap = app.add_subcommand("shap", "Exact Shapley values and pairwise interactions of a stored model");
    shap->add_option("--model", model_path, "model.json")->required();
    shap->add_option("--features", features_path, "features.csv")->required();
    shap->add_option("--rows", rows_mode, "Rows to explain: all, train or test")->check(CLI::IsMember({"all", "train", "test"}));
    shap->add_option("--background", background_mode, "Background from training rows: mean or median")
        ->check(CLI::IsMember({"mean", "median"}));
    shap->add_option("--out", out_path, "shap.json")->required();
    add_split_seed(shap);

    auto* predict = app.add_subcommand("predict", "Predict capacity for one feature vector");
    predict->add_option("--model", model_path, "model.json")->required();
    predict->add_option("--input", input_path, "JSON feature vector")->required();

    auto* table1 = app.add_subcommand("table1", "WOA-ELM on full versus fused features");
    table1->add_option("--features", features_path, "features.csv")->required();
    table1->add_option("--config", config_path, "Run config JSON");
    table1->add_option("--out", out_path, "fusion_report.json")->required();
    add_seed(table1);
    add_split_seed(table1);

    std::vector<std::string> argv_store{"battcap"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        for (auto& c : msg) {
            if (c == '\n') c = ' ';
        }
        err << "ERROR usage: " << msg << "\n";
        return 2;
    }

    try {
        const RunConfig cfg = load_config(config_path);
        const std::uint64_t master = resolve_master_seed(cfg, seed_flag);
        const std::uint64_t split_seed = split_seed_flag.value_or(split_seed_for(master));
        const double ratio = cfg.model.train.split_ratio;

        if (synth->parsed()) {
            SynthConfig sc = cfg.synth;
            sc.seed = derive_seed(master, "synth");
            const Dataset ds = synth_dataset(sc);
            write_text(fs::path(out_dir) / "samples.csv", samples_to_csv(ds));
            write_text(fs::path(out_dir) / "capacity.csv", capacity_to_csv(ds));
        } else if (segment->parsed()) {
            const Dataset ds = load_dataset(samples, capacity, nominal);
            SegmentParams sp = cfg.segment;
            if (alpha) sp.alpha = *alpha;
            if (grid_mv) sp.grid_mv = *grid_mv;
            const auto split = split_rows(ds.cycles.size(), ratio, split_seed);
            const auto& ref = ds.cycles[reference_row(split.train)];
            SegmentsFile sf{detect_segments(ref, sp), sp, ref.cycle_index};
            write_text(out_path, dump(segments_to_json(sf)));
        } else if (features->parsed()) {
            const Dataset ds = load_dataset(samples, capacity, nominal);
            require_file(segments_path, "segments");
            const auto sf = segments_from_json(read_json(segments_path));
            TargetMode mode = cfg.target;
            if (target_mode == "raw") {
                mode = TargetMode::raw;
            } else if (target_mode == "normalized") {
                mode = TargetMode::normalized;
            } else if (!target_mode.empty()) {
                throw Error("usage", "--target must be raw or normalized");
            }
            write_text(out_path, features_to_csv(build_matrix(ds, sf.segments, mode)));
        } else if (correlate->parsed()) {
            const auto m = load_features(features_path);
            write_text(out_path, dump(correlation_to_json(correlation_report(m, rho_flag.value_or(kDefaultRho)))));
        } else if (fuse->parsed()) {
            const auto m = load_features(features_path);
            std::vector<int> dims;
            for (const auto& d : split_list(dims_list)) {
                try {
                    dims.push_back(std::stoi(d));
                } catch (const std::exception&) {
                    throw Error("usage", "--dims must be a comma-separated list of integers");
                }
            }
            TsneParams tp = cfg.tsne;
            tp.seed = derive_seed(master, "fuse");
            const Eigen::MatrixXd z = Standardizer::fit(m.x).apply(m.x);
            auto screen = screen_dimensions(z, dims, tp);
            if (force_dim) {
                if (std::find(dims.begin(), dims.end(), *force_dim) == dims.end()) {
                    throw Error("usage", "--force-dim must be one of the screened dimensions");
                }
                screen.recommended_dims = *force_dim;
            }
            write_text(out_path, dump(fusion_to_json(screen)));
        } else if (train->parsed()) {
            const auto m = load_features(features_path);
            ModelSpec spec = cfg.model;
            if (!kind.empty()) spec.kind = kind;
            if (fused) spec.fused = true;
            spec.train.seed = derive_seed(master, "train");
            spec.tsne = cfg.tsne;
            spec.tsne.seed = derive_seed(master, "train-fusion");
            const auto s = split_matrix(m, ratio, split_seed);
            warn_small_training_set(ctx, s.train.rows(), spec);
            const TrainedModel model = train_model(s.train, spec);
            write_text(model_path, dump(model_to_json(model, {split_seed, ratio})));
            if (!trace_path.empty()) {
                if (spec.kind != "woa-elm") throw Error("usage", "--trace needs a woa-elm model");
                const int width = spec.fused ? spec.fused_dims : static_cast<int>(m.cols());
                write_text(trace_path, dump(woa_trace_to_json(spec.train.woa_config(width), *model.search)));
            }
        } else if (evaluate->parsed()) {
            SplitInfo si;
            const auto model = load_model(model_path, &si);
            const auto m = load_features(features_path);
            if (m.feature_names != model.feature_names) throw Error("schema", "features do not match the model");
            const auto s = split_matrix(m, si.ratio, split_seed_flag.value_or(si.seed));
            const Eigen::VectorXd ptr = model.predict(s.train.x);
            const Eigen::VectorXd pte = model.predict(s.test.x);
            const auto mtr = compute_metrics(view(ptr), view(s.train.y));
            const auto mte = compute_metrics(view(pte), view(s.test.y));
            write_text(out_path, dump(metrics_to_json(model.kind, s.train.rows(), s.test.rows(), mtr, mte)));
        } else if (compare->parsed()) {
            const auto m = load_features(features_path);
            const auto kinds = models_list.empty() ? cfg.compare_models : split_list(models_list);
            if (kinds.empty()) throw Error("usage", "no models to compare");
            const auto s = split_matrix(m, ratio, split_seed);
            std::vector<NamedPredictions> preds;
            for (const auto& k : kinds) {
                ModelSpec spec = cfg.model;
                spec.kind = k;
                spec.fused = false;
                spec.train.seed = derive_seed(master, "compare");
                const auto model = train_model(s.train, spec);
                const Eigen::VectorXd p = model.predict(s.test.x);
                preds.push_back({k, std::vector<double>(p.data(), p.data() + p.size())});
            }
            const auto td = taylor_points(preds, view(s.test.y));
            write_text(out_path, dump(taylor_to_json(td)));
            if (!svg_path.empty()) write_text(svg_path, render_taylor_svg(td));
        } else if (shap->parsed()) {
            SplitInfo si;
            const auto model = load_model(model_path, &si);
            const auto m = load_features(features_path);
            if (m.feature_names != model.feature_names) throw Error("schema", "features do not match the model");
            const auto s = split_matrix(m, si.ratio, split_seed_flag.value_or(si.seed));
            const FeatureMatrix& explain = rows_mode == "train" ? s.train : rows_mode == "test" ? s.test : m;
            const Predictor p = [&](std::span<const double> row) { return model.predict(row); };
            const auto bg_mode = background_mode == "median" ? BackgroundMode::median : BackgroundMode::mean;
            const auto summary = shapley_summary(p, explain, s.train, bg_mode);

            // Interactions on the leading features by mean |phi|; any others
            // stay at their background values. Reported as mean |value|.
            const std::size_t k = std::min(m.cols(), kMaxInteractionFeatures);
            std::vector<std::size_t> top;
            for (const auto& name : summary.ranking) {
                if (top.size() == k) break;
                top.push_back(static_cast<std::size_t>(
                    std::find(m.feature_names.begin(), m.feature_names.end(), name) - m.feature_names.begin()));
            }
            std::sort(top.begin(), top.end());
            std::vector<std::string> top_names;
            for (auto t : top) top_names.push_back(m.feature_names[t]);
            std::vector<double> full = summary.background;
            const Predictor sub = [&](std::span<const double> zs) {
                std::vector<double> row = full;
                for (std::size_t a = 0; a < top.size(); ++a) row[top[a]] = zs[a];
                return model.predict(row);
            };
            std::vector<double> bg(top.size()), xs(top.size());
            for (std::size_t a = 0; a < top.size(); ++a) bg[a] = summary.background[top[a]];
            InteractionMatrix acc;
            acc.feature_names = top_names;
            acc.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
            for (std::size_t i = 0; i < explain.rows(); ++i) {
                for (std::size_t a = 0; a < top.size(); ++a) {
                    xs[a] = explain.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(top[a]));
                }
                acc.values += interaction_matrix(sub, xs, bg, top_names).values.cwiseAbs();
            }
            acc.values /= static_cast<double>(explain.rows());
            write_text(out_path, dump(shap_to_json(summary, acc)));
        } else if (predict->parsed()) {
            const auto model = load_model(model_path);
            require_file(input_path, "input");
            const auto v = read_input_vector(read_json(input_path), model.feature_names);
            out << format_number(model.predict(v)) << "\n";
        } else if (table1->parsed()) {
            const auto m = load_features(features_path);
            TrainConfig tc = cfg.model.train;
            tc.seed = derive_seed(master, "table1");
            TsneParams tp = cfg.tsne;
            tp.seed = derive_seed(master, "table1-fusion");
            const auto report = fused_comparison(m, tc, split_seed, tp, cfg.model.fused_dims);
            write_text(out_path, dump(fusion_report_to_json(report)));
        }
        return 0;
    } catch (const Error& e) {
        err << "ERROR " << e.code() << ": " << e.what() << "\n";
        return e.code() == "usage" ? 2 : 1;
    } catch (const fs::filesystem_error& e) {
        err << "ERROR io: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "ERROR internal: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace battcap
