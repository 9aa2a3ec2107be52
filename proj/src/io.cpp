#include "battcap/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "battcap/error.hpp"
#include "battcap/format.hpp"

namespace battcap {

namespace fs = std::filesystem;

Json number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return round_significant(v);
}

Json number_array(std::span<const double> v) {
    Json a = Json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

Json number_array(const Eigen::VectorXd& v) {
    return number_array(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

Json number_matrix(const Eigen::MatrixXd& m) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
        a.push_back(std::move(row));
    }
    return a;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + p.string());
    out << text;
    if (!out) throw Error("io", "write failed for " + p.string());
}

Json read_json(const fs::path& p) {
    const std::string text = read_text(p);
    try {
        return Json::parse(text);
    } catch (const Json::exception& e) {
        throw Error("schema", p.string() + ": " + e.what());
    }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

namespace {

// Full-precision variants for model files.
Json exact_array(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Json exact_matrix(const Eigen::MatrixXd& m) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        a.push_back(std::move(row));
    }
    return a;
}

Eigen::VectorXd read_vector(const Json& j) {
    if (!j.is_array()) throw Error("schema", "expected an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw Error("schema", "expected a number");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Eigen::MatrixXd read_matrix(const Json& j) {
    if (!j.is_array() || j.empty()) throw Error("schema", "expected a non-empty array of rows");
    const std::size_t cols = j[0].size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto row = read_vector(j[i]);
        if (static_cast<std::size_t>(row.size()) != cols) throw Error("schema", "ragged matrix");
        m.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return m;
}

Json tree_to_json(const RegressionTree& t) {
    Json nodes = Json::array();
    for (const auto& n : t.nodes()) nodes.push_back(Json::array({n.feature, n.threshold, n.left, n.right, n.value}));
    return nodes;
}

RegressionTree tree_from_json(const Json& j) {
    if (!j.is_array()) throw Error("schema", "tree must be an array of nodes");
    std::vector<RegressionTree::Node> nodes;
    for (const auto& n : j) {
        if (!n.is_array() || n.size() != 5) throw Error("schema", "tree node must be [feature, threshold, left, right, value]");
        nodes.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(), n[4].get<double>()});
    }
    return RegressionTree::from_nodes(std::move(nodes));
}

template <class F>
auto with_schema(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const Json::exception& e) {
        throw Error("schema", what + ": " + e.what());
    }
}

std::string_view trim_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
T parse_field(std::string_view s, std::size_t line, const char* what) {
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw Error("parse", "line " + std::to_string(line) + ": bad " + what + " '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace

// ---------------------------------------------------------------- dataset

Json dataset_to_json(const Dataset& ds) {
    Json j;
    j["battery_id"] = ds.battery_id;
    j["nominal_capacity_mah"] = number(ds.nominal_capacity);
    Json cycles = Json::array();
    for (const auto& c : ds.cycles) {
        Json samples = Json::array();
        for (const auto& s : c.samples) samples.push_back(Json::array({number(s.time_s), number(s.voltage_v)}));
        cycles.push_back({{"cycle", c.cycle_index}, {"samples", std::move(samples)}, {"capacity_mah", number(c.discharge_capacity)}});
    }
    j["cycles"] = std::move(cycles);
    return j;
}

Dataset dataset_from_json(const Json& j) {
    return with_schema("dataset", [&] {
        Dataset ds;
        ds.battery_id = j.at("battery_id").get<std::string>();
        ds.nominal_capacity = j.at("nominal_capacity_mah").get<double>();
        for (const auto& c : j.at("cycles")) {
            CycleRecord r;
            r.cycle_index = c.at("cycle").get<int>();
            r.discharge_capacity = c.at("capacity_mah").get<double>();
            for (const auto& s : c.at("samples")) r.samples.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
            validate_record(r);
            if (!(r.discharge_capacity > 0.0)) {
                throw Error("schema", "cycle " + std::to_string(r.cycle_index) + ": capacity must be positive");
            }
            ds.cycles.push_back(std::move(r));
        }
        return ds;
    });
}

// ---------------------------------------------------------------- segments / features

Json segments_to_json(const SegmentsFile& s) {
    Json j;
    j["vs1"] = Json::array({number(s.segments.vs1.low_v), number(s.segments.vs1.high_v)});
    j["vs2"] = Json::array({number(s.segments.vs2.low_v), number(s.segments.vs2.high_v)});
    j["vs3"] = Json::array({number(s.segments.vs3.low_v), number(s.segments.vs3.high_v)});
    j["alpha"] = number(s.params.alpha);
    j["grid_mv"] = number(s.params.grid_mv);
    j["reference_cycle"] = s.reference_cycle;
    return j;
}

SegmentsFile segments_from_json(const Json& j) {
    return with_schema("segments", [&] {
        SegmentsFile s;
        auto band = [&](const char* key) {
            const auto& b = j.at(key);
            if (!b.is_array() || b.size() != 2) throw Error("schema", std::string(key) + " must be [lo, hi]");
            return VoltageBand{b[0].get<double>(), b[1].get<double>()};
        };
        s.segments = {band("vs1"), band("vs2"), band("vs3")};
        s.segments.validate();
        s.params.alpha = j.at("alpha").get<double>();
        s.params.grid_mv = j.at("grid_mv").get<double>();
        s.reference_cycle = j.at("reference_cycle").get<int>();
        return s;
    });
}

std::string features_to_csv(const FeatureMatrix& m) {
    std::string out = "cycle";
    for (const auto& n : m.feature_names) out += "," + n;
    out += ",target\n";
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out += std::to_string(m.cycles[i]);
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out += "," + format_number(m.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        out += "," + format_number(m.y(static_cast<Eigen::Index>(i))) + "\n";
    }
    return out;
}

FeatureMatrix parse_features_csv(std::string_view text) {
    if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto pos = text.find('\n', start);
        if (pos == std::string_view::npos) pos = text.size();
        const auto line = trim_cr(text.substr(start, pos - start));
        if (!line.empty()) lines.push_back(line);
        start = pos + 1;
    }
    if (lines.empty()) throw Error("parse", "features file is empty");
    const auto header = split_commas(lines[0]);
    if (header.size() < 3 || header.front() != "cycle" || header.back() != "target") {
        throw Error("schema", "features header must be cycle,<features...>,target");
    }
    FeatureMatrix m;
    m.target_name = "target";
    for (std::size_t k = 1; k + 1 < header.size(); ++k) m.feature_names.emplace_back(header[k]);
    const auto rows = static_cast<Eigen::Index>(lines.size() - 1);
    const auto cols = static_cast<Eigen::Index>(m.feature_names.size());
    m.x.resize(rows, cols);
    m.y.resize(rows);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split_commas(lines[i]);
        if (f.size() != header.size()) {
            throw Error("parse", "line " + std::to_string(i + 1) + ": expected " + std::to_string(header.size()) +
                                     " fields, got " + std::to_string(f.size()));
        }
        const auto r = static_cast<Eigen::Index>(i - 1);
        m.cycles.push_back(parse_field<int>(f[0], i + 1, "cycle"));
        for (Eigen::Index j = 0; j < cols; ++j) {
            m.x(r, j) = parse_field<double>(f[static_cast<std::size_t>(j) + 1], i + 1, "number");
        }
        m.y(r) = parse_field<double>(f.back(), i + 1, "target");
    }
    m.validate(1);
    return m;
}

// ---------------------------------------------------------------- reports

Json correlation_to_json(const CorrelationReport& r) {
    Json j;
    Json feats = Json::array();
    for (const auto& f : r.features) {
        feats.push_back({{"name", f.name},
                         {"pcc", f.pcc ? number(*f.pcc) : Json(nullptr)},
                         {"tier", to_string(f.tier)},
                         {"gra", f.gra ? number(*f.gra) : Json(nullptr)}});
    }
    j["features"] = std::move(feats);
    j["ranking_pcc"] = r.ranking_pcc;
    j["ranking_gra"] = r.ranking_gra;
    j["rho"] = number(r.rho);
    return j;
}

Json shap_to_json(const ShapleySummary& s, const InteractionMatrix& interactions) {
    Json j;
    j["base_value"] = number(s.base_value);
    j["feature_names"] = s.feature_names;
    j["background"] = number_array(s.background);
    j["mean_abs_phi"] = number_array(s.mean_abs_phi);
    j["ranking"] = s.ranking;
    Json per = Json::array();
    for (const auto& r : s.per_sample) per.push_back({{"phi", number_array(r.phi)}, {"prediction", number(r.prediction)}});
    j["per_sample"] = std::move(per);
    j["interaction_features"] = interactions.feature_names;
    j["interactions"] = number_matrix(interactions.values);
    return j;
}

Json fusion_to_json(const DimensionScreen& s) {
    Json j;
    Json dims = Json::array();
    for (const auto& e : s.entries) dims.push_back({{"d", e.dims}, {"final_kl", number(e.final_kl)}, {"y", number_matrix(e.y)}});
    j["dims"] = std::move(dims);
    j["recommended_d"] = s.recommended_dims;
    j["params"] = {{"perplexity", number(s.params.perplexity)},
                   {"learning_rate", number(s.params.learning_rate)},
                   {"iterations", s.params.iterations},
                   {"exaggeration", number(s.params.exaggeration)},
                   {"exaggeration_iters", s.params.exaggeration_iters},
                   {"seed", s.params.seed}};
    return j;
}

Json metrics_to_json(const std::string& model, std::size_t n_train, std::size_t n_test, const Metrics& train,
                     const Metrics& test) {
    Json j;
    j["model"] = model;
    j["n_train"] = n_train;
    j["n_test"] = n_test;
    j["train"] = {{"rmse", number(train.rmse)}, {"r2", number(train.r2)}};
    j["test"] = {{"rmse", number(test.rmse)},
                 {"r2", number(test.r2)},
                 {"sd_pred", number(test.sd_pred)},
                 {"sd_actual", number(test.sd_actual)},
                 {"pearson_r", number(test.pearson_r)}};
    return j;
}

Json taylor_to_json(const TaylorData& t) {
    Json j;
    j["ref"] = {{"sd_actual", number(t.sd_actual)}};
    Json pts = Json::array();
    for (const auto& p : t.points) {
        pts.push_back({{"name", p.name},
                       {"sd_pred", number(p.sd_pred)},
                       {"pearson_r", number(p.pearson_r)},
                       {"centered_rmse", number(p.centered_rmse)},
                       {"degenerate", p.degenerate}});
    }
    j["points"] = std::move(pts);
    return j;
}

Json fusion_report_to_json(const FusionComparison& c) {
    auto arm = [](const ArmResult& a) {
        return Json{{"rmse", number(a.rmse)},
                    {"train_r2", number(a.train_r2)},
                    {"test_r2", number(a.test_r2)},
                    {"time_ms", number(a.wall_ms)},
                    {"input_dims", a.input_dims}};
    };
    Json j;
    j["rows"] = Json::array({"RMSE", "Training Data R2", "Test Data R2", "Time(mS)"});
    j["before_fusion"] = arm(c.full);
    j["after_fusion"] = arm(c.fused);
    j["after_fusion"]["fusion_ms"] = number(c.fused.fusion_ms);
    j["diff_percent"] = {{"rmse", number(c.diff_rmse)},
                         {"train_r2", number(c.diff_train_r2)},
                         {"test_r2", number(c.diff_test_r2)},
                         {"time_ms", number(c.diff_time)}};
    j["n_train"] = c.n_train;
    j["n_test"] = c.n_test;
    j["split_seed"] = c.split_seed;
    return j;
}

Json woa_trace_to_json(const WoaConfig& cfg, const WoaResult& r) {
    Json j;
    j["config"] = {{"dim", cfg.dim},
                   {"pop_size", cfg.pop_size},
                   {"t_max", cfg.t_max},
                   {"spiral_b", number(cfg.spiral_b)},
                   {"seed", cfg.seed},
                   {"gate", cfg.gate == GateNorm::euclidean ? "euclidean" : "componentwise"}};
    j["history"] = number_array(r.history);
    j["best_position"] = number_array(r.best_position);
    j["best_cost"] = number(r.best_cost);
    j["evaluations"] = r.evaluations;
    return j;
}

// ---------------------------------------------------------------- models

Json model_to_json(const TrainedModel& m, const SplitInfo& split) {
    Json j;
    j["kind"] = m.kind;
    j["seed"] = m.seed;
    j["split"] = {{"seed", split.seed}, {"ratio", split.ratio}};
    j["feature_names"] = m.feature_names;
    if (const auto* e = std::get_if<ElmModel>(&m.model)) {
        j["norm"] = {{"means", exact_array(e->norm.inputs.means)},
                     {"sds", exact_array(e->norm.inputs.sds)},
                     {"tmin", e->norm.tmin},
                     {"tmax", e->norm.tmax}};
        j["elm"] = {{"l", e->hidden()},
                    {"activation", to_string(e->activation)},
                    {"omega", exact_matrix(e->omega)},
                    {"b", exact_array(e->b)},
                    {"beta", exact_array(e->beta)}};
    } else {
        const auto& b = std::get<BaselineModel>(m.model);
        Json s;
        switch (b.kind) {
            case BaselineKind::knn: {
                const auto& st = std::get<KnnState>(b.state);
                s = {{"k", b.params.k},
                     {"means", exact_array(st.scale.means)},
                     {"sds", exact_array(st.scale.sds)},
                     {"train_z", exact_matrix(st.train_z)},
                     {"train_y", exact_array(st.train_y)}};
                break;
            }
            case BaselineKind::tree:
                s = {{"max_depth", b.params.tree.max_depth},
                     {"min_leaf", b.params.tree.min_leaf},
                     {"nodes", tree_to_json(std::get<RegressionTree>(b.state))}};
                break;
            case BaselineKind::forest: {
                Json trees = Json::array();
                for (const auto& t : std::get<ForestState>(b.state).trees) trees.push_back(tree_to_json(t));
                s = {{"n_trees", b.params.n_trees},
                     {"mtry", b.params.mtry},
                     {"bootstrap", b.params.bootstrap},
                     {"max_depth", b.params.tree.max_depth},
                     {"min_leaf", b.params.tree.min_leaf},
                     {"trees", std::move(trees)}};
                break;
            }
            case BaselineKind::gbrt: {
                const auto& st = std::get<GbrtState>(b.state);
                Json trees = Json::array();
                for (const auto& t : st.trees) trees.push_back(tree_to_json(t));
                s = {{"init", st.init},
                     {"shrinkage", b.params.shrinkage},
                     {"depth", b.params.gbrt_depth},
                     {"trees", std::move(trees)},
                     {"train_mse", number_array(st.train_mse)}};
                break;
            }
        }
        j[to_string(b.kind)] = std::move(s);
    }
    if (m.fusion) {
        const auto& f = *m.fusion;
        j["fusion"] = {{"dims", f.dims()},
                       {"means", exact_array(f.scale.means)},
                       {"sds", exact_array(f.scale.sds)},
                       {"neighbors", f.embedder.neighbors()},
                       {"final_kl", f.final_kl},
                       {"train_z", exact_matrix(f.embedder.train_x())},
                       {"embedding", exact_matrix(f.embedder.train_y())}};
    }
    return j;
}

TrainedModel model_from_json(const Json& j, SplitInfo* split) {
    return with_schema("model", [&] {
        TrainedModel m;
        m.kind = j.at("kind").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        if (split) {
            split->seed = j.at("split").at("seed").get<std::uint64_t>();
            split->ratio = j.at("split").at("ratio").get<double>();
        }
        std::size_t model_inputs = m.feature_names.size();
        if (j.contains("fusion")) {
            const auto& f = j.at("fusion");
            FeatureFusion fusion;
            fusion.scale.means = read_vector(f.at("means"));
            fusion.scale.sds = read_vector(f.at("sds"));
            fusion.final_kl = f.at("final_kl").get<double>();
            fusion.embedder = OutOfSampleEmbedder(read_matrix(f.at("train_z")), read_matrix(f.at("embedding")),
                                                  f.at("neighbors").get<int>());
            if (static_cast<std::size_t>(fusion.scale.means.size()) != m.feature_names.size() ||
                fusion.scale.sds.size() != fusion.scale.means.size() ||
                static_cast<std::size_t>(fusion.embedder.train_x().cols()) != m.feature_names.size() ||
                fusion.dims() != f.at("dims").get<int>()) {
                throw Error("schema", "fusion section dimensions are inconsistent");
            }
            model_inputs = static_cast<std::size_t>(fusion.dims());
            m.fusion = std::move(fusion);
        }

        if (m.kind == "elm" || m.kind == "woa-elm") {
            ElmModel e;
            const auto& n = j.at("norm");
            e.norm.inputs.means = read_vector(n.at("means"));
            e.norm.inputs.sds = read_vector(n.at("sds"));
            e.norm.tmin = n.at("tmin").get<double>();
            e.norm.tmax = n.at("tmax").get<double>();
            const auto& s = j.at("elm");
            e.activation = parse_activation(s.at("activation").get<std::string>());
            e.omega = read_matrix(s.at("omega"));
            e.b = read_vector(s.at("b"));
            e.beta = read_vector(s.at("beta"));
            e.validate();
            if (e.hidden() != s.at("l").get<int>()) throw Error("schema", "elm.l does not match omega");
            if (static_cast<std::size_t>(e.inputs()) != model_inputs) {
                throw Error("schema", "ELM input width does not match the feature list");
            }
            m.model = std::move(e);
            return m;
        }

        BaselineModel b;
        b.kind = parse_baseline_kind(m.kind);
        const auto& s = j.at(to_string(b.kind));
        switch (b.kind) {
            case BaselineKind::knn: {
                KnnState st;
                b.params.k = s.at("k").get<int>();
                st.scale.means = read_vector(s.at("means"));
                st.scale.sds = read_vector(s.at("sds"));
                st.train_z = read_matrix(s.at("train_z"));
                st.train_y = read_vector(s.at("train_y"));
                if (st.train_z.rows() != st.train_y.size() || b.params.k < 1 || b.params.k > st.train_z.rows() ||
                    static_cast<std::size_t>(st.train_z.cols()) != model_inputs) {
                    throw Error("schema", "knn section is inconsistent");
                }
                b.state = std::move(st);
                break;
            }
            case BaselineKind::tree:
                b.params.tree.max_depth = s.at("max_depth").get<int>();
                b.params.tree.min_leaf = s.at("min_leaf").get<int>();
                b.state = tree_from_json(s.at("nodes"));
                break;
            case BaselineKind::forest: {
                ForestState st;
                b.params.n_trees = s.at("n_trees").get<int>();
                b.params.mtry = s.at("mtry").get<int>();
                b.params.bootstrap = s.at("bootstrap").get<bool>();
                b.params.tree.max_depth = s.at("max_depth").get<int>();
                b.params.tree.min_leaf = s.at("min_leaf").get<int>();
                for (const auto& t : s.at("trees")) st.trees.push_back(tree_from_json(t));
                if (st.trees.empty()) throw Error("schema", "forest has no trees");
                b.state = std::move(st);
                break;
            }
            case BaselineKind::gbrt: {
                GbrtState st;
                st.init = s.at("init").get<double>();
                b.params.shrinkage = s.at("shrinkage").get<double>();
                b.params.gbrt_depth = s.at("depth").get<int>();
                for (const auto& t : s.at("trees")) st.trees.push_back(tree_from_json(t));
                const auto mse = read_vector(s.at("train_mse"));
                st.train_mse.assign(mse.data(), mse.data() + mse.size());
                b.state = std::move(st);
                break;
            }
        }
        m.model = std::move(b);
        return m;
    });
}

}  // namespace battcap
