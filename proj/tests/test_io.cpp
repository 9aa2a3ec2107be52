#include <filesystem>

#include "battcap/error.hpp"
#include "battcap/io.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace battcap;

namespace {

Json reparse(const Json& j) { return Json::parse(dump(j)); }

std::string error_code(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

}  // namespace

TEST_CASE("model files predict exactly what the model in memory does") {
    const auto& fx = testing_support::synthetic_fixture().m;
    const auto split = split_rows(fx.rows(), 0.7, 5);
    const FeatureMatrix tr = fx.subset(split.train);
    for (const auto& kind : model_kinds()) {
        for (bool fused : {false, true}) {
            if (fused && kind != "elm" && kind != "knn") continue;
            ModelSpec spec;
            spec.kind = kind;
            spec.fused = fused;
            spec.tsne.iterations = 250;
            spec.train.hidden_l = 12;
            spec.train.pop_size = 5;
            spec.train.t_max = 5;
            spec.baseline.n_trees = 8;
            spec.baseline.gbrt_trees = 15;
            const TrainedModel m = train_model(tr, spec);
            SplitInfo in{1234567890123ULL, 0.65}, out;
            const TrainedModel back = model_from_json(reparse(model_to_json(m, in)), &out);
            CHECK(out.seed == in.seed);
            CHECK(out.ratio == in.ratio);
            CHECK(back.kind == kind);
            CHECK(back.fusion.has_value() == fused);
            CHECK(back.feature_names == m.feature_names);
            const Eigen::VectorXd a = m.predict(fx.x), b = back.predict(fx.x);
            CHECK(a == b);
            // Writing the reloaded model gives the same file.
            CHECK(dump(model_to_json(back, in)) == dump(model_to_json(m, in)));
        }
    }
}

TEST_CASE("model file schema errors") {
    const auto& fx = testing_support::synthetic_fixture().m;
    ModelSpec spec;
    spec.kind = "elm";
    spec.train.hidden_l = 6;
    const Json good = reparse(model_to_json(train_model(fx, spec), {}));

    Json j = good;
    j.erase("elm");
    CHECK(error_code([&] { model_from_json(j); }) == "schema");
    j = good;
    j["elm"]["l"] = 7;
    CHECK(error_code([&] { model_from_json(j); }) == "schema");
    j = good;
    j["feature_names"].erase(0);
    CHECK(error_code([&] { model_from_json(j); }) == "schema");
    j = good;
    j["elm"]["omega"][0].erase(0);
    CHECK(error_code([&] { model_from_json(j); }) == "schema");
    j = good;
    j["kind"] = "svm";
    CHECK(error_code([&] { model_from_json(j); }) != "");
    j = good;
    j["seed"] = "one";
    CHECK(error_code([&] { model_from_json(j); }) == "schema");
}

TEST_CASE("features CSV round trip") {
    const auto& fx = testing_support::synthetic_fixture().m;
    const std::string csv = features_to_csv(fx);
    CHECK(csv.rfind("cycle,F1,F2,F3,F4,F5,F6,F7,F8,F9,F10,F11,F12,F13,target\n", 0) == 0);
    const FeatureMatrix back = parse_features_csv(csv);
    CHECK(back.feature_names == fx.feature_names);
    CHECK(back.cycles == fx.cycles);
    CHECK(((back.x - fx.x).array().abs() <= 1e-11 * fx.x.array().abs().max(1.0)).all());
    CHECK(((back.y - fx.y).array().abs() <= 1e-11 * fx.y.array().abs()).all());
    CHECK(features_to_csv(back) == features_to_csv(parse_features_csv(features_to_csv(back))));

    CHECK(error_code([] { parse_features_csv(""); }) == "parse");
    CHECK(error_code([] { parse_features_csv("cycle,F1\n1,2\n"); }) == "schema");
    CHECK(error_code([] { parse_features_csv("cycle,F1,target\n1,2\n"); }) == "parse");
    CHECK(error_code([] { parse_features_csv("cycle,F1,target\n1,abc,3\n"); }) == "parse");
    CHECK(parse_features_csv("cycle,F1,target\r\n1,2,3\r\n").y(0) == 3.0);
}

TEST_CASE("segments file round trip") {
    SegmentsFile s;
    s.segments = testing_support::synthetic_fixture().seg;
    s.params.alpha = 0.4;
    s.params.grid_mv = 5.0;
    s.reference_cycle = 77;
    const auto back = segments_from_json(reparse(segments_to_json(s)));
    CHECK(back.segments == s.segments);
    CHECK(back.params.alpha == 0.4);
    CHECK(back.params.grid_mv == 5.0);
    CHECK(back.reference_cycle == 77);

    Json bad = segments_to_json(s);
    bad["vs2"] = Json::array({3.3});
    CHECK(error_code([&] { segments_from_json(bad); }) == "schema");
    bad = segments_to_json(s);
    bad.erase("alpha");
    CHECK(error_code([&] { segments_from_json(bad); }) == "schema");
    bad = segments_to_json(s);
    bad["vs1"] = bad["vs3"];
    CHECK_THROWS_AS(segments_from_json(bad), Error);
}

TEST_CASE("text and JSON files") {
    const auto dir = std::filesystem::temp_directory_path() / "battcap_io_test";
    std::filesystem::create_directories(dir);
    write_text(dir / "a.json", "{\"x\": [1, 2]}");
    CHECK(read_json(dir / "a.json")["x"][1] == 2);
    write_text(dir / "b.json", "{\"x\": ");
    CHECK(error_code([&] { read_json(dir / "b.json"); }) == "schema");
    CHECK(error_code([&] { read_text(dir / "missing.txt"); }) == "io");
    CHECK(dump(Json{{"a", 1}}) == "{\n  \"a\": 1\n}\n");
    CHECK(number(0.1 + 0.2).get<double>() == 0.3);
    std::filesystem::remove_all(dir);
}
