#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "battcap/data.hpp"
#include "battcap/error.hpp"
#include "battcap/io.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace battcap;

namespace {

std::string samples_csv(const std::vector<int>& cycles, int rows_per_cycle) {
    std::string s = "battery_id,cycle,time_s,voltage_v\n";
    for (int c : cycles) {
        for (int i = 0; i < rows_per_cycle; ++i) {
            s += "B1," + std::to_string(c) + "," + std::to_string(i * 10) + "," + std::to_string(3.0 + 0.01 * i) + "\n";
        }
    }
    return s;
}

std::string error_message(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code() + ": " + e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("parse_samples groups rows by cycle") {
    const auto t = parse_samples(samples_csv({1, 2}, 11));
    CHECK(t.battery_id == "B1");
    REQUIRE(t.records.size() == 2);
    CHECK(t.records[0].samples.size() == 11);
    CHECK(t.records[1].samples.size() == 11);
    CHECK(t.records[1].cycle_index == 2);
    CHECK(t.records[0].samples[3].voltage_v == doctest::Approx(3.03));
}

TEST_CASE("parse_samples reports backwards time with the cycle") {
    std::string csv = samples_csv({1, 2, 3}, 11);
    // Swap the time of the last row of cycle 3 for an earlier one.
    const auto pos = csv.rfind("B1,3,100,");
    csv.replace(pos, 9, "B1,3,5,");
    const std::string msg = error_message([&] { parse_samples(csv); });
    CHECK(msg.find("cycle 3") != std::string::npos);
}

TEST_CASE("parse_samples edge cases") {
    CHECK(parse_samples("battery_id,cycle,time_s,voltage_v\n").records.empty());
    CHECK(parse_samples("\xEF\xBB\xBF" "battery_id,cycle,time_s,voltage_v\r\n").records.empty());

    std::string crlf = samples_csv({4}, 10);
    for (std::size_t p = crlf.find('\n'); p != std::string::npos; p = crlf.find('\n', p + 2)) crlf.insert(p, "\r");
    CHECK(parse_samples(crlf).records.at(0).samples.size() == 10);

    CHECK(error_message([] { parse_samples(samples_csv({1}, 9)); }).find("cycle 1") != std::string::npos);
    CHECK(error_message([] { parse_samples("battery_id,cycle,time\n"); }).rfind("parse", 0) == 0);
    const std::string bad = "battery_id,cycle,time_s,voltage_v\nB1,1,0,3.0\nB1,1,x,3.1\n";
    CHECK(error_message([&] { parse_samples(bad); }).find("line 3") != std::string::npos);
    CHECK_THROWS_AS(parse_samples("battery_id,cycle,time_s,voltage_v\nB1,1,0\n"), Error);

    // A 4 mV dip is sensor ripple, a 6 mV dip is not.
    std::string ripple = samples_csv({1}, 12);
    ripple += "B1,1,120,3.106\n";
    CHECK_NOTHROW(parse_samples(ripple));
    std::string drop = samples_csv({1}, 12);
    drop += "B1,1,120,3.104\n";
    CHECK_THROWS_AS(parse_samples(drop), Error);
}

TEST_CASE("parse_capacity") {
    const std::string head = "battery_id,cycle,discharge_capacity_mah\n";
    CHECK(parse_capacity(head + "B1,1,160\nB1,2,159.5\nB1,3,159\n").capacity_mah.size() == 3);
    CHECK(error_message([&] { parse_capacity(head + "B1,5,160\nB1,5,159\n"); }).find("duplicate cycle 5") !=
          std::string::npos);
    CHECK_THROWS_AS(parse_capacity(head + "B1,1,0\n"), Error);
    CHECK_THROWS_AS(parse_capacity(head + "B1,1,-3\n"), Error);
}

TEST_CASE("assemble_dataset") {
    const std::string head = "battery_id,cycle,discharge_capacity_mah\n";
    const auto samples = parse_samples(samples_csv({5, 3, 1, 4, 2}, 10));
    const auto caps = parse_capacity(head + "B1,1,5\nB1,2,4\nB1,3,3\nB1,4,2\nB1,5,1\n");
    const Dataset ds = assemble_dataset(samples, caps, "B1", 170.0);
    REQUIRE(ds.cycles.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(ds.cycles[i].cycle_index == static_cast<int>(i) + 1);
        CHECK(ds.cycles[i].discharge_capacity == doctest::Approx(5.0 - static_cast<double>(i)));
    }

    const auto four = parse_capacity(head + "B1,1,5\nB1,2,4\nB1,3,3\nB1,5,1\n");
    const std::string msg = error_message([&] { assemble_dataset(samples, four, "B1", 170.0); });
    CHECK(msg.find("cycle(s) 4") != std::string::npos);
    CHECK_THROWS_AS(assemble_dataset(samples, caps, "B2", 170.0), Error);
}

TEST_CASE("split_rows sizes and golden permutations") {
    const auto a = split_rows(10, 0.7, 42);
    CHECK(a.train.size() == 7);
    CHECK(a.test.size() == 3);
    const auto again = split_rows(10, 0.7, 42);
    CHECK(a.train == again.train);
    CHECK(a.test == again.test);
    CHECK(a.train == std::vector<std::size_t>{6, 9, 7, 8, 0, 5, 3});
    CHECK(a.test == std::vector<std::size_t>{4, 2, 1});

    const auto b = split_rows(10, 0.7, 43);
    CHECK(b.train == std::vector<std::size_t>{0, 6, 5, 1, 8, 7, 2});
    CHECK(b.train != a.train);

    const auto small = split_rows(3, 0.7, 9);
    CHECK(small.train.size() == 2);
    CHECK(small.test.size() == 1);
    CHECK(split_rows(5, 0.7, 1).train.size() == 4);  // 3.5 rounds up
    CHECK_THROWS_AS(split_rows(2, 0.7, 1), Error);
    CHECK_THROWS_AS(split_rows(10, 1.0, 1), Error);

    const auto ordered = split_rows_ordered(10, 0.7);
    CHECK(ordered.train == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
}

TEST_CASE("split_rows partitions for random n and seed") {
    Rng gen(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 3 + gen.below(400);
        const double ratio = gen.uniform(0.3, 0.9);
        const std::uint64_t seed = gen.next();
        SplitDataset s;
        try {
            s = split_rows(n, ratio, seed);
        } catch (const Error&) {
            // Only tiny n with an extreme ratio can leave a side empty.
            CHECK(n < 10);
            continue;
        }
        CHECK(s.train.size() == static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5)));
        std::set<std::size_t> all(s.train.begin(), s.train.end());
        for (auto i : s.test) CHECK(all.insert(i).second);
        CHECK(all.size() == n);
        CHECK(*all.rbegin() == n - 1);
        const auto again = split_rows(n, ratio, seed);
        CHECK(again.train == s.train);
    }
}

TEST_CASE("synth_capacity formula") {
    SynthConfig cfg;
    cfg.noise_sd = 0.0;
    cfg.fade_rate = 0.001;
    cfg.fade_power = 1.0;
    cfg.n_cycles = 100;
    CHECK(synth_capacity(cfg, 100) == doctest::Approx(0.9 * cfg.q0).epsilon(1e-14));
    const Dataset ds = synth_dataset(cfg);
    CHECK(ds.cycles.back().discharge_capacity == doctest::Approx(0.9 * cfg.q0).epsilon(1e-14));
}

TEST_CASE("synth_dataset with no fade") {
    SynthConfig cfg;
    cfg.fade_rate = 0.0;
    cfg.noise_sd = 0.0;
    cfg.n_cycles = 30;
    const Dataset ds = synth_dataset(cfg);
    for (const auto& c : ds.cycles) CHECK(c.discharge_capacity == cfg.q0);
}

TEST_CASE("synth_dataset noise-free monotonicity") {
    SynthConfig cfg;
    cfg.noise_sd = 0.0;
    const Dataset ds = synth_dataset(cfg);
    REQUIRE(ds.cycles.size() == 200);
    for (std::size_t i = 1; i < ds.cycles.size(); ++i) {
        CHECK(ds.cycles[i].discharge_capacity <= ds.cycles[i - 1].discharge_capacity);
        CHECK(ds.cycles[i].end_time() < ds.cycles[i - 1].end_time());
    }
}

TEST_CASE("synth_dataset is deterministic and valid") {
    SynthConfig cfg;
    cfg.n_cycles = 40;
    const Dataset a = synth_dataset(cfg);
    CHECK(a == synth_dataset(cfg));
    for (const auto& c : a.cycles) CHECK_NOTHROW(validate_record(c));
    cfg.seed = 2;
    CHECK(!(a == synth_dataset(cfg)));

    SynthConfig bad;
    bad.fade_rate = 0.5;
    bad.fade_power = 1.0;
    CHECK_THROWS_AS(synth_dataset(bad), Error);
    bad = {};
    bad.n_cycles = 19;
    CHECK_THROWS_AS(synth_dataset(bad), Error);
}

TEST_CASE("dataset CSV and JSON round trips") {
    SynthConfig cfg;
    cfg.n_cycles = 25;
    const Dataset ds = synth_dataset(cfg);

    const Dataset back = assemble_dataset(parse_samples(samples_to_csv(ds)), parse_capacity(capacity_to_csv(ds)),
                                          ds.battery_id, ds.nominal_capacity);
    REQUIRE(back.cycles.size() == ds.cycles.size());
    for (std::size_t i = 0; i < ds.cycles.size(); ++i) {
        REQUIRE(back.cycles[i].samples.size() == ds.cycles[i].samples.size());
        CHECK(back.cycles[i].discharge_capacity ==
              doctest::Approx(ds.cycles[i].discharge_capacity).epsilon(1e-11));
    }

    // The canonical JSON form is a fixed point after one round of rounding.
    const Dataset once = dataset_from_json(dataset_to_json(ds));
    CHECK(dataset_from_json(dataset_to_json(once)) == once);
    CHECK(dump(dataset_to_json(once)) == dump(dataset_to_json(ds)));
    CHECK(once == back);
}
