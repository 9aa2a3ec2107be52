#pragma once

#include <Eigen/Core>
#include <vector>

#include "battcap/data.hpp"
#include "battcap/features.hpp"
#include "battcap/rng.hpp"

namespace testing_support {

using battcap::CycleRecord;
using battcap::Rng;

inline CycleRecord curve(int cycle, const std::vector<double>& t, const std::vector<double>& v) {
    CycleRecord rec;
    rec.cycle_index = cycle;
    for (std::size_t i = 0; i < t.size(); ++i) rec.samples.push_back({t[i], v[i]});
    return rec;
}

inline std::vector<double> random_series(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0,
                                     double hi = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
    }
    return m;
}

struct SyntheticFixture {
    battcap::Dataset ds;
    battcap::VoltageSegments seg;
    battcap::FeatureMatrix m;
};

// Default synthetic history segmented on the median training cycle, as the
// segment command does for master seed 1.
inline SyntheticFixture make_fixture(const battcap::SynthConfig& cfg = {}) {
    SyntheticFixture f;
    f.ds = battcap::synth_dataset(cfg);
    const auto split = battcap::split_rows(f.ds.cycles.size(), 0.7, battcap::derive_seed(1, "split"));
    f.seg = battcap::detect_segments(f.ds.cycles[battcap::reference_row(split.train)]);
    f.m = battcap::build_matrix(f.ds, f.seg, battcap::TargetMode::raw);
    return f;
}

inline const SyntheticFixture& synthetic_fixture() {
    static const SyntheticFixture f = make_fixture();
    return f;
}

}  // namespace testing_support
