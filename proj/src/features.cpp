#include "battcap/features.hpp"

#include <algorithm>
#include <cmath>

#include "battcap/error.hpp"
#include "battcap/format.hpp"

namespace battcap {

void VoltageSegments::validate() const {
    if (vs1.high_v != vs2.low_v || vs2.high_v != vs3.low_v) {
        throw Error("invariant", "voltage segments are not contiguous");
    }
    if (!(vs1.low_v < vs1.high_v && vs1.high_v < vs2.high_v && vs2.high_v < vs3.high_v)) {
        throw Error("invariant", "voltage segments are not strictly ordered");
    }
}

std::vector<std::string> feature_names() {
    std::vector<std::string> names;
    for (std::size_t i = 1; i <= kFeatureCount; ++i) names.push_back("F" + std::to_string(i));
    return names;
}

LineFit fit_charging_line(const CycleRecord& rec) {
    const auto& s = rec.samples;
    if (s.size() < 2) throw Error("invariant", "line fit needs at least 2 samples");
    const double n = static_cast<double>(s.size());
    double mt = 0.0, mv = 0.0;
    for (const auto& p : s) {
        mt += p.time_s;
        mv += p.voltage_v;
    }
    mt /= n;
    mv /= n;
    double stt = 0.0, stv = 0.0, svv = 0.0;
    for (const auto& p : s) {
        const double dt = p.time_s - mt;
        const double dv = p.voltage_v - mv;
        stt += dt * dt;
        stv += dt * dv;
        svv += dv * dv;
    }
    if (!(stt > 0.0)) {
        throw Error("invariant", "cycle " + std::to_string(rec.cycle_index) + ": all sample times identical");
    }
    LineFit fit;
    fit.slope = stv / stt;
    fit.intercept = mv - fit.slope * mt;
    if (svv > 0.0) {
        double ss_res = 0.0;
        for (const auto& p : s) {
            const double r = p.voltage_v - (fit.intercept + fit.slope * p.time_s);
            ss_res += r * r;
        }
        fit.r2 = std::clamp(1.0 - ss_res / svv, 0.0, 1.0);
    } else {
        fit.r2 = 1.0;
    }
    return fit;
}

std::vector<double> smoothed_slopes(const CycleRecord& rec, int window) {
    const auto& s = rec.samples;
    if (s.size() < 2) return {};
    const std::size_t m = s.size() - 1;
    std::vector<double> raw(m);
    for (std::size_t i = 0; i < m; ++i) {
        raw[i] = (s[i + 1].voltage_v - s[i].voltage_v) / (s[i + 1].time_s - s[i].time_s);
    }
    const std::size_t half = static_cast<std::size_t>(std::max(window, 1) / 2);
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(m - 1, i + half);
        double acc = 0.0;
        for (std::size_t k = lo; k <= hi; ++k) acc += raw[k];
        out[i] = acc / static_cast<double>(hi - lo + 1);
    }
    return out;
}

namespace {

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// k * grid_mv / 1000 keeps snapped voltages at their shortest decimal form.
double grid_value(long long k, double grid_mv) { return static_cast<double>(k) * grid_mv / 1000.0; }

long long grid_round(double v, double grid_mv) { return std::llround(v * 1000.0 / grid_mv); }
long long grid_ceil(double v, double grid_mv) {
    return static_cast<long long>(std::ceil(v * 1000.0 / grid_mv - 1e-9));
}
long long grid_floor(double v, double grid_mv) {
    return static_cast<long long>(std::floor(v * 1000.0 / grid_mv + 1e-9));
}

}  // namespace

VoltageSegments detect_segments(const CycleRecord& reference, const SegmentParams& params) {
    if (!(params.alpha > 0.0)) throw Error("invariant", "alpha must be positive");
    if (!(params.grid_mv > 0.0)) throw Error("invariant", "grid_mv must be positive");
    const auto& s = reference.samples;
    if (s.size() < 3) throw Error("invariant", "reference curve needs at least 3 samples");
    const double v_first = s.front().voltage_v;
    const double v_last = s.back().voltage_v;
    if (v_last - v_first < 3.0 * params.grid_mv / 1000.0) {
        throw Error("invariant", "reference curve spans less than 3 grid steps of voltage");
    }

    const auto slopes = smoothed_slopes(reference, params.smoothing);
    const double threshold = params.alpha * median_of(slopes);

    // Widest run of consecutive intervals at or below the threshold.
    std::size_t best_begin = 0, best_end = 0;
    double best_span = -1.0;
    for (std::size_t i = 0; i < slopes.size();) {
        if (slopes[i] > threshold) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < slopes.size() && slopes[j + 1] <= threshold) ++j;
        const double span = s[j + 1].voltage_v - s[i].voltage_v;
        if (span > best_span) {
            best_span = span;
            best_begin = i;
            best_end = j + 1;
        }
        i = j + 1;
    }
    if (best_span < 0.0) {
        throw Error("no_plateau", "no plateau found: slope never falls below alpha*median (alpha=" +
                                      format_number(params.alpha) + "); try a larger alpha");
    }

    const double g = params.grid_mv;
    const long long k_first = grid_ceil(v_first, g);
    const long long k_last = grid_floor(v_last, g);
    const long long k_lo = grid_round(s[best_begin].voltage_v, g);
    const long long k_hi = grid_round(s[best_end].voltage_v, g);
    if (!(k_first < k_lo && k_lo < k_hi && k_hi < k_last)) {
        throw Error("no_plateau", "plateau band collapses on the " + format_number(g) +
                                      " mV grid; adjust alpha or grid_mv");
    }
    VoltageSegments seg{{grid_value(k_first, g), grid_value(k_lo, g)},
                        {grid_value(k_lo, g), grid_value(k_hi, g)},
                        {grid_value(k_hi, g), grid_value(k_last, g)}};
    seg.validate();
    return seg;
}

std::optional<double> crossing_time(const CycleRecord& rec, double voltage) {
    const auto& s = rec.samples;
    if (s.empty()) return std::nullopt;
    if (s.front().voltage_v >= voltage) return s.front().time_s;
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i].voltage_v >= voltage) {
            const auto& a = s[i - 1];
            const auto& b = s[i];
            return a.time_s + (voltage - a.voltage_v) / (b.voltage_v - a.voltage_v) * (b.time_s - a.time_s);
        }
    }
    return std::nullopt;
}

namespace {

double band_duration(const CycleRecord& rec, const VoltageBand& band) {
    const auto enter = crossing_time(rec, band.low_v);
    if (!enter) return 0.0;
    const double leave = crossing_time(rec, band.high_v).value_or(rec.end_time());
    return std::max(0.0, leave - *enter);
}

}  // namespace

SegmentTimes segment_times(const CycleRecord& rec, const VoltageSegments& seg) {
    return {band_duration(rec, seg.vs1), band_duration(rec, seg.vs2), band_duration(rec, seg.vs3)};
}

FeatureVector extract_features(const CycleRecord& rec, const VoltageSegments& seg) {
    const auto& s = rec.samples;
    if (s.size() < 2) throw Error("invariant", "cycle " + std::to_string(rec.cycle_index) + ": too few samples");
    const double t0 = rec.start_time();
    const double total = rec.end_time() - t0;
    const auto fit = fit_charging_line(rec);
    const auto times = segment_times(rec, seg);
    auto entry = [&](double v) { return crossing_time(rec, v).value_or(rec.end_time()) - t0; };

    double area = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) {
        area += 0.5 * (s[i].voltage_v + s[i - 1].voltage_v) * (s[i].time_s - s[i - 1].time_s);
    }
    std::vector<double> volts(s.size());
    std::transform(s.begin(), s.end(), volts.begin(), [](const Sample& p) { return p.voltage_v; });

    return {
        s.front().voltage_v,
        s.back().voltage_v,
        total,
        fit.slope,
        fit.intercept,
        entry(seg.vs1.low_v),
        times.vs1,
        times.vs2,
        entry(seg.vs2.low_v),
        entry(seg.vs3.low_v),
        area / total,
        times.vs3,
        median_of(std::move(volts)),
    };
}

FeatureMatrix build_matrix(const Dataset& ds, const VoltageSegments& seg, TargetMode mode) {
    FeatureMatrix m;
    m.feature_names = feature_names();
    m.target_name = mode == TargetMode::raw ? "capacity_mah" : "capacity_normalized";
    const auto n = static_cast<Eigen::Index>(ds.cycles.size());
    m.x.resize(n, static_cast<Eigen::Index>(kFeatureCount));
    m.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& rec = ds.cycles[static_cast<std::size_t>(i)];
        FeatureVector f;
        try {
            f = extract_features(rec, seg);
        } catch (const Error& e) {
            throw Error(e.code(), "cycle " + std::to_string(rec.cycle_index) + ": " + e.what());
        }
        for (std::size_t j = 0; j < kFeatureCount; ++j) m.x(i, static_cast<Eigen::Index>(j)) = f[j];
        m.y(i) = mode == TargetMode::raw ? rec.discharge_capacity : rec.discharge_capacity / ds.nominal_capacity;
        m.cycles.push_back(rec.cycle_index);
    }
    return m;
}

std::size_t reference_row(std::span<const std::size_t> train_rows) {
    if (train_rows.empty()) throw Error("invariant", "empty training split");
    std::vector<std::size_t> sorted(train_rows.begin(), train_rows.end());
    std::sort(sorted.begin(), sorted.end());
    return sorted[(sorted.size() - 1) / 2];
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> indices) const {
    FeatureMatrix out;
    out.feature_names = feature_names;
    out.target_name = target_name;
    out.x.resize(static_cast<Eigen::Index>(indices.size()), x.cols());
    out.y.resize(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(indices[k]);
        out.x.row(static_cast<Eigen::Index>(k)) = x.row(i);
        out.y(static_cast<Eigen::Index>(k)) = y(i);
        if (!cycles.empty()) out.cycles.push_back(cycles[indices[k]]);
    }
    return out;
}

void FeatureMatrix::validate(std::size_t min_rows) const {
    if (rows() < min_rows) {
        throw Error("invariant", "feature matrix needs at least " + std::to_string(min_rows) + " rows");
    }
    if (static_cast<std::size_t>(y.size()) != rows()) throw Error("invariant", "target length differs from row count");
    if (feature_names.size() != cols()) throw Error("invariant", "feature name count differs from column count");
    if (!x.allFinite() || !y.allFinite()) throw Error("invariant", "feature matrix has non-finite entries");
}

}  // namespace battcap
