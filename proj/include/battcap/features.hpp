#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "battcap/data.hpp"
#include "battcap/feature_matrix.hpp"

namespace battcap {

struct VoltageBand {
    double low_v = 0.0;
    double high_v = 0.0;

    double width() const { return high_v - low_v; }
    friend bool operator==(const VoltageBand&, const VoltageBand&) = default;
};

/// Pre-plateau, plateau and post-plateau voltage ranges. Contiguous:
/// vs1.high == vs2.low and vs2.high == vs3.low.
struct VoltageSegments {
    VoltageBand vs1, vs2, vs3;

    void validate() const;
    friend bool operator==(const VoltageSegments&, const VoltageSegments&) = default;
};

struct SegmentParams {
    double alpha = 0.5;      // plateau threshold, fraction of the median slope
    double grid_mv = 10.0;   // boundary snapping grid
    int smoothing = 5;       // centred moving-average window (samples)
};

struct LineFit {
    double slope = 0.0;      // V/s
    double intercept = 0.0;  // V
    double r2 = 0.0;
};

struct SegmentTimes {
    double vs1 = 0.0, vs2 = 0.0, vs3 = 0.0;
    double total() const { return vs1 + vs2 + vs3; }
};

inline constexpr std::size_t kFeatureCount = 13;

/// F1..F13:
///  F1 initial voltage        F2 final voltage          F3 total charge time
///  F4 line-fit slope         F5 line-fit intercept     F6 entry time into VS1
///  F7 time in VS1            F8 time in VS2            F9 entry time into VS2
///  F10 entry time into VS3   F11 time-weighted mean V  F12 time in VS3
///  F13 median sample voltage
/// Only F8, F12 and F13 have an established physical reading (plateau
/// duration, post-plateau duration, plateau voltage); the rest of the mapping
/// is this library's convention.
using FeatureVector = std::array<double, kFeatureCount>;

enum class TargetMode { raw, normalized };

std::vector<std::string> feature_names();

/// Ordinary least squares of voltage on time over the whole cycle.
LineFit fit_charging_line(const CycleRecord& rec);

/// Smoothed dV/dt per sample interval (centred moving average).
std::vector<double> smoothed_slopes(const CycleRecord& rec, int window);

/// VS2 is the widest contiguous voltage band whose smoothed slope stays at
/// or below alpha * median slope. VS1 and VS3 cover the rest of the curve.
VoltageSegments detect_segments(const CycleRecord& reference, const SegmentParams& params = {});

/// First time the curve reaches `voltage`, linearly interpolated between
/// the bracketing samples; nullopt when it never does.
std::optional<double> crossing_time(const CycleRecord& rec, double voltage);

SegmentTimes segment_times(const CycleRecord& rec, const VoltageSegments& seg);

FeatureVector extract_features(const CycleRecord& rec, const VoltageSegments& seg);

FeatureMatrix build_matrix(const Dataset& ds, const VoltageSegments& seg, TargetMode mode);

/// Index (into ds.cycles) of the median training row, the reference curve
/// for segmentation.
std::size_t reference_row(std::span<const std::size_t> train_rows);

}  // namespace battcap
