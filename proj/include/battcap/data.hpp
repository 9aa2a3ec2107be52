#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace battcap {

struct Sample {
    double time_s = 0.0;
    double voltage_v = 0.0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// One constant-current charge cycle plus the capacity measured on the
/// following discharge. `discharge_capacity` is 0 until assembled.
struct CycleRecord {
    int cycle_index = 0;
    std::vector<Sample> samples;
    double discharge_capacity = 0.0;

    double start_time() const { return samples.front().time_s; }
    double end_time() const { return samples.back().time_s; }

    friend bool operator==(const CycleRecord&, const CycleRecord&) = default;
};

struct Dataset {
    std::string battery_id;
    double nominal_capacity = 0.0;
    std::vector<CycleRecord> cycles;  // sorted by cycle_index

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Contents of a samples CSV. All rows must share one battery id.
struct SampleTable {
    std::string battery_id;
    std::vector<CycleRecord> records;  // in order of first appearance
};

struct CapacityTable {
    std::string battery_id;
    std::map<int, double> capacity_mah;
};

struct SplitDataset {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

struct SynthConfig {
    std::string battery_id = "SYN-LFP-01";
    double nominal_capacity = 170.0;
    int n_cycles = 200;
    double q0 = 168.0;
    double fade_rate = 0.0038;
    double fade_power = 0.75;
    double plateau_voltage = 3.40;
    double noise_sd = 0.0005;
    std::uint64_t seed = 1;
};

inline constexpr double kMonotoneToleranceV = 0.005;
inline constexpr std::size_t kMinSamplesPerCycle = 10;

/// Throws Error{"invariant"} naming the cycle when the record violates the
/// sample-count, time-ordering or voltage-monotonicity contract.
void validate_record(const CycleRecord& rec);

/// Parses `battery_id,cycle,time_s,voltage_v`. Accepts LF or CRLF.
SampleTable parse_samples(std::string_view csv_text);

/// Parses `battery_id,cycle,discharge_capacity_mah`.
CapacityTable parse_capacity(std::string_view csv_text);

Dataset assemble_dataset(const SampleTable& samples, const CapacityTable& capacities,
                         std::string_view battery_id, double nominal_capacity);

/// Uniform shuffle, then the first round-half-up(ratio * n) rows train.
SplitDataset split_rows(std::size_t n_rows, double ratio, std::uint64_t seed);

/// Chronological variant: the first rows train, the rest test.
SplitDataset split_rows_ordered(std::size_t n_rows, double ratio);

/// Capacity fade model used by the generator (noise-free).
double synth_capacity(const SynthConfig& cfg, int cycle);

Dataset synth_dataset(const SynthConfig& cfg);

std::string samples_to_csv(const Dataset& ds);
std::string capacity_to_csv(const Dataset& ds);

}  // namespace battcap
