#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "battcap/data.hpp"
#include "battcap/features.hpp"
#include "battcap/io.hpp"
#include "battcap/pipeline.hpp"
#include "battcap/rng.hpp"

namespace battcap {

/// Everything a config file can set. Missing keys keep their defaults;
/// unknown keys are rejected so typos do not pass silently.
struct RunConfig {
    std::uint64_t seed = 1;
    SynthConfig synth;
    SegmentParams segment;
    TsneParams tsne;
    ModelSpec model;
    std::vector<std::string> compare_models{"elm", "woa-elm", "knn", "rf", "gbrt"};
    TargetMode target = TargetMode::raw;

    static RunConfig from_json(const Json& j);
};

/// Master seed precedence: explicit flag, then RUN_SEED, then the config.
std::uint64_t resolve_master_seed(const RunConfig& cfg, std::optional<std::uint64_t> flag);

/// Seed shared by every stage that splits rows, so segment, train, evaluate
/// and compare agree on which cycles are held out.
inline std::uint64_t split_seed_for(std::uint64_t master) { return derive_seed(master, "split"); }

/// Runs one CLI invocation. Returns the process exit code; errors are written
/// to `err` as a single `ERROR <code>: <message>` line.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace battcap
