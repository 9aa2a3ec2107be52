#pragma once

#include <filesystem>
#include <string>

#include "battcap/attribution.hpp"
#include "battcap/correlation.hpp"
#include "battcap/data.hpp"
#include "battcap/features.hpp"
#include "battcap/fusion.hpp"
#include "battcap/pipeline.hpp"
#include "json.hpp"

namespace battcap {

using Json = nlohmann::ordered_json;

// Report numbers are rounded to 12 significant digits. Model files keep full
// precision so a reloaded model predicts exactly what the in-memory one did.
Json number(double v);
Json number_array(std::span<const double> v);
Json number_array(const Eigen::VectorXd& v);
Json number_matrix(const Eigen::MatrixXd& m);

std::string read_text(const std::filesystem::path& p);
void write_text(const std::filesystem::path& p, const std::string& text);
Json read_json(const std::filesystem::path& p);
/// Two-space indent plus trailing newline.
std::string dump(const Json& j);

Json dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const Json& j);

struct SegmentsFile {
    VoltageSegments segments;
    SegmentParams params;
    int reference_cycle = 0;
};

Json segments_to_json(const SegmentsFile& s);
SegmentsFile segments_from_json(const Json& j);

/// `cycle,F1,...,F13,target`.
std::string features_to_csv(const FeatureMatrix& m);
FeatureMatrix parse_features_csv(std::string_view text);

Json correlation_to_json(const CorrelationReport& r);

Json shap_to_json(const ShapleySummary& s, const InteractionMatrix& interactions);

Json fusion_to_json(const DimensionScreen& s);

Json metrics_to_json(const std::string& model, std::size_t n_train, std::size_t n_test, const Metrics& train,
                     const Metrics& test);

Json taylor_to_json(const TaylorData& t);

Json fusion_report_to_json(const FusionComparison& c);

Json woa_trace_to_json(const WoaConfig& cfg, const WoaResult& r);

/// Split provenance stored alongside a model so `evaluate` can rebuild it.
struct SplitInfo {
    std::uint64_t seed = 0;
    double ratio = 0.7;
};

Json model_to_json(const TrainedModel& m, const SplitInfo& split);
TrainedModel model_from_json(const Json& j, SplitInfo* split = nullptr);

}  // namespace battcap
