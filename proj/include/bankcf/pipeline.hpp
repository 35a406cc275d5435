#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bankcf/artifact.hpp"
#include "bankcf/config.hpp"
#include "bankcf/evaluation.hpp"

namespace bankcf {

// Ingested, lag-labelled, predictor-selected and split data. All three
// partitions share a schema whose observed ranges come from the in-sample rows.
struct PreparedData {
    SplitBundle split;
    LoadDiagnostics diagnostics;
};

PreparedData prepare_data(const RunConfig& config);

// Refuses matrices that contain resampled rows.
ClassificationReport evaluate_partition(const EnsembleModel& model, const LabeledMatrix& data);

struct TrainedModel {
    ModelArtifact artifact;
    ClassificationReport out_of_sample;
    ClassificationReport out_of_time;
};

TrainedModel train_on(const PreparedData& data, ModelKind kind, BalancingTag strategy, const RunConfig& config,
                      std::uint64_t seed);

struct ReportBundle {
    std::string config_hash;
    std::string config_text;
    std::map<std::string, ClassificationReport> reports;  // partition -> metrics
    std::optional<BenchmarkGrid> grid;
    std::vector<Json> explanations;
    Json data_summary = Json::object();
};

// Each writes its artifacts under config.out_dir; on failure every file the
// command created is removed and a StageError names the failing stage.
ReportBundle cmd_train(const RunConfig& config);
ReportBundle cmd_benchmark(const RunConfig& config);

enum class ExplainStatus { Found, NoActionNeeded, NotFound };

struct ExplainOptions {
    std::vector<std::string> frozen_features;
    std::size_t max_counterfactuals = 5;
    MocConfig moc;
    DesiderataConfig desiderata;
    std::string bank_id;
    std::optional<Date> report_date;
};

struct Explanation {
    ExplainStatus status = ExplainStatus::NotFound;
    Json document;
    std::string text;

    // 0 when counterfactuals were found or none were needed, 2 otherwise.
    int exit_code() const noexcept { return status == ExplainStatus::NotFound ? 2 : 0; }
};

enum class Direction { Up, Down, Unchanged };
Direction direction(double old_value, double new_value) noexcept;
std::string to_string(Direction d);
std::string marker(Direction d);

Explanation cmd_explain(const ModelArtifact& artifact, std::span<const double> factual, CfMethod method,
                        const ExplainOptions& options);

// Feature vector in model order from named values. Missing, unknown or
// non-finite entries raise SchemaError naming the feature.
std::vector<double> factual_from_map(const ModelArtifact& artifact, const std::map<std::string, double>& values);

enum class ReportFormat { Csv, Json, PlotData };
ReportFormat parse_report_format(std::string_view text);

// Writes the files for one format into `dir` and returns their paths.
std::vector<std::filesystem::path> emit_report(const ReportBundle& bundle, ReportFormat format,
                                               const std::filesystem::path& dir);

}  // namespace bankcf
