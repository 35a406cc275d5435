#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bankcf/cfgen.hpp"
#include "bankcf/json_io.hpp"

namespace bankcf {

struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct ClassificationReport {
    ConfusionMatrix confusion;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Harmonic mean; 0 when both inputs are 0.
double f1_score(double precision, double recall) noexcept;

ClassificationReport classification_report(std::span<const int> predicted, std::span<const int> actual);
ClassificationReport classification_report(const EnsembleModel& model, const DataTable& table);

enum class DistanceKind { Gower, HEOM };

struct DesiderataConfig {
    double epsilon = 0.5;
    std::size_t k_plaus = 10;
    DistanceKind distance = DistanceKind::Gower;
};

struct DesiderataRecord {
    bool valid_flip = false;       // prediction reaches the desired class
    bool valid_threshold = false;  // distance(x, x') <= epsilon
    double proximity = 0.0;
    std::size_t sparsity = 0;
    double plausibility = 0.0;  // mean distance to the k nearest training rows; lower is better
};

// The desired class is the opposite of the model's label for the factual.
DesiderataRecord desiderata(std::span<const double> factual, const Counterfactual& cf, const EnsembleModel& model,
                            const DataTable& training, const DesiderataConfig& config);

struct CellKey {
    ModelKind model = ModelKind::DecisionTree;
    BalancingTag strategy = BalancingTag::Original;
    CfMethod method = CfMethod::WhatIf;

    friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

std::string to_string(const CellKey& key);

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    std::size_t n = 0;
};

// Core metrics, in report order. "validity" is the flip rate.
inline const std::vector<std::string>& desiderata_metrics() {
    static const std::vector<std::string> names{"validity", "proximity", "sparsity", "plausibility"};
    return names;
}
inline constexpr const char* kThresholdValidity = "validity_threshold";

struct GridCell {
    std::map<std::string, MetricSummary> metrics;  // empty when no counterfactual was produced
    std::size_t n = 0;
    std::string reason;
    std::size_t factuals = 0;
    std::size_t failed_factuals = 0;  // queries that produced no counterfactual

    bool empty() const noexcept { return n == 0; }
};

struct BenchmarkGrid {
    std::map<CellKey, GridCell> cells;
    std::map<std::string, std::string> provenance;  // seeds, config hash, ...
};

using RunRecord = std::pair<CellKey, DesiderataRecord>;

// Mean and population std per cell and metric. `empty_cells` lists attempted
// cells that produced nothing, with the reason; they stay in the grid.
BenchmarkGrid aggregate_benchmark(std::span<const RunRecord> runs,
                                  const std::vector<std::pair<CellKey, std::string>>& empty_cells = {});

// Long format: model,strategy,method,metric,mean,std,n,reason, followed by
// config hash and seeds. One row per cell and core metric.
std::string grid_to_csv(const BenchmarkGrid& grid);
Json grid_to_json(const BenchmarkGrid& grid);
// Per (model, strategy) series of per-method mean/std, ready for error bars.
Json grid_to_plotdata(const BenchmarkGrid& grid);

}  // namespace bankcf
