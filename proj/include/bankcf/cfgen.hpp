#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bankcf/dataset.hpp"
#include "bankcf/trees.hpp"

namespace bankcf {

// ---------------------------------------------------------------------------
// Distances
// ---------------------------------------------------------------------------

// Per-feature normalized gap |a - b| / range, unclipped. Categorical features
// and zero-range numerics give 0 when equal and 1 otherwise. The range is the
// observed range, falling back to the valid range.
double feature_gap(double a, double b, const FeatureSpec& spec);

// Mean over features of the per-feature gap clipped to [0, 1].
double gower_distance(std::span<const double> a, std::span<const double> b, std::span<const FeatureSpec> specs);

// L1 sum of per-feature gaps (heterogeneous Euclidean overlap).
double heom_distance(std::span<const double> a, std::span<const double> b, std::span<const FeatureSpec> specs);

// ---------------------------------------------------------------------------
// Queries and results
// ---------------------------------------------------------------------------

enum class CfMethod { WhatIf, NICE, MOC };

std::string to_string(CfMethod m);
CfMethod parse_cf_method(std::string_view text);
const std::vector<CfMethod>& all_cf_methods();

struct ProbaInterval {
    double lower = 0.5;
    double upper = 1.0;
};

struct CFQuery {
    std::vector<double> factual;
    int desired_class = 0;
    // Interval on the probability of the desired class.
    ProbaInterval desired_proba_interval;
    std::set<std::string> frozen_features;
    std::size_t max_counterfactuals = 5;
    std::size_t k_plausibility = 10;
};

struct ObjectiveVector {
    double prediction_gap = 0.0;  // distance of P(desired) to the desired interval
    double proximity = 0.0;       // Gower distance to the factual
    double sparsity = 0.0;        // number of changed features
    double plausibility = 0.0;    // mean Gower distance to k nearest training rows

    std::array<double, 4> values() const { return {prediction_gap, proximity, sparsity, plausibility}; }
    friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;
};

struct Counterfactual {
    std::vector<double> values;
    CfMethod method = CfMethod::WhatIf;
    std::vector<std::size_t> changed_features;  // ascending feature indices
    ObjectiveVector objectives;
    double predicted_proba = 0.0;  // model probability of the positive (failed) label
};

struct CfResult {
    std::vector<Counterfactual> counterfactuals;
    std::string reason;  // set when nothing was found
    std::optional<double> best_gap;

    bool found() const noexcept { return !counterfactuals.empty(); }
};

std::vector<std::size_t> changed_features(std::span<const double> factual, std::span<const double> candidate);

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

// Precomputed training rows for repeated plausibility lookups.
class ObjectiveEvaluator {
public:
    ObjectiveEvaluator(const CFQuery& query, const EnsembleModel& model, const DataTable& training);

    ObjectiveVector evaluate(std::span<const double> candidate) const;
    double desired_probability(std::span<const double> candidate) const;
    double knn_mean_distance(std::span<const double> candidate, std::size_t k) const;

    const std::vector<FeatureSpec>& schema() const noexcept { return schema_; }

private:
    const CFQuery& query_;
    const EnsembleModel& model_;
    std::vector<FeatureSpec> schema_;
    std::vector<double> rows_;  // row-major training matrix
    std::size_t n_rows_ = 0;
};

ObjectiveVector evaluate_objectives(std::span<const double> candidate, const CFQuery& query,
                                    const EnsembleModel& model, const DataTable& training, std::size_t k);

double interval_gap(double q, const ProbaInterval& interval) noexcept;

// ---------------------------------------------------------------------------
// Pareto machinery
// ---------------------------------------------------------------------------

// a dominates b under minimization.
bool dominates(std::span<const double> a, std::span<const double> b) noexcept;

// Fronts of indices, each ascending; front 0 is the nondominated set.
std::vector<std::vector<std::size_t>> nondominated_sort(const std::vector<std::vector<double>>& points);
std::vector<std::vector<std::size_t>> nondominated_sort(std::span<const ObjectiveVector> vectors);

// Crowding distance in objective space for the members of one front.
std::vector<double> crowding_distance(const std::vector<std::vector<double>>& points,
                                      std::span<const std::size_t> front);

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

CfResult generate_whatif(const CFQuery& query, const EnsembleModel& model, const DataTable& reference);

CfResult generate_nice(const CFQuery& query, const EnsembleModel& model, const DataTable& reference);

struct MocConfig {
    std::size_t population_size = 50;
    std::size_t generations = 100;
    double p_mutation = 0.2;
    double p_reset = 0.3;
    double p_crossover = 0.5;
    double mutation_scale = 0.1;  // Gaussian sigma as a fraction of the observed range
    double p_init_change = 0.5;
    std::size_t init_reference_rows = 5;
    std::uint64_t seed = 0;
    // Wall-clock cut-off; the run stops after the generation in progress.
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct Candidate {
    std::vector<double> values;
    ObjectiveVector objectives;
};

struct Population {
    std::vector<Candidate> members;
    std::size_t generation = 0;
    std::uint64_t seed = 0;
};

Population initialize_population(const CFQuery& query, const EnsembleModel& model, const DataTable& training,
                                 const MocConfig& config);

Population evolve_population(const Population& pop, const CFQuery& query, const EnsembleModel& model,
                             const DataTable& training, std::size_t budget, const MocConfig& config);

CfResult generate_moc(const CFQuery& query, const EnsembleModel& model, const DataTable& training,
                      const MocConfig& config);

CfResult generate(CfMethod method, const CFQuery& query, const EnsembleModel& model, const DataTable& reference,
                  const MocConfig& moc = {});

// Index set of features that may not change (frozen by the query or immutable).
std::vector<char> frozen_mask(const CFQuery& query, std::span<const FeatureSpec> schema);

}  // namespace bankcf
