#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bankcf/balancing.hpp"

namespace bankcf {

enum class ModelKind { DecisionTree, RandomForest, ExtraTrees };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);
const std::vector<ModelKind>& all_model_kinds();

// Unset optionals take the per-kind defaults at fit time: mtry = d for a
// single tree and ceil(sqrt(d)) for ensembles; bootstrap only for forests.
struct TrainConfig {
    std::size_t n_trees = 100;
    std::optional<std::size_t> max_depth;
    std::size_t min_samples_split = 2;
    std::optional<std::size_t> mtry;
    std::optional<bool> bootstrap;
    std::uint64_t seed = 0;
};

// Flat node. Internal nodes send x[feature] <= threshold to `left`.
// Every node records the weighted positive fraction of the rows that reached it.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double positive_mass = 0.0;
    double total_weight = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root; preorder

    const TreeNode& leaf_for(std::span<const double> x) const;
    std::size_t depth() const;
    std::size_t leaf_count() const;
    friend bool operator==(const Tree&, const Tree&) = default;
};

class EnsembleModel {
public:
    EnsembleModel() = default;
    EnsembleModel(ModelKind kind, std::vector<Tree> trees, std::vector<std::string> feature_names,
                  TrainConfig config, double decision_threshold = 0.5);

    ModelKind kind() const noexcept { return kind_; }
    const std::vector<Tree>& trees() const noexcept { return trees_; }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    const TrainConfig& train_config() const noexcept { return config_; }
    double decision_threshold() const noexcept { return threshold_; }
    std::size_t feature_count() const noexcept { return feature_names_.size(); }

    void set_decision_threshold(double t);

    // Mean of per-tree leaf positive fractions.
    double predict_proba(std::span<const double> x) const;
    // 1 iff predict_proba >= decision threshold.
    int predict_label(std::span<const double> x) const;

private:
    ModelKind kind_ = ModelKind::DecisionTree;
    std::vector<Tree> trees_;
    std::vector<std::string> feature_names_;
    TrainConfig config_;
    double threshold_ = 0.5;
};

EnsembleModel fit_decision_tree(const LabeledMatrix& data, std::span<const double> weights,
                                const TrainConfig& config);
EnsembleModel fit_random_forest(const LabeledMatrix& data, std::span<const double> weights,
                                const TrainConfig& config);
EnsembleModel fit_extra_trees(const LabeledMatrix& data, std::span<const double> weights,
                              const TrainConfig& config);
EnsembleModel fit_model(ModelKind kind, const LabeledMatrix& data, std::span<const double> weights,
                        const TrainConfig& config);

// Weighted Gini impurity times node weight: 2 p (w - p) / w.
double weighted_gini(double total_weight, double positive_weight) noexcept;

}  // namespace bankcf
