#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bankcf/dataset.hpp"

namespace bankcf {

// Where a training row came from. Evaluation matrices must be all Original.
enum class RowOrigin : std::uint8_t { Original, Duplicate, Synthetic };

// Row-major feature matrix with binary labels.
class LabeledMatrix {
public:
    LabeledMatrix() = default;
    LabeledMatrix(std::vector<FeatureSpec> schema, std::vector<double> features, std::vector<int> labels);

    std::size_t rows() const noexcept { return labels_.size(); }
    std::size_t cols() const noexcept { return schema_.size(); }

    std::span<const double> row(std::size_t i) const { return {features_.data() + i * cols(), cols()}; }
    double at(std::size_t i, std::size_t j) const { return features_[i * cols() + j]; }
    int label(std::size_t i) const { return labels_[i]; }

    const std::vector<FeatureSpec>& schema() const noexcept { return schema_; }
    const std::vector<double>& features() const noexcept { return features_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    const std::vector<RowOrigin>& origins() const noexcept { return origins_; }

    std::size_t count(int label) const;
    bool all_original() const;

    void push_row(std::span<const double> values, int label, RowOrigin origin);

    friend bool operator==(const LabeledMatrix&, const LabeledMatrix&) = default;

private:
    std::vector<FeatureSpec> schema_;
    std::vector<double> features_;
    std::vector<int> labels_;
    std::vector<RowOrigin> origins_;
};

LabeledMatrix to_labeled_matrix(const DataTable& table);

enum class BalancingTag { Original, Undersampling, Oversampling, SMOTE, CostSensitive };

std::string to_string(BalancingTag tag);
BalancingTag parse_balancing(std::string_view text);
const std::vector<BalancingTag>& all_balancing_tags();

struct BalancingStrategy {
    BalancingTag tag = BalancingTag::Original;
    int smote_k = 5;
    std::uint64_t seed = 0;
};

using SampleWeightVector = std::vector<double>;

LabeledMatrix undersample(const LabeledMatrix& data, std::uint64_t seed);
LabeledMatrix oversample(const LabeledMatrix& data, std::uint64_t seed);
LabeledMatrix smote(const LabeledMatrix& data, int k, std::uint64_t seed);

// x + lambda * (neighbor - x)
std::vector<double> smote_interpolate(std::span<const double> x, std::span<const double> neighbor, double lambda);

// n / (2 * n_c) for every row of label c.
SampleWeightVector cost_sensitive_weights(std::span<const int> labels);

struct BalancedData {
    LabeledMatrix data;
    SampleWeightVector weights;
};

BalancedData apply_strategy(const LabeledMatrix& data, const BalancingStrategy& strategy);

}  // namespace bankcf
