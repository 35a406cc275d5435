#include "bankcf/balancing.hpp"

#include <cctype>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bankcf/error.hpp"

namespace bankcf {

LabeledMatrix::LabeledMatrix(std::vector<FeatureSpec> schema, std::vector<double> features, std::vector<int> labels)
    : schema_(std::move(schema)), features_(std::move(features)), labels_(std::move(labels)) {
    if (features_.size() != labels_.size() * schema_.size())
        throw ShapeError("feature buffer of " + std::to_string(features_.size()) + " values does not match " +
                         std::to_string(labels_.size()) + " rows x " + std::to_string(schema_.size()) + " columns");
    for (int y : labels_)
        if (y != 0 && y != 1) throw InputError("labels must be 0 or 1");
    origins_.assign(labels_.size(), RowOrigin::Original);
}

std::size_t LabeledMatrix::count(int label) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

bool LabeledMatrix::all_original() const {
    return std::all_of(origins_.begin(), origins_.end(), [](RowOrigin o) { return o == RowOrigin::Original; });
}

void LabeledMatrix::push_row(std::span<const double> values, int label, RowOrigin origin) {
    if (values.size() != cols()) throw ShapeError("row arity does not match matrix columns");
    features_.insert(features_.end(), values.begin(), values.end());
    labels_.push_back(label);
    origins_.push_back(origin);
}

LabeledMatrix to_labeled_matrix(const DataTable& table) {
    std::vector<double> features;
    std::vector<int> labels;
    features.reserve(table.size() * table.feature_count());
    labels.reserve(table.size());
    for (const auto& r : table.rows) {
        if (r.indicators.size() != table.feature_count()) throw ShapeError("row arity does not match table schema");
        features.insert(features.end(), r.indicators.begin(), r.indicators.end());
        labels.push_back(r.failed_label);
    }
    return LabeledMatrix(table.schema, std::move(features), std::move(labels));
}

std::string to_string(BalancingTag tag) {
    switch (tag) {
    case BalancingTag::Original: return "Original";
    case BalancingTag::Undersampling: return "Undersampling";
    case BalancingTag::Oversampling: return "Oversampling";
    case BalancingTag::SMOTE: return "SMOTE";
    case BalancingTag::CostSensitive: return "CostSensitive";
    }
    return "?";
}

BalancingTag parse_balancing(std::string_view text) {
    for (auto tag : all_balancing_tags()) {
        const auto name = to_string(tag);
        if (text.size() == name.size() &&
            std::equal(text.begin(), text.end(), name.begin(),
                       [](char a, char b) { return std::tolower(a) == std::tolower(b); }))
            return tag;
    }
    if (text == "cost-sensitive" || text == "cost_sensitive") return BalancingTag::CostSensitive;
    throw ConfigError("unknown balancing strategy '" + std::string(text) + "'");
}

const std::vector<BalancingTag>& all_balancing_tags() {
    static const std::vector<BalancingTag> tags{BalancingTag::Original, BalancingTag::Undersampling,
                                                BalancingTag::Oversampling, BalancingTag::SMOTE,
                                                BalancingTag::CostSensitive};
    return tags;
}

namespace {

struct ClassCounts {
    int minority;
    std::size_t n_min;
    std::size_t n_maj;
};

ClassCounts class_counts(const LabeledMatrix& data) {
    const std::size_t pos = data.count(1);
    const std::size_t neg = data.rows() - pos;
    if (pos == 0 || neg == 0) throw BalancingError("balancing needs rows of both labels");
    if (pos <= neg) return {1, pos, neg};
    return {0, neg, pos};
}

LabeledMatrix empty_like(const LabeledMatrix& data) { return LabeledMatrix(data.schema(), {}, {}); }

}  // namespace

LabeledMatrix undersample(const LabeledMatrix& data, std::uint64_t seed) {
    const auto cc = class_counts(data);
    if (cc.n_min == cc.n_maj) return data;
    std::vector<std::size_t> majority;
    for (std::size_t i = 0; i < data.rows(); ++i)
        if (data.label(i) != cc.minority) majority.push_back(i);
    std::mt19937_64 rng(seed);
    std::shuffle(majority.begin(), majority.end(), rng);
    std::vector<char> keep(data.rows(), 0);
    for (std::size_t k = 0; k < cc.n_min; ++k) keep[majority[k]] = 1;

    auto out = empty_like(data);
    for (std::size_t i = 0; i < data.rows(); ++i)
        if (data.label(i) == cc.minority || keep[i]) out.push_row(data.row(i), data.label(i), data.origins()[i]);
    return out;
}

LabeledMatrix oversample(const LabeledMatrix& data, std::uint64_t seed) {
    const auto cc = class_counts(data);
    if (cc.n_min == cc.n_maj) return data;
    std::vector<std::size_t> minority;
    for (std::size_t i = 0; i < data.rows(); ++i)
        if (data.label(i) == cc.minority) minority.push_back(i);
    auto out = data;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, minority.size() - 1);
    for (std::size_t k = cc.n_min; k < cc.n_maj; ++k) {
        const auto src = minority[pick(rng)];
        out.push_row(data.row(src), cc.minority, RowOrigin::Duplicate);
    }
    return out;
}

std::vector<double> smote_interpolate(std::span<const double> x, std::span<const double> neighbor, double lambda) {
    if (x.size() != neighbor.size()) throw ShapeError("SMOTE endpoints differ in arity");
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] + lambda * (neighbor[j] - x[j]);
    return out;
}

LabeledMatrix smote(const LabeledMatrix& data, int k, std::uint64_t seed) {
    for (const auto& spec : data.schema())
        if (spec.kind != FeatureKind::Numeric)
            throw UnsupportedFeatureError("SMOTE supports numeric features only; '" + spec.name + "' is categorical");
    if (k < 1) throw ParameterError("SMOTE k must be at least 1");
    const auto cc = class_counts(data);
    if (cc.n_min <= static_cast<std::size_t>(k))
        throw ParameterError("SMOTE needs more than k=" + std::to_string(k) + " minority rows, got " +
                             std::to_string(cc.n_min));
    if (cc.n_min == cc.n_maj) return data;

    const std::size_t d = data.cols();
    // Neighbor search runs on standardized columns.
    std::vector<double> mean(d, 0.0), scale(d, 0.0);
    for (std::size_t i = 0; i < data.rows(); ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += data.at(i, j);
    for (auto& m : mean) m /= static_cast<double>(data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i)
        for (std::size_t j = 0; j < d; ++j) scale[j] += (data.at(i, j) - mean[j]) * (data.at(i, j) - mean[j]);
    for (auto& s : scale) {
        s = std::sqrt(s / static_cast<double>(data.rows()));
        if (s == 0.0) s = 1.0;
    }

    std::vector<std::size_t> minority;
    for (std::size_t i = 0; i < data.rows(); ++i)
        if (data.label(i) == cc.minority) minority.push_back(i);
    const std::size_t m = minority.size();
    std::vector<double> z(m * d);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t j = 0; j < d; ++j) z[a * d + j] = (data.at(minority[a], j) - mean[j]) / scale[j];

    std::vector<std::vector<std::size_t>> neighbors(m);
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t a = 0; a < m; ++a) {
        dist.clear();
        for (std::size_t b = 0; b < m; ++b) {
            if (b == a) continue;
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = z[a * d + j] - z[b * d + j];
                s += diff * diff;
            }
            dist.emplace_back(s, b);
        }
        // (distance, index) ordering breaks ties by the lower row index.
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        for (int t = 0; t < k; ++t) neighbors[a].push_back(dist[static_cast<std::size_t>(t)].second);
    }

    auto out = data;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, k - 1);
    std::uniform_real_distribution<double> gap(0.0, 1.0);
    for (std::size_t s = 0; s < cc.n_maj - cc.n_min; ++s) {
        const std::size_t a = s % m;
        const std::size_t b = neighbors[a][static_cast<std::size_t>(pick(rng))];
        const double lambda = gap(rng);
        // Interpolating in original units equals de-standardizing the
        // standardized interpolation; the map is affine.
        const auto synth = smote_interpolate(data.row(minority[a]), data.row(minority[b]), lambda);
        out.push_row(synth, cc.minority, RowOrigin::Synthetic);
    }
    return out;
}

SampleWeightVector cost_sensitive_weights(std::span<const int> labels) {
    const auto n = static_cast<double>(labels.size());
    const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const double neg = n - pos;
    if (pos == 0 || neg == 0) throw BalancingError("cost-sensitive weights need rows of both labels");
    const double w_pos = n / (2.0 * pos);
    const double w_neg = n / (2.0 * neg);
    SampleWeightVector w(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) w[i] = labels[i] == 1 ? w_pos : w_neg;
    return w;
}

BalancedData apply_strategy(const LabeledMatrix& data, const BalancingStrategy& strategy) {
    BalancedData out;
    switch (strategy.tag) {
    case BalancingTag::Original: out.data = data; break;
    case BalancingTag::Undersampling: out.data = undersample(data, strategy.seed); break;
    case BalancingTag::Oversampling: out.data = oversample(data, strategy.seed); break;
    case BalancingTag::SMOTE: out.data = smote(data, strategy.smote_k, strategy.seed); break;
    case BalancingTag::CostSensitive:
        out.data = data;
        out.weights = cost_sensitive_weights(data.labels());
        return out;
    }
    out.weights.assign(out.data.rows(), 1.0);
    return out;
}

}  // namespace bankcf
