#include "bankcf/trees.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "bankcf/error.hpp"
#include "parallel.hpp"

namespace bankcf {

std::string to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::DecisionTree: return "DecisionTree";
    case ModelKind::RandomForest: return "RandomForest";
    case ModelKind::ExtraTrees: return "ExtraTrees";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view text) {
    std::string key;
    for (char c : text)
        if (std::isalnum(static_cast<unsigned char>(c))) key.push_back(static_cast<char>(std::tolower(c)));
    if (key == "decisiontree" || key == "dt" || key == "tree") return ModelKind::DecisionTree;
    if (key == "randomforest" || key == "rf" || key == "forest") return ModelKind::RandomForest;
    if (key == "extratrees" || key == "et") return ModelKind::ExtraTrees;
    throw ConfigError("unknown model kind '" + std::string(text) + "'");
}

const std::vector<ModelKind>& all_model_kinds() {
    static const std::vector<ModelKind> kinds{ModelKind::DecisionTree, ModelKind::RandomForest,
                                              ModelKind::ExtraTrees};
    return kinds;
}

double weighted_gini(double total_weight, double positive_weight) noexcept {
    if (total_weight <= 0.0) return 0.0;
    return 2.0 * positive_weight * (total_weight - positive_weight) / total_weight;
}

const TreeNode& Tree::leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i];
}

std::size_t Tree::depth() const {
    if (nodes.empty()) return 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    std::size_t deepest = 0;
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (!nodes[i].is_leaf()) {
            stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
            stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
        }
    }
    return deepest;
}

std::size_t Tree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.is_leaf(); }));
}

EnsembleModel::EnsembleModel(ModelKind kind, std::vector<Tree> trees, std::vector<std::string> feature_names,
                             TrainConfig config, double decision_threshold)
    : kind_(kind), trees_(std::move(trees)), feature_names_(std::move(feature_names)), config_(config) {
    if (trees_.empty()) throw TrainingError("model needs at least one tree");
    if (kind_ == ModelKind::DecisionTree && trees_.size() != 1)
        throw TrainingError("a decision tree model holds exactly one tree");
    set_decision_threshold(decision_threshold);
}

void EnsembleModel::set_decision_threshold(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw ParameterError("decision threshold must lie in [0, 1]");
    threshold_ = t;
}

double EnsembleModel::predict_proba(std::span<const double> x) const {
    if (x.size() != feature_names_.size())
        throw ShapeError("expected " + std::to_string(feature_names_.size()) + " features, got " +
                         std::to_string(x.size()));
    for (double v : x)
        if (!std::isfinite(v)) throw InputError("feature vector contains a non-finite value");
    double sum = 0.0;
    for (const auto& t : trees_) sum += t.leaf_for(x).positive_mass;
    return std::clamp(sum / static_cast<double>(trees_.size()), 0.0, 1.0);
}

int EnsembleModel::predict_label(std::span<const double> x) const { return predict_proba(x) >= threshold_ ? 1 : 0; }

namespace {

enum class SplitRule { Best, Random };

struct ResolvedConfig {
    std::size_t mtry;
    bool bootstrap;
    std::optional<std::size_t> max_depth;
    std::size_t min_samples_split;
};

class TreeBuilder {
public:
    TreeBuilder(const LabeledMatrix& data, std::span<const double> weights, const ResolvedConfig& cfg,
                SplitRule rule, std::mt19937_64& rng)
        : data_(data), weights_(weights), cfg_(cfg), rule_(rule), rng_(rng) {}

    Tree build(std::vector<std::size_t> idx) {
        tree_.nodes.clear();
        grow(idx, 0);
        return std::move(tree_);
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double score = std::numeric_limits<double>::infinity();
    };

    int grow(std::vector<std::size_t>& idx, std::size_t depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        double w = 0.0, p = 0.0;
        for (auto i : idx) {
            w += weights_[i];
            if (data_.label(i) == 1) p += weights_[i];
        }
        tree_.nodes[id].total_weight = w;
        tree_.nodes[id].positive_mass = w > 0.0 ? std::clamp(p / w, 0.0, 1.0) : 0.0;

        if (p == 0.0 || p == w || idx.size() < cfg_.min_samples_split || (cfg_.max_depth && depth >= *cfg_.max_depth))
            return id;
        const Split split = find_split(idx, w, p);
        if (split.feature < 0) return id;

        std::vector<std::size_t> left, right;
        const auto f = static_cast<std::size_t>(split.feature);
        for (auto i : idx) (data_.at(i, f) <= split.threshold ? left : right).push_back(i);
        idx.clear();
        idx.shrink_to_fit();

        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        auto& node = tree_.nodes[id];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    std::vector<std::size_t> candidate_features(const std::vector<std::size_t>& idx) {
        const std::size_t d = data_.cols();
        lo_.assign(d, std::numeric_limits<double>::infinity());
        hi_.assign(d, -std::numeric_limits<double>::infinity());
        for (auto i : idx)
            for (std::size_t f = 0; f < d; ++f) {
                lo_[f] = std::min(lo_[f], data_.at(i, f));
                hi_[f] = std::max(hi_[f], data_.at(i, f));
            }
        std::vector<std::size_t> varying;
        for (std::size_t f = 0; f < d; ++f)
            if (lo_[f] < hi_[f]) varying.push_back(f);
        if (varying.size() <= cfg_.mtry) return varying;

        // Constant features do not count toward mtry.
        std::vector<std::size_t> order(d);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng_);
        std::vector<std::size_t> chosen;
        for (auto f : order) {
            if (lo_[f] < hi_[f]) chosen.push_back(f);
            if (chosen.size() == cfg_.mtry) break;
        }
        std::sort(chosen.begin(), chosen.end());
        return chosen;
    }

    // Scores within rounding of the incumbent count as ties, which keep the
    // lower feature index and threshold.
    static bool improves(double score, double incumbent, double w) {
        return score < incumbent - 1e-12 * std::max(1.0, w);
    }

    Split find_split(const std::vector<std::size_t>& idx, double w, double p) {
        Split best;
        const auto features = candidate_features(idx);
        std::vector<std::size_t> sorted;
        for (auto f : features) {
            if (rule_ == SplitRule::Best) {
                sorted = idx;
                std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
                    const double xa = data_.at(a, f), xb = data_.at(b, f);
                    return xa < xb || (xa == xb && a < b);
                });
                double wl = 0.0, pl = 0.0;
                for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
                    const auto i = sorted[k];
                    wl += weights_[i];
                    if (data_.label(i) == 1) pl += weights_[i];
                    const double a = data_.at(i, f);
                    const double b = data_.at(sorted[k + 1], f);
                    if (!(a < b)) continue;
                    const double score = weighted_gini(wl, pl) + weighted_gini(w - wl, p - pl);
                    if (improves(score, best.score, w)) {
                        double mid = 0.5 * (a + b);
                        if (!(mid < b)) mid = a;
                        best = {static_cast<int>(f), mid, score};
                    }
                }
            } else {
                std::uniform_real_distribution<double> draw(lo_[f], hi_[f]);
                double t = draw(rng_);
                if (!(t < hi_[f])) t = lo_[f];
                double wl = 0.0, pl = 0.0;
                for (auto i : idx) {
                    if (data_.at(i, f) <= t) {
                        wl += weights_[i];
                        if (data_.label(i) == 1) pl += weights_[i];
                    }
                }
                const double score = weighted_gini(wl, pl) + weighted_gini(w - wl, p - pl);
                if (improves(score, best.score, w)) best = {static_cast<int>(f), t, score};
            }
        }
        return best;
    }

    const LabeledMatrix& data_;
    std::span<const double> weights_;
    const ResolvedConfig& cfg_;
    SplitRule rule_;
    std::mt19937_64& rng_;
    Tree tree_;
    std::vector<double> lo_, hi_;
};

void check_inputs(const LabeledMatrix& data, std::span<const double> weights, const TrainConfig& config) {
    if (data.rows() == 0) throw TrainingError("cannot train on an empty matrix");
    if (data.cols() == 0) throw TrainingError("cannot train without features");
    if (weights.size() != data.rows())
        throw ShapeError("weight vector has " + std::to_string(weights.size()) + " entries for " +
                         std::to_string(data.rows()) + " rows");
    for (double w : weights)
        if (!(w > 0.0) || !std::isfinite(w)) throw InputError("sample weights must be positive and finite");
    for (double v : data.features())
        if (!std::isfinite(v)) throw InputError("training matrix contains a non-finite value");
    if (config.n_trees < 1 || config.min_samples_split < 1 || (config.max_depth && *config.max_depth < 1) ||
        (config.mtry && *config.mtry < 1))
        throw ParameterError("tree counts must be at least 1");
    if (config.mtry && *config.mtry > data.cols())
        throw ParameterError("mtry exceeds the feature count");
}

std::mt19937_64 tree_rng(std::uint64_t seed, std::size_t tree_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tree_index), 0x7265u};
    return std::mt19937_64(seq);
}

std::vector<std::string> names_of(const LabeledMatrix& data) {
    std::vector<std::string> out;
    for (const auto& s : data.schema()) out.push_back(s.name);
    return out;
}

EnsembleModel fit_ensemble(ModelKind kind, const LabeledMatrix& data, std::span<const double> weights,
                           TrainConfig config) {
    check_inputs(data, weights, config);
    const std::size_t d = data.cols();
    const bool single = kind == ModelKind::DecisionTree;
    if (!config.mtry)
        config.mtry = single ? d : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
    if (!config.bootstrap) config.bootstrap = kind == ModelKind::RandomForest;
    if (single) config.n_trees = 1;
    const ResolvedConfig rc{*config.mtry, *config.bootstrap, config.max_depth, config.min_samples_split};
    const SplitRule rule = kind == ModelKind::ExtraTrees ? SplitRule::Random : SplitRule::Best;

    std::vector<Tree> trees(config.n_trees);
    detail::parallel_for(config.n_trees, [&](std::size_t t) {
        auto rng = tree_rng(config.seed, t);
        std::vector<std::size_t> idx;
        std::vector<double> w;
        if (rc.bootstrap) {
            // Weighted bootstrap: draw rows proportionally to weight; multiplicity
            // becomes an integer weight, which equals training on the replicated
            // sample with unit weights.
            std::discrete_distribution<std::size_t> draw(weights.begin(), weights.end());
            w.assign(data.rows(), 0.0);
            for (std::size_t k = 0; k < data.rows(); ++k) w[draw(rng)] += 1.0;
            for (std::size_t i = 0; i < data.rows(); ++i)
                if (w[i] > 0.0) idx.push_back(i);
        } else {
            w.assign(weights.begin(), weights.end());
            idx.resize(data.rows());
            std::iota(idx.begin(), idx.end(), 0);
        }
        TreeBuilder builder(data, w, rc, rule, rng);
        trees[t] = builder.build(std::move(idx));
    });
    return EnsembleModel(kind, std::move(trees), names_of(data), config);
}

}  // namespace

EnsembleModel fit_decision_tree(const LabeledMatrix& data, std::span<const double> weights, const TrainConfig& config) {
    return fit_ensemble(ModelKind::DecisionTree, data, weights, config);
}

EnsembleModel fit_random_forest(const LabeledMatrix& data, std::span<const double> weights, const TrainConfig& config) {
    return fit_ensemble(ModelKind::RandomForest, data, weights, config);
}

EnsembleModel fit_extra_trees(const LabeledMatrix& data, std::span<const double> weights, const TrainConfig& config) {
    return fit_ensemble(ModelKind::ExtraTrees, data, weights, config);
}

EnsembleModel fit_model(ModelKind kind, const LabeledMatrix& data, std::span<const double> weights,
                        const TrainConfig& config) {
    return fit_ensemble(kind, data, weights, config);
}

}  // namespace bankcf
