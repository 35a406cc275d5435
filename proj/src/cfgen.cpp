#include "bankcf/cfgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_set>

#include "bankcf/error.hpp"

namespace bankcf {

// ---------------------------------------------------------------------------
// Distances
// ---------------------------------------------------------------------------

namespace {

std::optional<Interval> range_of(const FeatureSpec& spec) {
    if (spec.observed_range) return spec.observed_range;
    return spec.valid_range;
}

void check_arity(std::size_t a, std::size_t b, std::size_t specs) {
    if (a != b || a != specs)
        throw ShapeError("distance arity mismatch: " + std::to_string(a) + " vs " + std::to_string(b) + " values, " +
                         std::to_string(specs) + " features");
}

}  // namespace

double feature_gap(double a, double b, const FeatureSpec& spec) {
    if (spec.kind == FeatureKind::Categorical) return a == b ? 0.0 : 1.0;
    const auto range = range_of(spec);
    const double width = range ? range->width() : 0.0;
    if (!(width > 0.0)) return a == b ? 0.0 : 1.0;
    return std::abs(a - b) / width;
}

double gower_distance(std::span<const double> a, std::span<const double> b, std::span<const FeatureSpec> specs) {
    check_arity(a.size(), b.size(), specs.size());
    if (specs.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t f = 0; f < specs.size(); ++f) sum += std::min(1.0, feature_gap(a[f], b[f], specs[f]));
    return sum / static_cast<double>(specs.size());
}

double heom_distance(std::span<const double> a, std::span<const double> b, std::span<const FeatureSpec> specs) {
    check_arity(a.size(), b.size(), specs.size());
    double sum = 0.0;
    for (std::size_t f = 0; f < specs.size(); ++f) sum += feature_gap(a[f], b[f], specs[f]);
    return sum;
}

// ---------------------------------------------------------------------------
// Names
// ---------------------------------------------------------------------------

std::string to_string(CfMethod m) {
    switch (m) {
    case CfMethod::WhatIf: return "WhatIf";
    case CfMethod::NICE: return "NICE";
    case CfMethod::MOC: return "MOC";
    }
    return "?";
}

CfMethod parse_cf_method(std::string_view text) {
    std::string key;
    for (char c : text)
        if (std::isalnum(static_cast<unsigned char>(c))) key.push_back(static_cast<char>(std::tolower(c)));
    if (key == "whatif") return CfMethod::WhatIf;
    if (key == "nice") return CfMethod::NICE;
    if (key == "moc") return CfMethod::MOC;
    throw ConfigError("unknown counterfactual method '" + std::string(text) + "'");
}

const std::vector<CfMethod>& all_cf_methods() {
    static const std::vector<CfMethod> methods{CfMethod::WhatIf, CfMethod::NICE, CfMethod::MOC};
    return methods;
}

std::vector<std::size_t> changed_features(std::span<const double> factual, std::span<const double> candidate) {
    if (factual.size() != candidate.size()) throw ShapeError("candidate arity differs from factual");
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < factual.size(); ++f)
        if (factual[f] != candidate[f]) out.push_back(f);
    return out;
}

std::vector<char> frozen_mask(const CFQuery& query, std::span<const FeatureSpec> schema) {
    std::vector<char> mask(schema.size(), 0);
    for (const auto& name : query.frozen_features) {
        auto it = std::find_if(schema.begin(), schema.end(), [&](const auto& s) { return s.name == name; });
        if (it == schema.end()) throw SchemaError("frozen feature '" + name + "' is not in the schema", name);
        mask[static_cast<std::size_t>(it - schema.begin())] = 1;
    }
    for (std::size_t f = 0; f < schema.size(); ++f)
        if (!schema[f].mutable_in_cf) mask[f] = 1;
    return mask;
}

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

double interval_gap(double q, const ProbaInterval& interval) noexcept {
    if (q < interval.lower) return interval.lower - q;
    if (q > interval.upper) return q - interval.upper;
    return 0.0;
}

namespace {

void check_schema(const EnsembleModel& model, const DataTable& table) {
    const auto names = table.feature_names();
    if (names != model.feature_names())
        throw SchemaError("reference table features do not match the model's features");
}

void check_query(const CFQuery& query, const EnsembleModel& model) {
    if (query.factual.size() != model.feature_count())
        throw ShapeError("factual has " + std::to_string(query.factual.size()) + " values, model expects " +
                         std::to_string(model.feature_count()));
    if (query.desired_class != 0 && query.desired_class != 1) throw ParameterError("desired class must be 0 or 1");
    if (query.desired_proba_interval.lower > query.desired_proba_interval.upper)
        throw ParameterError("desired probability interval is empty");
    if (query.k_plausibility < 1) throw ParameterError("plausibility k must be at least 1");
}

}  // namespace

ObjectiveEvaluator::ObjectiveEvaluator(const CFQuery& query, const EnsembleModel& model, const DataTable& training)
    : query_(query), model_(model), schema_(training.schema), n_rows_(training.size()) {
    check_schema(model, training);
    check_query(query, model);
    rows_.reserve(n_rows_ * schema_.size());
    for (const auto& r : training.rows) rows_.insert(rows_.end(), r.indicators.begin(), r.indicators.end());
}

double ObjectiveEvaluator::desired_probability(std::span<const double> candidate) const {
    const double p = model_.predict_proba(candidate);
    return query_.desired_class == 1 ? p : 1.0 - p;
}

double ObjectiveEvaluator::knn_mean_distance(std::span<const double> candidate, std::size_t k) const {
    if (n_rows_ == 0) return 0.0;
    k = std::min(k, n_rows_);
    const std::size_t d = schema_.size();
    thread_local std::vector<double> dist;
    dist.resize(n_rows_);
    for (std::size_t i = 0; i < n_rows_; ++i)
        dist[i] = gower_distance(candidate, std::span<const double>(rows_.data() + i * d, d), schema_);
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
    // The k smallest now sit in [0, k); sum them in sorted order for stable rounding.
    std::sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k));
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += dist[i];
    return sum / static_cast<double>(k);
}

ObjectiveVector ObjectiveEvaluator::evaluate(std::span<const double> candidate) const {
    if (candidate.size() != schema_.size())
        throw ShapeError("candidate has " + std::to_string(candidate.size()) + " values, schema has " +
                         std::to_string(schema_.size()));
    ObjectiveVector o;
    o.prediction_gap = interval_gap(desired_probability(candidate), query_.desired_proba_interval);
    o.proximity = gower_distance(candidate, query_.factual, schema_);
    o.sparsity = static_cast<double>(changed_features(query_.factual, candidate).size());
    o.plausibility = knn_mean_distance(candidate, query_.k_plausibility);
    return o;
}

ObjectiveVector evaluate_objectives(std::span<const double> candidate, const CFQuery& query,
                                    const EnsembleModel& model, const DataTable& training, std::size_t k) {
    CFQuery q = query;
    q.k_plausibility = k;
    return ObjectiveEvaluator(q, model, training).evaluate(candidate);
}

// ---------------------------------------------------------------------------
// Pareto machinery
// ---------------------------------------------------------------------------

bool dominates(std::span<const double> a, std::span<const double> b) noexcept {
    bool strictly = false;
    for (std::size_t m = 0; m < a.size(); ++m) {
        if (a[m] > b[m]) return false;
        if (a[m] < b[m]) strictly = true;
    }
    return strictly;
}

std::vector<std::vector<std::size_t>> nondominated_sort(const std::vector<std::vector<double>>& points) {
    const std::size_t n = points.size();
    std::vector<std::vector<std::size_t>> dominated_by_me(n);
    std::vector<std::size_t> domination_count(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (dominates(points[i], points[j])) {
                dominated_by_me[i].push_back(j);
                ++domination_count[j];
            } else if (dominates(points[j], points[i])) {
                dominated_by_me[j].push_back(i);
                ++domination_count[i];
            }
        }
    }
    std::vector<std::vector<std::size_t>> fronts;
    std::vector<std::size_t> current;
    for (std::size_t i = 0; i < n; ++i)
        if (domination_count[i] == 0) current.push_back(i);
    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (auto i : current)
            for (auto j : dominated_by_me[i])
                if (--domination_count[j] == 0) next.push_back(j);
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(current));
        current = std::move(next);
    }
    return fronts;
}

std::vector<std::vector<std::size_t>> nondominated_sort(std::span<const ObjectiveVector> vectors) {
    std::vector<std::vector<double>> points;
    points.reserve(vectors.size());
    for (const auto& v : vectors) {
        const auto a = v.values();
        points.emplace_back(a.begin(), a.end());
    }
    return nondominated_sort(points);
}

std::vector<double> crowding_distance(const std::vector<std::vector<double>>& points,
                                      std::span<const std::size_t> front) {
    const std::size_t n = front.size();
    std::vector<double> cd(n, 0.0);
    if (n == 0) return cd;
    const std::size_t m_count = points[front[0]].size();
    std::vector<std::size_t> order(n);
    for (std::size_t m = 0; m < m_count; ++m) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double va = points[front[a]][m], vb = points[front[b]][m];
            return va < vb || (va == vb && front[a] < front[b]);
        });
        const double lo = points[front[order.front()]][m];
        const double hi = points[front[order.back()]][m];
        cd[order.front()] = std::numeric_limits<double>::infinity();
        cd[order.back()] = std::numeric_limits<double>::infinity();
        if (!(hi > lo)) continue;
        for (std::size_t k = 1; k + 1 < n; ++k)
            cd[order[k]] += (points[front[order[k + 1]]][m] - points[front[order[k - 1]]][m]) / (hi - lo);
    }
    return cd;
}

// ---------------------------------------------------------------------------
// Shared helpers for the generators
// ---------------------------------------------------------------------------

namespace {

CfResult no_counterfactual(std::string reason) {
    CfResult r;
    r.reason = std::move(reason);
    return r;
}

// Returns a reason when the query cannot or need not be answered.
std::optional<std::string> precheck(const CFQuery& query, const EnsembleModel& model, const DataTable& reference) {
    check_query(query, model);
    check_schema(model, reference);
    frozen_mask(query, reference.schema);
    if (model.predict_label(query.factual) == query.desired_class)
        return "factual is already predicted as the desired class";
    return std::nullopt;
}

Counterfactual make_cf(std::vector<double> values, CfMethod method, const ObjectiveEvaluator& eval,
                       const CFQuery& query, const EnsembleModel& model) {
    Counterfactual cf;
    cf.changed_features = changed_features(query.factual, values);
    cf.objectives = eval.evaluate(values);
    cf.predicted_proba = model.predict_proba(values);
    cf.values = std::move(values);
    cf.method = method;
    return cf;
}

std::vector<std::size_t> desired_rows(const CFQuery& query, const EnsembleModel& model, const DataTable& reference) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < reference.size(); ++i)
        if (model.predict_label(reference.rows[i].indicators) == query.desired_class) out.push_back(i);
    return out;
}

std::string dedup_key(std::span<const double> v) {
    std::string key;
    char buf[32];
    for (double x : v) {
        std::snprintf(buf, sizeof buf, "%.11e;", x);
        key += buf;
    }
    return key;
}

}  // namespace

// ---------------------------------------------------------------------------
// WhatIf: nearest observed instance with the desired prediction
// ---------------------------------------------------------------------------

CfResult generate_whatif(const CFQuery& query, const EnsembleModel& model, const DataTable& reference) {
    if (auto why = precheck(query, model, reference)) return no_counterfactual(*why);
    const auto frozen = frozen_mask(query, reference.schema);
    std::vector<std::pair<double, std::size_t>> ranked;
    for (auto i : desired_rows(query, model, reference)) {
        const auto& row = reference.rows[i].indicators;
        bool respects = true;
        for (std::size_t f = 0; f < row.size(); ++f)
            if (frozen[f] && row[f] != query.factual[f]) respects = false;
        if (respects) ranked.emplace_back(gower_distance(query.factual, row, reference.schema), i);
    }
    if (ranked.empty())
        return no_counterfactual("no reference row is predicted as the desired class while matching the frozen features");
    std::sort(ranked.begin(), ranked.end());
    if (ranked.size() > query.max_counterfactuals) ranked.resize(query.max_counterfactuals);

    const ObjectiveEvaluator eval(query, model, reference);
    CfResult result;
    for (const auto& [dist, i] : ranked)
        result.counterfactuals.push_back(make_cf(reference.rows[i].indicators, CfMethod::WhatIf, eval, query, model));
    return result;
}

// ---------------------------------------------------------------------------
// NICE: greedy substitution from the nearest unlike neighbour
// ---------------------------------------------------------------------------

CfResult generate_nice(const CFQuery& query, const EnsembleModel& model, const DataTable& reference) {
    if (auto why = precheck(query, model, reference)) return no_counterfactual(*why);
    const auto frozen = frozen_mask(query, reference.schema);
    const auto candidates = desired_rows(query, model, reference);
    if (candidates.empty()) return no_counterfactual("no reference row is predicted as the desired class");

    std::size_t nun = candidates.front();
    double best = std::numeric_limits<double>::infinity();
    for (auto i : candidates) {
        const double d = heom_distance(query.factual, reference.rows[i].indicators, reference.schema);
        if (d < best) {
            best = d;
            nun = i;
        }
    }
    const auto& target = reference.rows[nun].indicators;

    std::vector<std::size_t> open;
    bool frozen_blocks = false;
    for (std::size_t f = 0; f < target.size(); ++f) {
        if (target[f] == query.factual[f]) continue;
        if (frozen[f]) frozen_blocks = true;
        else open.push_back(f);
    }

    const ObjectiveEvaluator eval(query, model, reference);
    std::vector<double> current = query.factual;
    std::vector<std::vector<double>> flipped;
    while (!open.empty() && flipped.empty()) {
        double best_q = -1.0;
        std::size_t best_pos = 0;
        for (std::size_t pos = 0; pos < open.size(); ++pos) {
            auto cand = current;
            cand[open[pos]] = target[open[pos]];
            const double q = eval.desired_probability(cand);
            if (model.predict_label(cand) == query.desired_class) flipped.push_back(cand);
            if (q > best_q) {
                best_q = q;
                best_pos = pos;
            }
        }
        if (!flipped.empty()) break;
        current[open[best_pos]] = target[open[best_pos]];
        open.erase(open.begin() + static_cast<std::ptrdiff_t>(best_pos));
    }
    if (flipped.empty()) {
        return no_counterfactual(frozen_blocks
                                     ? "the prediction only flips by changing a frozen feature"
                                     : "no substitution from the nearest unlike neighbour flips the prediction");
    }

    CfResult result;
    for (auto& v : flipped) result.counterfactuals.push_back(make_cf(std::move(v), CfMethod::NICE, eval, query, model));
    std::stable_sort(result.counterfactuals.begin(), result.counterfactuals.end(), [&](const auto& a, const auto& b) {
        if (a.changed_features.size() != b.changed_features.size())
            return a.changed_features.size() < b.changed_features.size();
        return heom_distance(query.factual, a.values, reference.schema) <
               heom_distance(query.factual, b.values, reference.schema);
    });
    if (result.counterfactuals.size() > query.max_counterfactuals)
        result.counterfactuals.resize(query.max_counterfactuals);
    return result;
}

// ---------------------------------------------------------------------------
// MOC: NSGA-II style search over the four objectives
// ---------------------------------------------------------------------------

namespace {

std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x6d6f63u};
    return std::mt19937_64(seq);
}

Interval search_range(const FeatureSpec& spec, double factual) {
    Interval r = range_of(spec).value_or(Interval{factual, factual});
    r.lower = std::min(r.lower, factual);
    r.upper = std::max(r.upper, factual);
    return r;
}

std::vector<std::vector<double>> objective_points(const std::vector<Candidate>& members) {
    std::vector<std::vector<double>> pts;
    pts.reserve(members.size());
    for (const auto& m : members) {
        const auto a = m.objectives.values();
        pts.emplace_back(a.begin(), a.end());
    }
    return pts;
}

// Objective-space crowding plus a bounded decision-space term, so that
// members with equal objectives but different feature values are kept apart.
std::vector<double> selection_crowding(const std::vector<Candidate>& members,
                                       const std::vector<std::vector<double>>& points,
                                       std::span<const std::size_t> front, std::span<const FeatureSpec> schema) {
    auto cd = crowding_distance(points, front);
    const std::size_t n = front.size();
    if (n < 2 || schema.empty()) return cd;
    std::vector<std::size_t> order(n);
    std::vector<double> feat(n, 0.0);
    for (std::size_t f = 0; f < schema.size(); ++f) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double va = members[front[a]].values[f], vb = members[front[b]].values[f];
            return va < vb || (va == vb && front[a] < front[b]);
        });
        feat[order.front()] += 1.0;
        feat[order.back()] += 1.0;
        for (std::size_t k = 1; k + 1 < n; ++k) {
            const double gap = feature_gap(members[front[order[k + 1]]].values[f],
                                           members[front[order[k - 1]]].values[f], schema[f]);
            feat[order[k]] += std::min(1.0, gap);
        }
    }
    for (std::size_t i = 0; i < n; ++i) cd[i] += feat[i] / static_cast<double>(schema.size());
    return cd;
}

struct Ranking {
    std::vector<std::size_t> rank;
    std::vector<double> crowding;
};

Ranking rank_members(const std::vector<Candidate>& members, std::span<const FeatureSpec> schema) {
    const auto points = objective_points(members);
    const auto fronts = nondominated_sort(points);
    Ranking r;
    r.rank.assign(members.size(), 0);
    r.crowding.assign(members.size(), 0.0);
    for (std::size_t fi = 0; fi < fronts.size(); ++fi) {
        const auto cd = selection_crowding(members, points, fronts[fi], schema);
        for (std::size_t k = 0; k < fronts[fi].size(); ++k) {
            r.rank[fronts[fi][k]] = fi;
            r.crowding[fronts[fi][k]] = cd[k];
        }
    }
    return r;
}

// (mu + lambda) truncation: whole fronts first, then the most crowded-apart
// members of the front that no longer fits.
std::vector<Candidate> truncate(std::vector<Candidate> pool, std::size_t mu, std::span<const FeatureSpec> schema) {
    const auto points = objective_points(pool);
    const auto fronts = nondominated_sort(points);
    std::vector<std::size_t> keep;
    for (const auto& front : fronts) {
        if (keep.size() + front.size() <= mu) {
            keep.insert(keep.end(), front.begin(), front.end());
            continue;
        }
        const auto cd = selection_crowding(pool, points, front, schema);
        std::vector<std::size_t> order(front.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cd[a] > cd[b]; });
        for (std::size_t k = 0; keep.size() < mu; ++k) keep.push_back(front[order[k]]);
        break;
    }
    std::sort(keep.begin(), keep.end());
    std::vector<Candidate> out;
    out.reserve(keep.size());
    for (auto i : keep) out.push_back(std::move(pool[i]));
    return out;
}

}  // namespace

Population initialize_population(const CFQuery& query, const EnsembleModel& model, const DataTable& training,
                                 const MocConfig& config) {
    check_query(query, model);
    check_schema(model, training);
    if (config.population_size < 2) throw ParameterError("MOC population size must be at least 2");
    const auto& schema = training.schema;
    const auto frozen = frozen_mask(query, schema);
    const ObjectiveEvaluator eval(query, model, training);
    auto rng = seeded(config.seed, 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Population pop;
    pop.seed = config.seed;

    // A few observed rows of the desired class, nearest first.
    std::vector<std::pair<double, std::size_t>> near;
    for (auto i : desired_rows(query, model, training))
        near.emplace_back(gower_distance(query.factual, training.rows[i].indicators, schema), i);
    std::sort(near.begin(), near.end());
    const std::size_t n_ref =
        std::min({near.size(), config.init_reference_rows, config.population_size / 2});
    for (std::size_t k = 0; k < n_ref; ++k) {
        auto v = training.rows[near[k].second].indicators;
        for (std::size_t f = 0; f < v.size(); ++f)
            if (frozen[f]) v[f] = query.factual[f];
        pop.members.push_back({std::move(v), {}});
    }

    std::vector<std::size_t> movable;
    for (std::size_t f = 0; f < schema.size(); ++f)
        if (!frozen[f]) movable.push_back(f);

    // The rest: copies of the factual with random per-feature resets.
    while (pop.members.size() < config.population_size) {
        auto v = query.factual;
        bool changed = false;
        for (auto f : movable) {
            if (unit(rng) < config.p_init_change) {
                const auto r = search_range(schema[f], query.factual[f]);
                v[f] = r.lower + unit(rng) * r.width();
                changed = true;
            }
        }
        if (!changed && !movable.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, movable.size() - 1);
            const auto f = movable[pick(rng)];
            const auto r = search_range(schema[f], query.factual[f]);
            v[f] = r.lower + unit(rng) * r.width();
        }
        pop.members.push_back({std::move(v), {}});
    }
    for (auto& m : pop.members) m.objectives = eval.evaluate(m.values);
    return pop;
}

Population evolve_population(const Population& pop, const CFQuery& query, const EnsembleModel& model,
                             const DataTable& training, std::size_t budget, const MocConfig& config) {
    if (budget == 0) throw InputError("generation budget must be at least 1");
    if (pop.members.size() < 2) throw InputError("population needs at least two members");
    check_schema(model, training);
    const auto& schema = training.schema;
    const auto frozen = frozen_mask(query, schema);
    const ObjectiveEvaluator eval(query, model, training);
    const std::size_t mu = pop.members.size();
    const std::size_t d = schema.size();

    std::vector<Interval> ranges;
    for (std::size_t f = 0; f < d; ++f) ranges.push_back(search_range(schema[f], query.factual[f]));

    Population cur = pop;
    for (std::size_t g = 0; g < budget; ++g) {
        auto rng = seeded(cur.seed, cur.generation + 1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> pick(0, mu - 1);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const auto ranking = rank_members(cur.members, schema);
        auto tournament = [&] {
            const auto a = pick(rng), b = pick(rng);
            if (ranking.rank[a] != ranking.rank[b]) return ranking.rank[a] < ranking.rank[b] ? a : b;
            return ranking.crowding[b] > ranking.crowding[a] ? b : a;
        };

        std::vector<Candidate> pool = cur.members;
        std::unordered_set<std::string> seen;
        for (const auto& m : pool) seen.insert(dedup_key(m.values));

        for (std::size_t c = 0; c < mu; ++c) {
            const auto& p1 = cur.members[tournament()].values;
            const auto& p2 = cur.members[tournament()].values;
            std::vector<double> child = p1;
            if (unit(rng) < config.p_crossover) {
                for (std::size_t f = 0; f < d; ++f)
                    if (!frozen[f] && unit(rng) < 0.5) child[f] = p2[f];
            }
            for (std::size_t f = 0; f < d; ++f) {
                if (frozen[f] || !(unit(rng) < config.p_mutation)) continue;
                if (unit(rng) < config.p_reset) {
                    child[f] = query.factual[f];
                } else {
                    const double sigma = config.mutation_scale * ranges[f].width();
                    child[f] = std::clamp(child[f] + sigma * gauss(rng), ranges[f].lower, ranges[f].upper);
                }
            }
            if (seen.insert(dedup_key(child)).second) {
                auto obj = eval.evaluate(child);
                pool.push_back({std::move(child), obj});
            }
        }
        cur.members = truncate(std::move(pool), mu, schema);
        ++cur.generation;
        if (config.deadline && std::chrono::steady_clock::now() >= *config.deadline) break;
    }
    return cur;
}

CfResult generate_moc(const CFQuery& query, const EnsembleModel& model, const DataTable& training,
                      const MocConfig& config) {
    if (auto why = precheck(query, model, training)) return no_counterfactual(*why);
    if (config.generations == 0) throw InputError("generation budget must be at least 1");
    auto pop = initialize_population(query, model, training, config);
    pop = evolve_population(pop, query, model, training, config.generations, config);

    const auto points = objective_points(pop.members);
    const auto fronts = nondominated_sort(points);
    const ObjectiveEvaluator eval(query, model, training);
    CfResult result;
    double best_gap = std::numeric_limits<double>::infinity();
    for (const auto& m : pop.members) best_gap = std::min(best_gap, m.objectives.prediction_gap);
    result.best_gap = best_gap;

    std::unordered_set<std::string> seen;
    for (auto i : fronts.front()) {
        const auto& m = pop.members[i];
        if (m.objectives.prediction_gap != 0.0) continue;
        if (model.predict_label(m.values) != query.desired_class) continue;
        if (!seen.insert(dedup_key(m.values)).second) continue;
        result.counterfactuals.push_back(make_cf(m.values, CfMethod::MOC, eval, query, model));
    }
    if (result.counterfactuals.empty()) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "no nondominated candidate reached the desired prediction (best gap %.6f)",
                      best_gap);
        result.reason = buf;
        return result;
    }
    std::stable_sort(result.counterfactuals.begin(), result.counterfactuals.end(), [](const auto& a, const auto& b) {
        if (a.objectives.sparsity != b.objectives.sparsity) return a.objectives.sparsity < b.objectives.sparsity;
        return a.objectives.proximity < b.objectives.proximity;
    });
    if (result.counterfactuals.size() > query.max_counterfactuals)
        result.counterfactuals.resize(query.max_counterfactuals);
    return result;
}

CfResult generate(CfMethod method, const CFQuery& query, const EnsembleModel& model, const DataTable& reference,
                  const MocConfig& moc) {
    switch (method) {
    case CfMethod::WhatIf: return generate_whatif(query, model, reference);
    case CfMethod::NICE: return generate_nice(query, model, reference);
    case CfMethod::MOC: return generate_moc(query, model, reference, moc);
    }
    throw ParameterError("unknown counterfactual method");
}

}  // namespace bankcf
