#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "bankcf/cfgen.hpp"
#include "bankcf/error.hpp"
#include "test_util.hpp"

using namespace bankcf;

namespace {

std::vector<FeatureSpec> unit_schema(std::size_t d, double lo = 0.0, double hi = 1.0) {
    std::vector<FeatureSpec> s(d);
    for (std::size_t j = 0; j < d; ++j) {
        s[j].name = "f" + std::to_string(j);
        s[j].observed_range = Interval{lo, hi};
    }
    return s;
}

DataTable table_of(std::vector<FeatureSpec> schema, const std::vector<std::vector<double>>& rows) {
    DataTable t;
    t.schema = std::move(schema);
    for (std::size_t i = 0; i < rows.size(); ++i)
        t.rows.push_back(testutil::record("B" + std::to_string(i), testutil::ymd(2010, 3, 31), rows[i]));
    return t;
}

// Fails (label 1) when x[f] <= t.
EnsembleModel stump(std::size_t d, int f, double t) {
    Tree tree{{TreeNode{f, t, 1, 2, 0.5, 2}, TreeNode{-1, 0, -1, -1, 1.0, 1}, TreeNode{-1, 0, -1, -1, 0.0, 1}}};
    std::vector<std::string> names;
    for (std::size_t j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
    return EnsembleModel(ModelKind::DecisionTree, {tree}, names, {});
}

// Random training table whose failures concentrate at low f0 + f1.
struct Fixture {
    DataTable table;
    EnsembleModel model;
};

Fixture random_fixture(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    DataTable t;
    for (std::size_t j = 0; j < d; ++j) {
        FeatureSpec s;
        s.name = "f" + std::to_string(j);
        s.valid_range = Interval{0, 10};
        t.schema.push_back(s);
    }
    std::vector<double> x;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(d);
        for (auto& e : v) e = std::round(u(rng) * 100) / 100;
        const int label = v[0] + v[1] + u(rng) * 0.5 < 6.0 ? 1 : 0;
        t.rows.push_back(testutil::record("B" + std::to_string(i), testutil::ymd(2010, 3, 31), v, label));
        x.insert(x.end(), v.begin(), v.end());
        y.push_back(label);
    }
    t.schema = fit_observed_ranges(t);
    TrainConfig cfg;
    cfg.n_trees = 15;
    cfg.seed = seed;
    auto model = fit_random_forest(LabeledMatrix(t.schema, x, y), std::vector<double>(n, 1.0), cfg);
    return {std::move(t), std::move(model)};
}

CFQuery query_for(const std::vector<double>& factual, int desired = 0) {
    CFQuery q;
    q.factual = factual;
    q.desired_class = desired;
    return q;
}

std::vector<std::size_t> failing_rows(const Fixture& fx, std::size_t cap) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fx.table.size() && out.size() < cap; ++i)
        if (fx.model.predict_label(fx.table.rows[i].indicators) == 1) out.push_back(i);
    return out;
}

bool dominates_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    bool le = true, lt = false;
    for (std::size_t m = 0; m < a.size(); ++m) {
        le = le && a[m] <= b[m];
        lt = lt || a[m] < b[m];
    }
    return le && lt;
}

// Peel off nondominated layers with an O(n^2) scan per layer.
std::vector<std::vector<std::size_t>> brute_fronts(const std::vector<std::vector<double>>& pts) {
    std::vector<char> removed(pts.size(), 0);
    std::vector<std::vector<std::size_t>> fronts;
    std::size_t left = pts.size();
    while (left > 0) {
        std::vector<std::size_t> front;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (removed[i]) continue;
            bool dominated = false;
            for (std::size_t j = 0; j < pts.size() && !dominated; ++j)
                if (!removed[j] && j != i && dominates_oracle(pts[j], pts[i])) dominated = true;
            if (!dominated) front.push_back(i);
        }
        for (auto i : front) removed[i] = 1;
        left -= front.size();
        fronts.push_back(front);
    }
    return fronts;
}

}  // namespace

TEST_CASE("gower and heom examples") {
    const auto s5 = unit_schema(5, 0, 10);
    const std::vector<double> a{1, 2, 3, 4, 5};
    auto b = a;
    b[2] += 5;
    CHECK(gower_distance(a, a, s5) == 0.0);
    CHECK(gower_distance(a, b, s5) == doctest::Approx(0.1));
    CHECK(gower_distance(a, b, s5) == gower_distance(b, a, s5));

    FeatureSpec num;
    num.name = "n";
    num.observed_range = Interval{0, 10};
    CHECK(heom_distance(std::vector<double>{2}, std::vector<double>{7}, std::vector<FeatureSpec>{num}) == 0.5);
    FeatureSpec cat;
    cat.name = "c";
    cat.kind = FeatureKind::Categorical;
    const std::vector<FeatureSpec> mixed{cat, num};
    CHECK(heom_distance(std::vector<double>{1, 3}, std::vector<double>{2, 3}, mixed) == 1.0);
    CHECK(heom_distance(std::vector<double>{1, 3}, std::vector<double>{1, 3}, mixed) == 0.0);

    FeatureSpec flat;
    flat.name = "z";
    flat.observed_range = Interval{4, 4};
    CHECK(feature_gap(4, 4, flat) == 0.0);
    CHECK(feature_gap(4, 5, flat) == 1.0);
    // Falls back to the valid range when nothing was observed.
    FeatureSpec valid_only;
    valid_only.valid_range = Interval{0, 100};
    CHECK(feature_gap(10, 60, valid_only) == 0.5);

    CHECK_THROWS_AS(gower_distance(std::vector<double>{1}, a, s5), ShapeError);
    CHECK_THROWS_AS(heom_distance(a, a, unit_schema(2)), ShapeError);
}

TEST_CASE("distance contracts on random in-range probes") {
    const auto schema = schema_for(GroupId::II);
    std::mt19937_64 rng(3);
    for (int t = 0; t < 2000; ++t) {
        std::vector<double> a, b;
        for (const auto& s : schema) {
            std::uniform_real_distribution<double> u(s.valid_range->lower, s.valid_range->upper);
            a.push_back(u(rng));
            b.push_back(u(rng));
        }
        const double g = gower_distance(a, b, schema);
        CHECK(g >= 0.0);
        CHECK(g <= 1.0);
        CHECK(g == gower_distance(b, a, schema));
        CHECK(heom_distance(a, b, schema) == heom_distance(b, a, schema));
        CHECK(gower_distance(a, a, schema) == 0.0);
        for (std::size_t f = 0; f < schema.size(); ++f) {
            const double gap = feature_gap(a[f], b[f], schema[f]);
            CHECK(gap >= 0.0);
            CHECK(gap <= 1.0);
        }
    }
}

TEST_CASE("objective examples") {
    const auto schema = unit_schema(2, -1, 1);
    const auto training = table_of(schema, {{-1, 0}, {0.5, 0.5}, {1, 1}});
    const auto model = stump(2, 0, 0.0);
    auto q = query_for({-1, 0});
    const auto self = evaluate_objectives(q.factual, q, model, training, 1);
    CHECK(self.proximity == 0);
    CHECK(self.sparsity == 0);
    CHECK(self.plausibility == 0);  // the factual is a training row
    CHECK(self.prediction_gap == doctest::Approx(0.5));

    const std::vector<double> moved{0.5, 0.5};
    const auto o = evaluate_objectives(moved, q, model, training, 1);
    CHECK(o.prediction_gap == 0.0);
    CHECK(o.sparsity == 2);
    CHECK(o.proximity == doctest::Approx((0.75 + 0.25) / 2));
    CHECK(o.plausibility == 0);
    CHECK(evaluate_objectives(moved, q, model, training, 3).plausibility > 0);

    CHECK(interval_gap(0.8, {0.5, 1.0}) == 0.0);
    CHECK(interval_gap(0.3, {0.5, 1.0}) == doctest::Approx(0.2));
    CHECK_THROWS_AS(evaluate_objectives(std::vector<double>{1}, q, model, training, 1), ShapeError);
}

TEST_CASE("nondominated sort examples and brute-force agreement") {
    const auto fronts = nondominated_sort(std::vector<std::vector<double>>{{1, 1}, {1, 2}, {2, 2}});
    CHECK(fronts == std::vector<std::vector<std::size_t>>{{0}, {1}, {2}});
    const auto same = nondominated_sort(std::vector<std::vector<double>>(4, {3, 3, 3, 3}));
    CHECK(same == std::vector<std::vector<std::size_t>>{{0, 1, 2, 3}});

    std::mt19937_64 rng(17);
    for (int inst = 0; inst < 200; ++inst) {
        const std::size_t n = 1 + rng() % 50;
        std::vector<std::vector<double>> pts(n, std::vector<double>(4));
        for (auto& p : pts)
            for (auto& v : p) v = static_cast<double>(rng() % 6);
        CHECK(nondominated_sort(pts) == brute_fronts(pts));
    }
}

TEST_CASE("crowding distance") {
    const std::vector<std::vector<double>> pts{{0, 4}, {1, 2}, {2, 1}, {4, 0}};
    const std::vector<std::size_t> front{0, 1, 2, 3};
    const auto cd = crowding_distance(pts, front);
    CHECK(std::isinf(cd[0]));
    CHECK(std::isinf(cd[3]));
    CHECK(cd[1] == doctest::Approx(2.0 / 4 + 3.0 / 4));
    CHECK(cd[2] == doctest::Approx(3.0 / 4 + 2.0 / 4));
}

TEST_CASE("WhatIf examples") {
    const auto schema = unit_schema(1, -1, 1);
    const auto model = stump(1, 0, 0.0);
    const auto one = table_of(schema, {{-0.5}, {0.4}, {-0.9}});
    auto r = generate_whatif(query_for({-1}), model, one);
    REQUIRE(r.counterfactuals.size() == 1);
    CHECK(r.counterfactuals[0].values == std::vector<double>{0.4});

    const auto two = table_of(schema, {{0.6}, {-0.8}, {-0.4}});
    r = generate_whatif(query_for({-0.4}), model, two);
    REQUIRE(r.counterfactuals.size() == 1);
    CHECK(r.counterfactuals[0].objectives.proximity == doctest::Approx(0.5));
    const auto sorted = table_of(schema, {{0.8}, {0.2}});
    r = generate_whatif(query_for({0.0 - 0.2}), model, sorted);
    REQUIRE(r.counterfactuals.size() == 2);
    CHECK(r.counterfactuals[0].objectives.proximity == doctest::Approx(0.2));
    CHECK(r.counterfactuals[1].objectives.proximity == doctest::Approx(0.5));

    const auto none = table_of(schema, {{-0.5}, {-0.2}});
    r = generate_whatif(query_for({-1}), model, none);
    CHECK_FALSE(r.found());
    CHECK_FALSE(r.reason.empty());
}

TEST_CASE("WhatIf equals an exhaustive scan") {
    const auto fx = random_fixture(150, 4, 21);
    for (auto i : failing_rows(fx, 25)) {
        auto q = query_for(fx.table.rows[i].indicators);
        q.max_counterfactuals = 4;
        if (i % 3 == 0) q.frozen_features = {"f3"};
        const auto r = generate_whatif(q, fx.model, fx.table);

        std::vector<std::pair<double, std::size_t>> scan;
        for (std::size_t k = 0; k < fx.table.size(); ++k) {
            const auto& v = fx.table.rows[k].indicators;
            if (fx.model.predict_label(v) != 0) continue;
            if (q.frozen_features.count("f3") && v[3] != q.factual[3]) continue;
            double g = 0;
            for (std::size_t f = 0; f < v.size(); ++f)
                g += std::min(1.0, std::abs(v[f] - q.factual[f]) / fx.table.schema[f].observed_range->width());
            scan.emplace_back(g / static_cast<double>(v.size()), k);
        }
        std::sort(scan.begin(), scan.end());
        const std::size_t expect = std::min<std::size_t>(4, scan.size());
        REQUIRE(r.counterfactuals.size() == expect);
        for (std::size_t k = 0; k < expect; ++k) {
            CHECK(r.counterfactuals[k].values == fx.table.rows[scan[k].second].indicators);
            CHECK(fx.model.predict_label(r.counterfactuals[k].values) == 0);
        }
    }
}

TEST_CASE("NICE toy model: one substitution flips") {
    const auto schema = unit_schema(3);
    const auto model = stump(3, 2, 0.5);
    const auto ref = table_of(schema, {{1, 1, 1}, {0.1, 0.2, 0.3}});
    const auto q = query_for({0, 0, 0});
    const auto nice = generate_nice(q, model, ref);
    REQUIRE(nice.counterfactuals.size() == 1);
    CHECK(nice.counterfactuals[0].changed_features == std::vector<std::size_t>{2});
    CHECK(nice.counterfactuals[0].values == std::vector<double>{0, 0, 1});
    const auto whatif = generate_whatif(q, model, ref);
    CHECK(whatif.counterfactuals[0].changed_features.size() == 3);

    // Exhaustive subsets of the NUN substitution: the smallest that flips has size 1.
    std::size_t smallest = 4;
    for (unsigned mask = 1; mask < 8; ++mask) {
        std::vector<double> v{0, 0, 0};
        for (unsigned f = 0; f < 3; ++f)
            if (mask & (1u << f)) v[f] = 1;
        if (model.predict_label(v) == 0) smallest = std::min<std::size_t>(smallest, std::popcount(mask));
    }
    CHECK(smallest == nice.counterfactuals[0].changed_features.size());

    auto frozen = q;
    frozen.frozen_features = {"f2"};
    const auto blocked = generate_nice(frozen, model, ref);
    CHECK_FALSE(blocked.found());
    CHECK(blocked.reason.find("frozen") != std::string::npos);
}

TEST_CASE("NICE returns several alternatives when several substitutions flip") {
    // Two trees: failing needs both x0 and x1 low; any single raise flips.
    Tree t0{{TreeNode{0, 0.5, 1, 2, 0.5, 2}, TreeNode{-1, 0, -1, -1, 1.0, 1}, TreeNode{-1, 0, -1, -1, 0.0, 1}}};
    Tree t1{{TreeNode{1, 0.5, 1, 2, 0.5, 2}, TreeNode{-1, 0, -1, -1, 1.0, 1}, TreeNode{-1, 0, -1, -1, 0.0, 1}}};
    const EnsembleModel model(ModelKind::RandomForest, {t0, t1}, {"f0", "f1", "f2"}, {}, 0.75);
    const auto ref = table_of(unit_schema(3), {{1, 1, 1}});
    const auto r = generate_nice(query_for({0, 0, 0}), model, ref);
    REQUIRE(r.counterfactuals.size() == 2);
    for (const auto& cf : r.counterfactuals) {
        CHECK(cf.changed_features.size() == 1);
        CHECK(model.predict_label(cf.values) == 0);
    }
}

TEST_CASE("NICE properties on a random forest") {
    const auto fx = random_fixture(150, 4, 33);
    const auto& schema = fx.table.schema;
    int answered = 0;
    for (auto i : failing_rows(fx, 25)) {
        const auto q = query_for(fx.table.rows[i].indicators);
        const auto r = generate_nice(q, fx.model, fx.table);
        // Independent nearest unlike neighbour.
        std::size_t nun = 0;
        double best = INFINITY;
        for (std::size_t k = 0; k < fx.table.size(); ++k) {
            const auto& v = fx.table.rows[k].indicators;
            if (fx.model.predict_label(v) != 0) continue;
            double h = 0;
            for (std::size_t f = 0; f < v.size(); ++f)
                h += std::abs(v[f] - q.factual[f]) / schema[f].observed_range->width();
            if (h < best) {
                best = h;
                nun = k;
            }
        }
        const auto& target = fx.table.rows[nun].indicators;
        const auto nun_diff = changed_features(q.factual, target).size();
        if (!r.found()) continue;
        ++answered;
        for (const auto& cf : r.counterfactuals) {
            CHECK(fx.model.predict_label(cf.values) == 0);
            CHECK(cf.changed_features.size() <= nun_diff);
            for (std::size_t f = 0; f < cf.values.size(); ++f)
                CHECK((cf.values[f] == q.factual[f] || cf.values[f] == target[f]));
        }
        for (std::size_t k = 1; k < r.counterfactuals.size(); ++k)
            CHECK(r.counterfactuals[k - 1].changed_features.size() <= r.counterfactuals[k].changed_features.size());
    }
    CHECK(answered > 0);
}

TEST_CASE("generators report instead of throwing on answered queries") {
    const auto schema = unit_schema(1, -1, 1);
    const auto model = stump(1, 0, 0.0);
    const auto ref = table_of(schema, {{0.5}});
    for (auto m : all_cf_methods()) {
        const auto r = generate(m, query_for({0.5}), model, ref, MocConfig{.population_size = 10, .generations = 2});
        CHECK_FALSE(r.found());
        CHECK(r.reason == "factual is already predicted as the desired class");
    }
    auto q = query_for({-0.5});
    q.frozen_features = {"nope"};
    CHECK_THROWS_AS(generate_whatif(q, model, ref), SchemaError);
    CHECK_THROWS_AS(generate_whatif(query_for({1, 2}), model, ref), ShapeError);
}

TEST_CASE("MOC on a 1-D boundary finds points just past it") {
    const auto schema = unit_schema(1, -1, 1);
    const auto model = stump(1, 0, 0.0);
    std::vector<std::vector<double>> rows;
    for (int i = -10; i <= 10; ++i) rows.push_back({i / 10.0});
    const auto training = table_of(schema, rows);
    MocConfig cfg;
    cfg.seed = 5;
    const auto r = generate_moc(query_for({-1}), model, training, cfg);
    REQUIRE(r.found());
    for (const auto& cf : r.counterfactuals) {
        CHECK(cf.values[0] > 0.0);
        CHECK(cf.objectives.prediction_gap == 0.0);
    }
    // Boundary distance 1 over range 2.
    CHECK(r.counterfactuals[0].objectives.proximity == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("MOC evolution properties") {
    const auto fx = random_fixture(120, 4, 44);
    const auto rows = failing_rows(fx, 3);
    REQUIRE_FALSE(rows.empty());
    auto q = query_for(fx.table.rows[rows[0]].indicators);
    q.frozen_features = {"f2"};
    MocConfig cfg;
    cfg.population_size = 20;
    cfg.seed = 8;

    SUBCASE("no variation keeps the population") {
        auto still = cfg;
        still.p_mutation = 0;
        still.p_crossover = 0;
        const auto pop = initialize_population(q, fx.model, fx.table, still);
        const auto next = evolve_population(pop, q, fx.model, fx.table, 5, still);
        REQUIRE(next.members.size() == pop.members.size());
        for (std::size_t i = 0; i < pop.members.size(); ++i) CHECK(next.members[i].values == pop.members[i].values);
        CHECK(next.generation == 5);
    }
    SUBCASE("per-objective minima never get worse; frozen features never move") {
        auto pop = initialize_population(q, fx.model, fx.table, cfg);
        auto minima = [](const Population& p) {
            std::array<double, 4> m;
            m.fill(INFINITY);
            for (const auto& c : p.members)
                for (std::size_t k = 0; k < 4; ++k) m[k] = std::min(m[k], c.objectives.values()[k]);
            return m;
        };
        auto prev = minima(pop);
        for (int g = 0; g < 100; ++g) {
            pop = evolve_population(pop, q, fx.model, fx.table, 1, cfg);
            CHECK(pop.members.size() == cfg.population_size);
            const auto cur = minima(pop);
            for (std::size_t k = 0; k < 4; ++k) CHECK(cur[k] <= prev[k]);
            prev = cur;
        }
        for (const auto& m : pop.members) CHECK(m.values[2] == q.factual[2]);
    }
    SUBCASE("returned sets flip, are nondominated and deterministic") {
        for (auto i : rows) {
            auto qi = query_for(fx.table.rows[i].indicators);
            const auto a = generate_moc(qi, fx.model, fx.table, cfg);
            const auto b = generate_moc(qi, fx.model, fx.table, cfg);
            REQUIRE(a.counterfactuals.size() == b.counterfactuals.size());
            for (std::size_t k = 0; k < a.counterfactuals.size(); ++k) {
                CHECK(a.counterfactuals[k].values == b.counterfactuals[k].values);
                CHECK(fx.model.predict_label(a.counterfactuals[k].values) == 0);
                CHECK(a.counterfactuals[k].objectives.prediction_gap == 0.0);
            }
            for (const auto& x : a.counterfactuals)
                for (const auto& y : a.counterfactuals) {
                    const auto vx = x.objectives.values(), vy = y.objectives.values();
                    CHECK_FALSE(dominates(vx, vy));
                }
        }
    }
    SUBCASE("errors") {
        const auto pop = initialize_population(q, fx.model, fx.table, cfg);
        CHECK_THROWS_AS(evolve_population(pop, q, fx.model, fx.table, 0, cfg), InputError);
        auto tiny = cfg;
        tiny.population_size = 1;
        CHECK_THROWS_AS(initialize_population(q, fx.model, fx.table, tiny), ParameterError);
    }
}

TEST_CASE("method names") {
    for (auto m : all_cf_methods()) CHECK(parse_cf_method(to_string(m)) == m);
    CHECK(parse_cf_method("what-if") == CfMethod::WhatIf);
    CHECK_THROWS_AS(parse_cf_method("dice"), ConfigError);
}
