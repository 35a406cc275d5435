// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bankcf/balancing.hpp"
#include "bankcf/cfgen.hpp"
#include "bankcf/evaluation.hpp"
#include "bankcf/pipeline.hpp"
#include "bankcf/trees.hpp"

using namespace bankcf;
namespace fs = std::filesystem;

namespace {

const fs::path kDesk = fs::path(BANKCF_DATA_DIR) / "desk_banks.csv";

struct Outcome {
    bool pass = true;
    std::string detail;
    std::vector<std::string> warnings;

    void fail(const std::string& why) {
        if (pass) detail = why;
        pass = false;
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// 1. Metric oracle
// ---------------------------------------------------------------------------

Outcome metric_oracle() {
    Outcome o;
    std::mt19937_64 rng(1001);
    std::vector<int> p(1000), a(1000);
    for (int i = 0; i < 1000; ++i) {
        p[i] = static_cast<int>(rng() % 2);
        a[i] = static_cast<int>(rng() % 5 == 0);
    }
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (int i = 0; i < 1000; ++i) {
        if (p[i] == 1 && a[i] == 1) ++tp;
        if (p[i] == 1 && a[i] == 0) ++fp;
        if (p[i] == 0 && a[i] == 0) ++tn;
        if (p[i] == 0 && a[i] == 1) ++fn;
    }
    const auto r = classification_report(p, a);
    if (r.confusion != ConfusionMatrix{tp, fp, tn, fn}) o.fail("confusion matrix differs from recount");
    const double P = double(tp) / double(tp + fp), R = double(tp) / double(tp + fn);
    if (std::abs(r.f1 - 2 * P * R / (P + R)) > 1e-12) o.fail("F1 differs from 2PR/(P+R)");
    if (std::abs(r.accuracy - double(tp + tn) / 1000.0) > 1e-12) o.fail("accuracy differs");

    std::vector<int> none(50, 0), some(50, 0);
    some[7] = 1;
    if (classification_report(none, some).f1 != 0.0) o.fail("tp = 0 does not give F1 = 0");
    if (o.pass) o.detail = "tp=" + std::to_string(tp) + " fp=" + std::to_string(fp) + " tn=" + std::to_string(tn) +
                           " fn=" + std::to_string(fn) + ", F1 " + fmt("%.6f", r.f1);
    return o;
}

// ---------------------------------------------------------------------------
// 2. Distance contracts
// ---------------------------------------------------------------------------

Outcome distance_contracts() {
    Outcome o;
    // Full catalog with validation ranges only, plus the Group II schema with
    // observed ranges from the bundled data.
    std::vector<std::vector<FeatureSpec>> schemas{indicator_catalog()};
    const auto desk = select_predictors(label_with_failure_lag(load_csv(kDesk, schema_for(GroupId::II))),
                                        predictor_group(GroupId::II));
    schemas.push_back(fit_observed_ranges(desk));

    std::mt19937_64 rng(2002);
    std::size_t pairs = 0;
    for (const auto& schema : schemas) {
        for (int t = 0; t < 5000; ++t, ++pairs) {
            std::vector<double> a, b;
            for (const auto& s : schema) {
                const Interval r = s.observed_range ? *s.observed_range : *s.valid_range;
                std::uniform_real_distribution<double> u(r.lower, r.upper);
                a.push_back(u(rng));
                b.push_back(u(rng));
            }
            if (gower_distance(a, a, schema) != 0.0 || heom_distance(a, a, schema) != 0.0) o.fail("identity");
            const double g = gower_distance(a, b, schema), h = heom_distance(a, b, schema);
            if (g != gower_distance(b, a, schema) || h != heom_distance(b, a, schema)) o.fail("symmetry");
            if (g < 0.0 || g > 1.0) o.fail("Gower outside [0, 1]");
            for (std::size_t f = 0; f < schema.size(); ++f) {
                const double gap = feature_gap(a[f], b[f], schema[f]);
                if (gap < 0.0 || gap > 1.0) o.fail("per-feature HEOM term outside [0, 1] for " + schema[f].name);
                if (a[f] != b[f] && gap == 0.0) o.fail("indiscernible distinct values for " + schema[f].name);
            }
        }
    }
    if (o.pass) o.detail = std::to_string(pairs) + " probe pairs";
    return o;
}

// ---------------------------------------------------------------------------
// 3. SMOTE geometry
// ---------------------------------------------------------------------------

Outcome smote_geometry() {
    Outcome o;
    const std::size_t d = 4, n_neg = 180, n_pos = 20, k = 5;
    std::vector<FeatureSpec> schema(d);
    for (std::size_t j = 0; j < d; ++j) schema[j].name = "x" + std::to_string(j);
    std::mt19937_64 rng(3003);
    std::normal_distribution<double> g(0, 1);
    std::vector<double> x;
    std::vector<int> y;
    for (std::size_t i = 0; i < n_neg + n_pos; ++i) {
        const int label = i < n_neg ? 0 : 1;
        for (std::size_t j = 0; j < d; ++j) x.push_back(g(rng) * double(j + 1) + 1.5 * label);
        y.push_back(label);
    }
    const LabeledMatrix m(schema, x, y);
    const auto s = smote(m, static_cast<int>(k), 77);
    if (s.count(0) != s.count(1)) o.fail("label counts differ after balancing");

    // Standardized kNN among minority rows, by exhaustive search.
    std::vector<double> mu(d, 0), sd(d, 0);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < m.rows(); ++i) mu[j] += m.at(i, j);
        mu[j] /= double(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) sd[j] += (m.at(i, j) - mu[j]) * (m.at(i, j) - mu[j]);
        sd[j] = std::sqrt(sd[j] / double(m.rows()));
    }
    std::vector<std::vector<double>> mins;
    for (std::size_t i = 0; i < m.rows(); ++i)
        if (m.label(i) == 1) mins.emplace_back(m.row(i).begin(), m.row(i).end());
    std::vector<std::set<std::size_t>> nn(mins.size());
    for (std::size_t a = 0; a < mins.size(); ++a) {
        std::vector<std::pair<double, std::size_t>> dist;
        for (std::size_t b = 0; b < mins.size(); ++b) {
            if (a == b) continue;
            double acc = 0;
            for (std::size_t j = 0; j < d; ++j) acc += std::pow((mins[a][j] - mins[b][j]) / sd[j], 2);
            dist.emplace_back(acc, b);
        }
        std::sort(dist.begin(), dist.end());
        for (std::size_t t = 0; t < k; ++t) nn[a].insert(dist[t].second);
    }

    std::size_t synthetic = 0;
    for (std::size_t i = m.rows(); i < s.rows(); ++i, ++synthetic) {
        const auto p = s.row(i);
        bool on_segment = false;
        // Every ordered minority pair; accept only neighbour pairs.
        for (std::size_t a = 0; a < mins.size() && !on_segment; ++a) {
            for (std::size_t b = 0; b < mins.size() && !on_segment; ++b) {
                if (a == b || !nn[a].count(b)) continue;
                double lambda = NAN;
                bool ok = true;
                for (std::size_t j = 0; j < d && ok; ++j) {
                    const double span = mins[b][j] - mins[a][j];
                    if (std::abs(span) < 1e-12) {
                        ok = std::abs(p[j] - mins[a][j]) < 1e-9;
                        continue;
                    }
                    const double l = (p[j] - mins[a][j]) / span;
                    if (std::isnan(lambda)) lambda = l;
                    else ok = std::abs(l - lambda) < 1e-9;
                }
                on_segment = ok && lambda >= -1e-12 && lambda <= 1 + 1e-12;
            }
        }
        if (!on_segment) o.fail("synthetic row " + std::to_string(i) + " is off every neighbour segment");
    }
    if (synthetic != n_neg - n_pos) o.fail("unexpected synthetic count " + std::to_string(synthetic));
    if (o.pass) o.detail = std::to_string(synthetic) + " synthetic points on minority-neighbour segments";
    return o;
}

// ---------------------------------------------------------------------------
// 4. Weighted-tree oracle
// ---------------------------------------------------------------------------

Outcome weighted_tree_oracle() {
    Outcome o;
    std::mt19937_64 rng(4004);
    std::size_t instances = 0;
    for (int inst = 0; inst < 500; ++inst) {
        const std::size_t n = 2 + rng() % 19, d = 1 + rng() % 3;
        std::vector<FeatureSpec> schema(d);
        for (std::size_t j = 0; j < d; ++j) schema[j].name = "x" + std::to_string(j);
        std::vector<double> x, w;
        std::vector<int> y;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) x.push_back(double(rng() % 8));
            y.push_back(static_cast<int>(rng() % 2));
            w.push_back(double(1 + rng() % 5));
        }
        const LabeledMatrix m(schema, x, y);
        LabeledMatrix rep(schema, {}, {});
        for (std::size_t i = 0; i < n; ++i)
            for (int r = 0; r < int(w[i]); ++r) rep.push_row(m.row(i), m.label(i), RowOrigin::Original);
        const auto tw = fit_decision_tree(m, w, {}).trees()[0];
        const auto tr = fit_decision_tree(rep, std::vector<double>(rep.rows(), 1.0), {}).trees()[0];
        if (!(tw == tr)) o.fail("weighted and replicated trees differ on instance " + std::to_string(inst));

        // Exhaustive root split; lowest feature then threshold among minimisers.
        double best = INFINITY;
        int bf = -1;
        double bt = 0;
        for (std::size_t f = 0; f < d; ++f) {
            std::vector<double> vals;
            for (std::size_t i = 0; i < n; ++i) vals.push_back(m.at(i, f));
            std::sort(vals.begin(), vals.end());
            vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
            for (std::size_t t = 0; t + 1 < vals.size(); ++t) {
                const double thr = (vals[t] + vals[t + 1]) / 2;
                double c[2][2] = {{0, 0}, {0, 0}};
                for (std::size_t i = 0; i < n; ++i) c[m.at(i, f) <= thr ? 0 : 1][m.label(i)] += w[i];
                double imp = 0;
                for (auto& side : c) {
                    const double tot = side[0] + side[1];
                    if (tot > 0) imp += tot - (side[0] * side[0] + side[1] * side[1]) / tot;
                }
                if (imp < best - 1e-9) {
                    best = imp;
                    bf = int(f);
                    bt = thr;
                }
            }
        }
        const auto& root = tw.nodes[0];
        const bool pure = std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0;
        if (pure || bf < 0) {
            if (!root.is_leaf()) o.fail("expected a leaf root on instance " + std::to_string(inst));
        } else if (root.feature != bf || root.threshold != bt) {
            o.fail("root split differs from enumeration on instance " + std::to_string(inst));
        }
        ++instances;
    }
    if (o.pass) o.detail = std::to_string(instances) + " instances of at most 20 rows";
    return o;
}

// ---------------------------------------------------------------------------
// 5. Pareto oracle
// ---------------------------------------------------------------------------

Outcome pareto_oracle() {
    Outcome o;
    std::mt19937_64 rng(5005);
    for (int inst = 0; inst < 200; ++inst) {
        const std::size_t n = 1 + rng() % 50;
        std::vector<std::vector<double>> pts(n, std::vector<double>(4));
        const bool ints = inst % 2 == 0;  // half with many ties
        std::uniform_real_distribution<double> u(0, 1);
        for (auto& p : pts)
            for (auto& v : p) v = ints ? double(rng() % 5) : u(rng);
        std::vector<char> gone(n, 0);
        std::vector<std::vector<std::size_t>> oracle;
        std::size_t left = n;
        while (left) {
            std::vector<std::size_t> front;
            for (std::size_t i = 0; i < n; ++i) {
                if (gone[i]) continue;
                bool dominated = false;
                for (std::size_t j = 0; j < n && !dominated; ++j) {
                    if (gone[j] || i == j) continue;
                    bool le = true, lt = false;
                    for (int k = 0; k < 4; ++k) {
                        le = le && pts[j][k] <= pts[i][k];
                        lt = lt || pts[j][k] < pts[i][k];
                    }
                    dominated = le && lt;
                }
                if (!dominated) front.push_back(i);
            }
            for (auto i : front) gone[i] = 1;
            left -= front.size();
            oracle.push_back(front);
        }
        if (nondominated_sort(pts) != oracle) o.fail("fronts differ on instance " + std::to_string(inst));
    }
    if (o.pass) o.detail = "200 instances, n <= 50, 4 objectives";
    return o;
}

// ---------------------------------------------------------------------------
// 6. Generator validity
// ---------------------------------------------------------------------------

Outcome generator_validity() {
    Outcome o;
    RunConfig config;
    config.data_csv = kDesk;
    config.seed = 6006;
    const auto data = prepare_data(config);
    const auto all_rows = data.split.in_sample.size() + data.split.out_of_sample.size() + data.split.out_of_time.size();
    const auto positives =
        data.split.in_sample.positives() + data.split.out_of_sample.positives() + data.split.out_of_time.positives();
    const double rate = double(positives) / double(all_rows);
    if (all_rows < 1500 || all_rows > 3000 || rate < 0.02 || rate > 0.08)
        o.fail("bundled data is not desk scale: " + std::to_string(all_rows) + " rows, " + fmt("%.3f", rate));

    const auto trained = train_on(data, ModelKind::RandomForest, BalancingTag::CostSensitive, config, 6006);
    const auto& model = trained.artifact.model;
    const auto& ref = data.split.in_sample;
    const auto& schema = ref.schema;

    std::vector<std::size_t> factuals;
    for (std::size_t i = 0; i < data.split.out_of_sample.size() && factuals.size() < 50; ++i)
        if (model.predict_label(data.split.out_of_sample.rows[i].indicators) == 1) factuals.push_back(i);
    if (factuals.empty()) o.fail("no factual is predicted failing");

    std::set<std::vector<double>> ref_rows;
    for (const auto& r : ref.rows) ref_rows.insert(r.indicators);

    std::size_t outputs[3] = {0, 0, 0}, empty[3] = {0, 0, 0};
    for (auto fi : factuals) {
        const auto& x = data.split.out_of_sample.rows[fi].indicators;
        CFQuery q;
        q.factual = x;
        q.desired_class = 0;
        MocConfig moc;
        moc.seed = derive_seed(6006, "moc/" + std::to_string(fi));

        // Independent nearest unlike neighbour under HEOM.
        double best = INFINITY;
        std::size_t nun_diff = 0;
        for (const auto& r : ref.rows) {
            if (model.predict_label(r.indicators) != 0) continue;
            double h = 0;
            std::size_t diff = 0;
            for (std::size_t f = 0; f < x.size(); ++f) {
                h += std::abs(r.indicators[f] - x[f]) / schema[f].observed_range->width();
                diff += r.indicators[f] != x[f];
            }
            if (h < best) {
                best = h;
                nun_diff = diff;
            }
        }

        for (int mi = 0; mi < 3; ++mi) {
            const auto method = all_cf_methods()[mi];
            const auto res = generate(method, q, model, ref, moc);
            if (!res.found()) {
                ++empty[mi];
                continue;
            }
            for (const auto& cf : res.counterfactuals) {
                ++outputs[mi];
                if (model.predict_label(cf.values) != 0) o.fail(to_string(method) + " output does not flip");
                if (method == CfMethod::WhatIf && !ref_rows.count(cf.values))
                    o.fail("WhatIf output is not a reference row");
                if (method == CfMethod::NICE && cf.changed_features.size() > nun_diff)
                    o.fail("NICE sparsity exceeds the NUN difference count");
            }
            if (method == CfMethod::MOC)
                for (const auto& a : res.counterfactuals)
                    for (const auto& b : res.counterfactuals)
                        if (dominates(a.objectives.values(), b.objectives.values()))
                            o.fail("MOC returned a dominated counterfactual");
        }
    }
    for (int mi = 0; mi < 3; ++mi)
        if (outputs[mi] == 0) o.fail(to_string(all_cf_methods()[mi]) + " produced no output at all");
    std::ostringstream d;
    d << factuals.size() << " factuals (" << all_rows << " rows, " << fmt("%.1f", 100 * rate) << "% failing); outputs";
    for (int mi = 0; mi < 3; ++mi)
        d << ' ' << to_string(all_cf_methods()[mi]) << '=' << outputs[mi] << " (" << empty[mi] << " empty)";
    if (o.pass) o.detail = d.str();
    else o.detail += "; " + d.str();
    return o;
}

// ---------------------------------------------------------------------------
// 7. Qualitative ordering
// ---------------------------------------------------------------------------

Outcome qualitative_ordering() {
    Outcome o;
    const int seeds = 5;
    double dt = 0, rf = 0, et = 0, dt_orig_oot = 0, dt_cs_oot = 0;
    int a_viol = 0, b_viol = 0;
    for (int s = 1; s <= seeds; ++s) {
        RunConfig config;
        config.data_csv = kDesk;
        config.seed = static_cast<std::uint64_t>(s);
        const auto data = prepare_data(config);
        const auto seed = derive_seed(*config.seed, "train");
        const auto f_dt = train_on(data, ModelKind::DecisionTree, BalancingTag::Original, config, seed);
        const auto f_rf = train_on(data, ModelKind::RandomForest, BalancingTag::Original, config, seed);
        const auto f_et = train_on(data, ModelKind::ExtraTrees, BalancingTag::Original, config, seed);
        const auto f_cs = train_on(data, ModelKind::DecisionTree, BalancingTag::CostSensitive, config, seed);
        const double d = f_dt.out_of_sample.f1, r = f_rf.out_of_sample.f1, e = f_et.out_of_sample.f1;
        dt += d;
        rf += r;
        et += e;
        dt_orig_oot += f_dt.out_of_time.f1;
        dt_cs_oot += f_cs.out_of_time.f1;
        if (r < d || e < d) {
            ++a_viol;
            o.warnings.push_back("7a seed " + std::to_string(s) + ": out-of-sample F1 DT " + fmt("%.3f", d) + ", RF " +
                                 fmt("%.3f", r) + ", ET " + fmt("%.3f", e));
        }
        if (f_cs.out_of_time.f1 < f_dt.out_of_time.f1) {
            ++b_viol;
            o.warnings.push_back("7b seed " + std::to_string(s) + ": out-of-time F1 DT cost-sensitive " +
                                 fmt("%.3f", f_cs.out_of_time.f1) + " < original " + fmt("%.3f", f_dt.out_of_time.f1));
        }
    }
    dt /= seeds;
    rf /= seeds;
    et /= seeds;
    dt_orig_oot /= seeds;
    dt_cs_oot /= seeds;
    if (a_viol >= 4) o.fail("7a violated in " + std::to_string(a_viol) + " of 5 seeds");
    if (b_viol >= 4) o.fail("7b violated in " + std::to_string(b_viol) + " of 5 seeds");
    const std::string d = "mean out-of-sample F1 DT " + fmt("%.3f", dt) + ", RF " + fmt("%.3f", rf) + ", ET " +
                          fmt("%.3f", et) + "; mean out-of-time F1 DT original " + fmt("%.3f", dt_orig_oot) +
                          ", cost-sensitive " + fmt("%.3f", dt_cs_oot) + "; violations 7a " + std::to_string(a_viol) +
                          "/5, 7b " + std::to_string(b_viol) + "/5";
    o.detail = o.pass ? d : o.detail + "; " + d;
    return o;
}

// ---------------------------------------------------------------------------
// 8. Benchmark grid
// ---------------------------------------------------------------------------

Outcome benchmark_grid(const fs::path& scratch) {
    Outcome o;
    RunConfig config;
    config.data_csv = kDesk;
    config.seed = 8008;
    config.max_factuals = 10;
    config.out_dir = scratch / "bench-a";
    const auto bundle = cmd_benchmark(config);
    config.out_dir = scratch / "bench-b";
    cmd_benchmark(config);

    const auto& grid = *bundle.grid;
    std::size_t populated = 0, reasoned = 0;
    for (auto m : all_model_kinds())
        for (auto s : all_balancing_tags())
            for (auto c : all_cf_methods()) {
                auto it = grid.cells.find({m, s, c});
                if (it == grid.cells.end()) {
                    o.fail("missing cell " + to_string(CellKey{m, s, c}));
                    continue;
                }
                const auto& cell = it->second;
                if (cell.empty()) {
                    if (cell.reason.empty()) o.fail("empty cell without a reason: " + to_string(it->first));
                    ++reasoned;
                    continue;
                }
                for (const auto& metric : desiderata_metrics()) {
                    auto mt = cell.metrics.find(metric);
                    if (mt == cell.metrics.end() || mt->second.n == 0 || !(mt->second.std >= 0))
                        o.fail("cell " + to_string(it->first) + " lacks " + metric);
                }
                ++populated;
            }
    if (grid.cells.size() != 45) o.fail(std::to_string(grid.cells.size()) + " cells instead of 45");

    const auto csv = read_file(scratch / "bench-a" / "benchmark.csv");
    if (std::count(csv.begin(), csv.end(), '\n') != 1 + 45 * 4) o.fail("benchmark.csv row count is not 1 + 45x4");
    for (auto f : {"benchmark.csv", "report.json", "benchmark_plot.json"})
        if (read_file(scratch / "bench-a" / f) != read_file(scratch / "bench-b" / f))
            o.fail(std::string(f) + " differs between identical runs");
    const std::string d = std::to_string(populated) + " populated + " + std::to_string(reasoned) +
                          " reasoned-empty cells, reruns byte-identical (cap " + std::to_string(config.max_factuals) +
                          " factuals per cell)";
    o.detail = o.pass ? d : o.detail + "; " + d;
    return o;
}

// ---------------------------------------------------------------------------
// 9. Explanation document fidelity
// ---------------------------------------------------------------------------

Outcome explanation_fidelity() {
    Outcome o;
    RunConfig config;
    config.data_csv = kDesk;
    config.seed = 9009;
    const auto data = prepare_data(config);
    const auto trained = train_on(data, ModelKind::RandomForest, BalancingTag::CostSensitive, config, 9009);
    const auto& art = trained.artifact;

    std::size_t explained = 0, markers = 0, multi = 0;
    for (const auto& row : data.split.out_of_sample.rows) {
        if (art.model.predict_label(row.indicators) != 1) continue;
        ExplainOptions opt;
        opt.bank_id = row.bank_id;
        opt.report_date = row.report_date;
        const auto ex = cmd_explain(art, row.indicators, CfMethod::NICE, opt);
        if (ex.status != ExplainStatus::Found) continue;
        ++explained;
        const auto& cfs = ex.document["counterfactuals"];
        if (cfs.size() > 1) ++multi;

        // Text rows "x'k" must carry the same markers as the document deltas.
        std::istringstream text(ex.text);
        std::vector<std::string> rows;
        for (std::string line; std::getline(text, line);)
            if (line.rfind("x'", 0) == 0 && line.find(": p =") == std::string::npos) rows.push_back(line);
        if (rows.size() != cfs.size()) o.fail("text renders " + std::to_string(rows.size()) + " rows for " +
                                              std::to_string(cfs.size()) + " counterfactuals");
        for (std::size_t k = 0; k < cfs.size(); ++k) {
            std::size_t up = 0, down = 0;
            for (const auto& dl : cfs[k]["deltas"]) {
                const double a = dl["old"], b = dl["new"];
                const std::string mk = dl["marker"];
                if (mk == "↑") {
                    ++up;
                    if (!(b > a)) o.fail("↑ rendered without an increase");
                } else if (mk == "↓") {
                    ++down;
                    if (!(b < a)) o.fail("↓ rendered without a decrease");
                } else if (a != b) {
                    o.fail("changed value rendered without a marker");
                }
            }
            markers += up + down;
            if (k < rows.size()) {
                auto count = [&](const std::string& s, const std::string& needle) {
                    std::size_t n = 0;
                    for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
                    return n;
                };
                if (count(rows[k], "↑") != up || count(rows[k], "↓") != down)
                    o.fail("text markers disagree with the document for " + row.bank_id);
            }
        }
        if (explained >= 40 && multi > 0) break;
    }
    if (explained == 0) o.fail("no failing bank could be explained");
    if (multi == 0) o.fail("no bank received several NICE alternatives");
    const std::string d = std::to_string(explained) + " banks explained, " + std::to_string(markers) +
                          " markers checked, " + std::to_string(multi) + " with several alternatives";
    o.detail = o.pass ? d : o.detail + "; " + d;
    return o;
}

}  // namespace

int main() {
    const fs::path scratch = fs::temp_directory_path() / ("bankcf-acceptance-" + std::to_string(std::random_device{}()));
    fs::create_directories(scratch);

    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "metric oracle", 1, metric_oracle},
        {2, "distance contracts", 5, distance_contracts},
        {3, "SMOTE geometry", 5, smote_geometry},
        {4, "weighted-tree oracle", 30, weighted_tree_oracle},
        {5, "Pareto oracle", 10, pareto_oracle},
        {6, "generator validity", 300, generator_validity},
        {7, "qualitative ordering", 600, qualitative_ordering},
        {8, "benchmark grid", 900, [&] { return benchmark_grid(scratch); }},
        {9, "explanation fidelity", 60, explanation_fidelity},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.limit_s) o.fail("took " + fmt("%.1f", secs) + " s, limit " + fmt("%.0f", c.limit_s) + " s");
        for (const auto& w : o.warnings) std::cout << "  warning: " << w << "\n";
        std::cout << "criterion " << c.id << " (" << c.name << "): " << (o.pass ? "PASS" : "FAIL") << " - "
                  << o.detail << " [" << fmt("%.2f", secs) << " s]" << std::endl;
        if (!o.pass) ++failures;
    }
    std::error_code ec;
    fs::remove_all(scratch, ec);
    return failures == 0 ? 0 : 1;
}
