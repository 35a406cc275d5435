#include "bankcf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bankcf/error.hpp"
#include "csv_util.hpp"

namespace bankcf {

double f1_score(double precision, double recall) noexcept {
    const double denom = precision + recall;
    return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

ClassificationReport classification_report(std::span<const int> predicted, std::span<const int> actual) {
    if (predicted.size() != actual.size()) throw ShapeError("prediction and label vectors differ in length");
    if (predicted.empty()) throw InputError("cannot evaluate on zero rows");
    ClassificationReport r;
    auto& c = r.confusion;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool p = predicted[i] == 1, a = actual[i] == 1;
        if (p && a) ++c.tp;
        else if (p) ++c.fp;
        else if (a) ++c.fn;
        else ++c.tn;
    }
    const auto n = static_cast<double>(c.total());
    r.accuracy = static_cast<double>(c.tp + c.tn) / n;
    r.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    r.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    r.f1 = c.tp == 0 ? 0.0 : f1_score(r.precision, r.recall);
    return r;
}

ClassificationReport classification_report(const EnsembleModel& model, const DataTable& table) {
    if (table.feature_names() != model.feature_names())
        throw ShapeError("table features do not match the model's features");
    std::vector<int> predicted, actual;
    predicted.reserve(table.size());
    actual.reserve(table.size());
    for (const auto& r : table.rows) {
        predicted.push_back(model.predict_label(r.indicators));
        actual.push_back(r.failed_label);
    }
    return classification_report(predicted, actual);
}

DesiderataRecord desiderata(std::span<const double> factual, const Counterfactual& cf, const EnsembleModel& model,
                            const DataTable& training, const DesiderataConfig& config) {
    if (factual.size() != cf.values.size() || factual.size() != training.feature_count())
        throw ShapeError("factual, counterfactual and training schema differ in arity");
    if (!(config.epsilon > 0.0) || config.k_plaus < 1) throw ParameterError("invalid desiderata configuration");
    const auto& schema = training.schema;
    auto distance = [&](std::span<const double> a, std::span<const double> b) {
        return config.distance == DistanceKind::Gower ? gower_distance(a, b, schema) : heom_distance(a, b, schema);
    };

    DesiderataRecord rec;
    const int desired = 1 - model.predict_label(factual);
    rec.valid_flip = model.predict_label(cf.values) == desired;
    rec.proximity = distance(factual, cf.values);
    rec.valid_threshold = rec.proximity <= config.epsilon;
    rec.sparsity = changed_features(factual, cf.values).size();

    if (!training.empty()) {
        std::vector<double> d;
        d.reserve(training.size());
        for (const auto& r : training.rows) d.push_back(distance(cf.values, r.indicators));
        const std::size_t k = std::min(config.k_plaus, d.size());
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) sum += d[i];
        rec.plausibility = sum / static_cast<double>(k);
    }
    return rec;
}

std::string to_string(const CellKey& key) {
    return to_string(key.model) + "/" + to_string(key.strategy) + "/" + to_string(key.method);
}

namespace {

MetricSummary summarize(std::vector<double> values) {
    MetricSummary s;
    s.n = values.size();
    if (values.empty()) return s;
    // Sorted summation makes the result independent of record order.
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    std::vector<double> sq;
    sq.reserve(values.size());
    for (double v : values) sq.push_back((v - s.mean) * (v - s.mean));
    std::sort(sq.begin(), sq.end());
    double ss = 0.0;
    for (double v : sq) ss += v;
    s.std = std::sqrt(ss / static_cast<double>(values.size()));
    return s;
}

}  // namespace

BenchmarkGrid aggregate_benchmark(std::span<const RunRecord> runs,
                                  const std::vector<std::pair<CellKey, std::string>>& empty_cells) {
    std::map<CellKey, std::map<std::string, std::vector<double>>> raw;
    for (const auto& [key, rec] : runs) {
        auto& m = raw[key];
        m["validity"].push_back(rec.valid_flip ? 1.0 : 0.0);
        m["proximity"].push_back(rec.proximity);
        m["sparsity"].push_back(static_cast<double>(rec.sparsity));
        m["plausibility"].push_back(rec.plausibility);
        m[kThresholdValidity].push_back(rec.valid_threshold ? 1.0 : 0.0);
    }
    BenchmarkGrid grid;
    for (auto& [key, metrics] : raw) {
        auto& cell = grid.cells[key];
        for (auto& [name, values] : metrics) {
            cell.metrics[name] = summarize(std::move(values));
            cell.n = cell.metrics[name].n;
        }
    }
    for (const auto& [key, reason] : empty_cells) {
        auto& cell = grid.cells[key];
        if (cell.empty() && cell.reason.empty()) cell.reason = reason;
    }
    return grid;
}

std::string grid_to_csv(const BenchmarkGrid& grid) {
    auto prov = [&](const std::string& k) {
        auto it = grid.provenance.find(k);
        return it == grid.provenance.end() ? std::string() : it->second;
    };
    std::ostringstream out;
    out << "model,strategy,method,metric,mean,std,n,reason,config_hash,seeds\n";
    for (const auto& [key, cell] : grid.cells) {
        for (const auto& metric : desiderata_metrics()) {
            out << to_string(key.model) << ',' << to_string(key.strategy) << ',' << to_string(key.method) << ','
                << metric << ',';
            auto it = cell.metrics.find(metric);
            if (it != cell.metrics.end() && it->second.n > 0)
                out << fixed6(it->second.mean) << ',' << fixed6(it->second.std) << ',' << it->second.n << ',';
            else
                out << ",,0,";
            out << detail::csv_field(cell.empty() ? cell.reason : std::string()) << ','
                << detail::csv_field(prov("config_hash")) << ',' << detail::csv_field(prov("seeds")) << '\n';
        }
    }
    return out.str();
}

Json grid_to_json(const BenchmarkGrid& grid) {
    Json cells = Json::array();
    for (const auto& [key, cell] : grid.cells) {
        Json c;
        c["model"] = to_string(key.model);
        c["strategy"] = to_string(key.strategy);
        c["method"] = to_string(key.method);
        c["n"] = cell.n;
        c["factuals"] = cell.factuals;
        c["failed_factuals"] = cell.failed_factuals;
        if (cell.empty()) {
            c["reason"] = cell.reason;
            c["metrics"] = Json::object();
        } else {
            Json m = Json::object();
            for (const auto& [name, s] : cell.metrics) m[name] = {{"mean", s.mean}, {"std", s.std}, {"n", s.n}};
            c["metrics"] = m;
        }
        cells.push_back(std::move(c));
    }
    Json prov = Json::object();
    for (const auto& [k, v] : grid.provenance) prov[k] = v;
    return {{"cells", cells}, {"provenance", prov}};
}

Json grid_to_plotdata(const BenchmarkGrid& grid) {
    // series[metric][model][strategy] = [{method, mean, std, n}]
    Json series = Json::object();
    for (const auto& metric : desiderata_metrics()) series[metric] = Json::object();
    for (const auto& [key, cell] : grid.cells) {
        for (const auto& metric : desiderata_metrics()) {
            Json point{{"method", to_string(key.method)}};
            auto it = cell.metrics.find(metric);
            if (it != cell.metrics.end() && it->second.n > 0) {
                point["mean"] = it->second.mean;
                point["std"] = it->second.std;
                point["n"] = it->second.n;
            } else {
                point["mean"] = nullptr;
                point["std"] = nullptr;
                point["n"] = 0;
                point["reason"] = cell.reason;
            }
            series[metric][to_string(key.model)][to_string(key.strategy)].push_back(std::move(point));
        }
    }
    Json prov = Json::object();
    for (const auto& [k, v] : grid.provenance) prov[k] = v;
    return {{"chart", "mean_std_errorbars"}, {"metrics", desiderata_metrics()}, {"series", series},
            {"provenance", prov}};
}

}  // namespace bankcf
