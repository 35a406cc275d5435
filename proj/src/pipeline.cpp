#include "bankcf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>

#include "bankcf/error.hpp"
#include "bankcf/fdic.hpp"
#include "csv_util.hpp"
#include "parallel.hpp"

namespace bankcf {

namespace {

template <typename F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

// Tracks files written by one command and deletes them unless committed.
class OutputGuard {
public:
    explicit OutputGuard(std::filesystem::path dir) : dir_(std::move(dir)) {}
    OutputGuard(const OutputGuard&) = delete;
    OutputGuard& operator=(const OutputGuard&) = delete;
    ~OutputGuard() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& p : written_) std::filesystem::remove(p, ec);
        if (created_dir_) std::filesystem::remove(dir_, ec);  // only succeeds when empty
    }

    void prepare() {
        std::error_code ec;
        if (!std::filesystem::exists(dir_)) {
            if (!std::filesystem::create_directories(dir_, ec) || ec)
                throw IoError("cannot create output directory '" + dir_.string() + "'");
            created_dir_ = true;
        } else if (!std::filesystem::is_directory(dir_)) {
            throw IoError("'" + dir_.string() + "' is not a directory");
        }
    }
    void track(const std::vector<std::filesystem::path>& paths) { written_.insert(written_.end(), paths.begin(), paths.end()); }
    void write(const std::filesystem::path& path, const std::string& content) {
        write_text_file(path, content);
        written_.push_back(path);
    }
    void commit() { committed_ = true; }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> written_;
    bool created_dir_ = false;
    bool committed_ = false;
};

DataTable ingest(const RunConfig& config, LoadDiagnostics& diag) {
    const auto schema = schema_for(config.group);
    if (config.source == DataSourceKind::Csv) return load_csv(config.data_csv, schema, &diag);
    FdicConfig fc;
    fc.base_url = config.fdic_url;
    fc.schema = schema;
    fc.date_from = config.fdic_from;
    fc.date_to = config.fdic_to;
    fc.page_size = config.fdic_page_size;
    fc.retries = static_cast<int>(config.fdic_retries);
    FetchDiagnostics fd;
    auto table = fetch_fdic_snapshot(fc, &fd);
    diag.rows_read = fd.records;
    diag.dropped_missing = fd.dropped_missing;
    diag.warnings = fd.warnings;
    return table;
}

Json report_json(const ClassificationReport& r) {
    return {{"accuracy", r.accuracy},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"tp", r.confusion.tp},
            {"fp", r.confusion.fp},
            {"tn", r.confusion.tn},
            {"fn", r.confusion.fn}};
}

Json partition_summary(const DataTable& t) {
    return {{"rows", t.size()}, {"positives", t.positives()}};
}

Json data_summary(const PreparedData& d) {
    return {{"in_sample", partition_summary(d.split.in_sample)},
            {"out_of_sample", partition_summary(d.split.out_of_sample)},
            {"out_of_time", partition_summary(d.split.out_of_time)},
            {"boundary", format_iso_date(d.split.boundary_date)},
            {"dropped_missing", d.diagnostics.dropped_missing}};
}

std::string model_id(ModelKind kind, BalancingTag strategy, GroupId group) {
    return to_string(kind) + "-" + to_string(strategy) + "-" + to_string(group);
}

std::string number_text(double v) {
    char buf[32];
    const double a = std::abs(v);
    if (v != 0.0 && (a < 1e-3 || a >= 1e7)) std::snprintf(buf, sizeof buf, "%.6e", v);
    else std::snprintf(buf, sizeof buf, "%.6f", v);
    std::string s = buf;
    if (s == "-0.000000") s = "0.000000";
    return s;
}

}  // namespace

PreparedData prepare_data(const RunConfig& config) {
    PreparedData out;
    auto raw = stage("ingest", [&] { return ingest(config, out.diagnostics); });
    if (raw.empty()) throw StageError("ingest", "no usable rows in the input");
    auto labeled = stage("label", [&] { return label_with_failure_lag(raw, std::chrono::months{config.lag_months}); });
    auto selected = stage("select", [&] { return select_predictors(labeled, predictor_group(config.group)); });
    out.split = stage("split", [&] {
        auto split = split_temporal_holdout(selected, config.boundary, config.holdout_ratio, derive_seed(*config.seed, "split"));
        const auto schema = fit_observed_ranges(split.in_sample);
        split.in_sample.schema = schema;
        split.out_of_sample.schema = schema;
        split.out_of_time.schema = schema;
        return split;
    });
    return out;
}

ClassificationReport evaluate_partition(const EnsembleModel& model, const LabeledMatrix& data) {
    if (!data.all_original())
        throw TrainingError("evaluation partition contains resampled rows; evaluation data must never be balanced");
    std::vector<int> predicted;
    predicted.reserve(data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i) predicted.push_back(model.predict_label(data.row(i)));
    return classification_report(predicted, data.labels());
}

TrainedModel train_on(const PreparedData& data, ModelKind kind, BalancingTag strategy, const RunConfig& config,
                      std::uint64_t seed) {
    const auto& split = data.split;
    const auto train_matrix = to_labeled_matrix(split.in_sample);
    const auto balanced = stage("balance", [&] {
        return apply_strategy(train_matrix, BalancingStrategy{strategy, config.smote_k, derive_seed(seed, "balance")});
    });
    TrainConfig tc;
    tc.n_trees = config.n_trees;
    tc.max_depth = config.max_depth;
    tc.min_samples_split = config.min_samples_split;
    tc.seed = derive_seed(seed, "fit");
    auto model = stage("fit", [&] { return fit_model(kind, balanced.data, balanced.weights, tc); });
    model.set_decision_threshold(config.decision_threshold);

    TrainedModel out;
    stage("evaluate", [&] {
        out.out_of_sample = evaluate_partition(model, to_labeled_matrix(split.out_of_sample));
        out.out_of_time = evaluate_partition(model, to_labeled_matrix(split.out_of_time));
        return 0;
    });
    out.artifact.id = model_id(kind, strategy, config.group);
    out.artifact.model = std::move(model);
    out.artifact.group = config.group;
    out.artifact.strategy = strategy;
    out.artifact.reference = split.in_sample;
    out.artifact.config_hash = config_hash(config);
    return out;
}

ReportBundle cmd_train(const RunConfig& config) {
    stage("config", [&] {
        validate_config(config);
        return 0;
    });
    const auto data = prepare_data(config);
    if (data.split.out_of_sample.empty() || data.split.out_of_time.empty())
        throw StageError("split", "an evaluation partition is empty");
    auto trained = train_on(data, config.model, config.strategy, config, derive_seed(*config.seed, "train"));

    ReportBundle bundle;
    bundle.config_hash = config_hash(config);
    bundle.config_text = config_to_text(config, true);
    bundle.reports["out_of_sample"] = trained.out_of_sample;
    bundle.reports["out_of_time"] = trained.out_of_time;
    bundle.data_summary = data_summary(data);
    bundle.data_summary["model_id"] = trained.artifact.id;

    stage("write", [&] {
        OutputGuard guard(config.out_dir);
        guard.prepare();
        guard.write(config.out_dir / "model.json", artifact_to_json(trained.artifact).dump() + "\n");
        guard.track(emit_report(bundle, ReportFormat::Json, config.out_dir));
        guard.track(emit_report(bundle, ReportFormat::Csv, config.out_dir));
        guard.commit();
        return 0;
    });
    return bundle;
}

ReportBundle cmd_benchmark(const RunConfig& config) {
    stage("config", [&] {
        validate_config(config);
        return 0;
    });
    const auto data = prepare_data(config);
    const auto& split = data.split;
    const std::uint64_t seed = *config.seed;

    struct Combo {
        ModelKind model;
        BalancingTag strategy;
    };
    std::vector<Combo> combos;
    for (auto m : all_model_kinds())
        for (auto s : all_balancing_tags()) combos.push_back({m, s});

    struct ComboResult {
        std::vector<RunRecord> runs;
        std::map<CellKey, GridCell> meta;  // reasons and factual counts
        std::map<std::string, ClassificationReport> reports;
    };
    std::vector<ComboResult> results(combos.size());

    detail::parallel_for(combos.size(), [&](std::size_t c) {
        const ModelKind kind = combos[c].model;
        const BalancingTag strategy = combos[c].strategy;
        const std::string combo_label = to_string(kind) + "/" + to_string(strategy);
        auto& res = results[c];
        auto fail_all = [&](const std::string& why) {
            for (auto m : config.methods) res.meta[{kind, strategy, m}].reason = why;
        };

        std::optional<TrainedModel> trained;
        try {
            trained = train_on(data, kind, strategy, config, derive_seed(seed, "train/" + combo_label));
        } catch (const std::exception& e) {
            fail_all(std::string("training failed: ") + e.what());
            return;
        }
        res.reports[combo_label + "/out_of_sample"] = trained->out_of_sample;
        res.reports[combo_label + "/out_of_time"] = trained->out_of_time;
        const auto& model = trained->artifact.model;

        std::vector<std::size_t> factuals;
        for (std::size_t i = 0; i < split.out_of_sample.size(); ++i)
            if (model.predict_label(split.out_of_sample.rows[i].indicators) == 1) factuals.push_back(i);
        if (factuals.size() > config.max_factuals) {
            std::mt19937_64 rng(derive_seed(seed, "sample/" + combo_label));
            std::shuffle(factuals.begin(), factuals.end(), rng);
            factuals.resize(config.max_factuals);
            std::sort(factuals.begin(), factuals.end());
        }

        for (auto method : config.methods) {
            const CellKey key{kind, strategy, method};
            auto& meta = res.meta[key];
            meta.factuals = factuals.size();
            if (factuals.empty()) {
                meta.reason = "model predicts no failing bank in the out-of-sample partition";
                continue;
            }
            std::string first_reason;
            for (std::size_t fi = 0; fi < factuals.size(); ++fi) {
                const auto& row = split.out_of_sample.rows[factuals[fi]];
                CFQuery q;
                q.factual = row.indicators;
                q.desired_class = 0;
                q.frozen_features = {config.frozen_features.begin(), config.frozen_features.end()};
                q.max_counterfactuals = config.max_counterfactuals;
                q.k_plausibility = config.desiderata.k_plaus;
                MocConfig moc;
                moc.population_size = config.moc_population;
                moc.generations = config.moc_generations;
                moc.seed = derive_seed(seed, "moc/" + combo_label + "/" + std::to_string(factuals[fi]));
                try {
                    const auto result = generate(method, q, model, split.in_sample, moc);
                    if (!result.found()) {
                        ++meta.failed_factuals;
                        if (first_reason.empty()) first_reason = result.reason;
                        continue;
                    }
                    for (const auto& cf : result.counterfactuals)
                        res.runs.emplace_back(key, desiderata(q.factual, cf, model, split.in_sample, config.desiderata));
                } catch (const std::exception& e) {
                    ++meta.failed_factuals;
                    if (first_reason.empty()) first_reason = std::string("error: ") + e.what();
                }
            }
            if (meta.failed_factuals == factuals.size())
                meta.reason = "no counterfactual for any of " + std::to_string(factuals.size()) +
                              " factuals (first: " + first_reason + ")";
        }
    });

    std::vector<RunRecord> runs;
    std::vector<std::pair<CellKey, std::string>> empty;
    ReportBundle bundle;
    for (auto& r : results) {
        runs.insert(runs.end(), r.runs.begin(), r.runs.end());
        for (const auto& [key, meta] : r.meta)
            if (!meta.reason.empty()) empty.emplace_back(key, meta.reason);
        bundle.reports.insert(r.reports.begin(), r.reports.end());
    }
    auto grid = aggregate_benchmark(runs, empty);
    for (auto& r : results) {
        for (const auto& [key, meta] : r.meta) {
            auto& cell = grid.cells[key];
            cell.factuals = meta.factuals;
            cell.failed_factuals = meta.failed_factuals;
            if (cell.empty() && cell.reason.empty()) cell.reason = meta.reason;
        }
    }
    std::string seeds = std::to_string(seed);
    grid.provenance["config_hash"] = config_hash(config);
    grid.provenance["seeds"] = seeds;
    grid.provenance["group"] = to_string(config.group);
    grid.provenance["max_factuals"] = std::to_string(config.max_factuals);

    bundle.config_hash = config_hash(config);
    bundle.config_text = config_to_text(config, true);
    bundle.grid = std::move(grid);
    bundle.data_summary = data_summary(data);

    stage("write", [&] {
        OutputGuard guard(config.out_dir);
        guard.prepare();
        for (auto f : {ReportFormat::Csv, ReportFormat::Json, ReportFormat::PlotData})
            guard.track(emit_report(bundle, f, config.out_dir));
        guard.commit();
        return 0;
    });
    return bundle;
}

Direction direction(double old_value, double new_value) noexcept {
    if (new_value > old_value) return Direction::Up;
    if (new_value < old_value) return Direction::Down;
    return Direction::Unchanged;
}

std::string to_string(Direction d) {
    switch (d) {
    case Direction::Up: return "increase";
    case Direction::Down: return "decrease";
    case Direction::Unchanged: return "unchanged";
    }
    return "?";
}

std::string marker(Direction d) {
    switch (d) {
    case Direction::Up: return "↑";
    case Direction::Down: return "↓";
    case Direction::Unchanged: return "";
    }
    return "";
}

std::vector<double> factual_from_map(const ModelArtifact& artifact, const std::map<std::string, double>& values) {
    const auto& names = artifact.model.feature_names();
    for (const auto& [k, v] : values)
        if (std::find(names.begin(), names.end(), k) == names.end())
            throw SchemaError("'" + k + "' is not a feature of model " + artifact.id, k);
    std::vector<double> out;
    out.reserve(names.size());
    for (const auto& n : names) {
        auto it = values.find(n);
        if (it == values.end()) throw SchemaError("missing value for " + n, n);
        if (!std::isfinite(it->second)) throw SchemaError("non-finite value for " + n, n);
        out.push_back(it->second);
    }
    return out;
}

Explanation cmd_explain(const ModelArtifact& artifact, std::span<const double> factual, CfMethod method,
                        const ExplainOptions& options) {
    const auto& model = artifact.model;
    const auto& names = model.feature_names();
    if (factual.size() != names.size())
        throw ShapeError("record has " + std::to_string(factual.size()) + " values, model expects " +
                         std::to_string(names.size()));

    const double p = model.predict_proba(factual);
    const int label = model.predict_label(factual);

    Explanation ex;
    Json doc;
    doc["model"] = {{"id", artifact.id},
                    {"kind", to_string(model.kind())},
                    {"strategy", to_string(artifact.strategy)},
                    {"group", to_string(artifact.group)}};
    doc["bank"] = {{"bank_id", options.bank_id},
                   {"report_date", options.report_date ? format_iso_date(*options.report_date) : std::string()}};
    doc["method"] = to_string(method);
    doc["config_hash"] = artifact.config_hash;
    Json fact = Json::object();
    for (std::size_t f = 0; f < names.size(); ++f) fact[names[f]] = factual[f];
    doc["factual"] = fact;
    doc["prediction"] = {{"probability", p}, {"label", label}};
    doc["counterfactuals"] = Json::array();

    std::ostringstream text;
    text << "Bank " << (options.bank_id.empty() ? "(unnamed)" : options.bank_id);
    if (options.report_date) text << " at " << format_iso_date(*options.report_date);
    text << "\nModel " << artifact.id << ", method " << to_string(method) << "\n";
    text << "Prediction: " << (label == 1 ? "failing" : "non-failing") << " (p = " << number_text(p) << ")\n";

    if (label == 0) {
        ex.status = ExplainStatus::NoActionNeeded;
        doc["status"] = "no_action_needed";
        doc["reason"] = "no action needed: the bank is already predicted as non-failing";
        text << "No action needed: the bank is already predicted as non-failing.\n";
        ex.document = std::move(doc);
        ex.text = text.str();
        return ex;
    }

    CFQuery q;
    q.factual.assign(factual.begin(), factual.end());
    q.desired_class = 0;
    q.frozen_features = {options.frozen_features.begin(), options.frozen_features.end()};
    q.max_counterfactuals = options.max_counterfactuals;
    q.k_plausibility = options.desiderata.k_plaus;
    const auto result = generate(method, q, model, artifact.reference, options.moc);

    if (!result.found()) {
        ex.status = ExplainStatus::NotFound;
        doc["status"] = "no_counterfactual";
        doc["reason"] = result.reason;
        text << "No counterfactual found: " << result.reason << "\n";
        ex.document = std::move(doc);
        ex.text = text.str();
        return ex;
    }

    ex.status = ExplainStatus::Found;
    doc["status"] = "counterfactuals_found";
    const std::size_t n = result.counterfactuals.size();
    text << to_string(method) << " generates " << n << " counterfactual" << (n == 1 ? "" : "s") << "\n";

    // Column layout: label, then one column per feature.
    std::vector<std::string> header{""};
    for (const auto& name : names) header.push_back(name);
    std::vector<std::vector<std::string>> table{header};
    std::vector<std::string> frow{"x"};
    for (double v : factual) frow.push_back(number_text(v));
    table.push_back(frow);

    for (std::size_t k = 0; k < n; ++k) {
        const auto& cf = result.counterfactuals[k];
        const auto d = desiderata(factual, cf, model, artifact.reference, options.desiderata);
        Json deltas = Json::array();
        Json values = Json::object();
        std::vector<std::string> row{"x'" + std::to_string(k + 1)};
        for (std::size_t f = 0; f < names.size(); ++f) {
            const auto dir = direction(factual[f], cf.values[f]);
            values[names[f]] = cf.values[f];
            deltas.push_back({{"feature", names[f]},
                              {"old", factual[f]},
                              {"new", cf.values[f]},
                              {"direction", to_string(dir)},
                              {"marker", marker(dir)}});
            const auto m = marker(dir);
            row.push_back(m.empty() ? number_text(cf.values[f]) : m + " " + number_text(cf.values[f]));
        }
        table.push_back(row);
        doc["counterfactuals"].push_back(
            {{"rank", k + 1},
             {"values", values},
             {"deltas", deltas},
             {"prediction", {{"probability", cf.predicted_proba}, {"label", model.predict_label(cf.values)}}},
             {"desiderata",
              {{"valid_flip", d.valid_flip},
               {"validity_threshold", d.valid_threshold},
               {"proximity", d.proximity},
               {"sparsity", d.sparsity},
               {"plausibility", d.plausibility}}}});
    }

    // Pad columns by code point count so the arrows line up.
    auto width = [](const std::string& s) {
        return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
    };
    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto& r : table)
        for (std::size_t c = 0; c < r.size(); ++c) widths[c] = std::max(widths[c], width(r[c]));
    for (const auto& r : table) {
        std::string line;
        for (std::size_t c = 0; c < r.size(); ++c) {
            const std::string pad(widths[c] - width(r[c]), ' ');
            line += c == 0 ? r[c] + pad : "  " + pad + r[c];
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        text << line << "\n";
    }
    for (std::size_t k = 0; k < n; ++k) {
        const auto& j = doc["counterfactuals"][k];
        const auto& ds = j["desiderata"];
        text << "x'" << (k + 1) << ": p = " << number_text(j["prediction"]["probability"].get<double>())
             << ", valid = " << (ds["valid_flip"].get<bool>() ? "yes" : "no")
             << ", proximity = " << number_text(ds["proximity"].get<double>())
             << ", sparsity = " << ds["sparsity"].get<std::size_t>()
             << ", plausibility = " << number_text(ds["plausibility"].get<double>()) << "\n";
    }

    ex.document = std::move(doc);
    ex.text = text.str();
    return ex;
}

ReportFormat parse_report_format(std::string_view text) {
    if (text == "csv") return ReportFormat::Csv;
    if (text == "json") return ReportFormat::Json;
    if (text == "plotdata") return ReportFormat::PlotData;
    throw ConfigError("unknown report format '" + std::string(text) + "'");
}

std::vector<std::filesystem::path> emit_report(const ReportBundle& bundle, ReportFormat format,
                                               const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw IoError("output directory '" + dir.string() + "' does not exist");
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::string& name, const std::string& content) {
        const auto path = dir / name;
        write_text_file(path, content);
        written.push_back(path);
    };

    switch (format) {
    case ReportFormat::Csv: {
        if (!bundle.reports.empty()) {
            std::ostringstream out;
            out << "partition,accuracy,precision,recall,f1,tp,fp,tn,fn,config_hash\n";
            for (const auto& [name, r] : bundle.reports)
                out << detail::csv_field(name) << ',' << fixed6(r.accuracy) << ',' << fixed6(r.precision) << ','
                    << fixed6(r.recall) << ',' << fixed6(r.f1) << ',' << r.confusion.tp << ',' << r.confusion.fp << ','
                    << r.confusion.tn << ',' << r.confusion.fn << ',' << bundle.config_hash << '\n';
            put("classification.csv", out.str());
        }
        if (bundle.grid) put("benchmark.csv", grid_to_csv(*bundle.grid));
        break;
    }
    case ReportFormat::Json: {
        Json j;
        j["config_hash"] = bundle.config_hash;
        j["config"] = bundle.config_text;
        j["data"] = bundle.data_summary;
        Json reports = Json::object();
        for (const auto& [name, r] : bundle.reports) reports[name] = report_json(r);
        j["classification"] = reports;
        if (bundle.grid) j["benchmark"] = grid_to_json(*bundle.grid);
        if (!bundle.explanations.empty()) j["explanations"] = bundle.explanations;
        put("report.json", canonical_json(j));
        break;
    }
    case ReportFormat::PlotData: {
        if (!bundle.grid) throw InputError("plot data needs a benchmark grid");
        auto j = grid_to_plotdata(*bundle.grid);
        j["config_hash"] = bundle.config_hash;
        put("benchmark_plot.json", canonical_json(j));
        break;
    }
    }
    return written;
}

}  // namespace bankcf
