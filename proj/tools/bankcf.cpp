// Command-line front end: train, benchmark, explain, serve, make-desk-data.
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "bankcf/artifact.hpp"
#include "bankcf/config.hpp"
#include "bankcf/desk_data.hpp"
#include "bankcf/error.hpp"
#include "bankcf/pipeline.hpp"
#include "bankcf/service.hpp"

namespace {

using namespace bankcf;

// Flags shared by the pipeline commands. Precedence: config file, then
// BANKCF_* environment variables, then flags.
struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string data;
    std::string group;
    std::vector<std::string> sets;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--config", config, "key = value configuration file");
        cmd->add_option("--seed", seed, "base random seed");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--data", data, "input CSV (sets data.csv)");
        cmd->add_option("--group", group, "predictor group I, II or III");
        cmd->add_option("--set", sets, "override any configuration key, as key=value")->take_all();
    }

    RunConfig resolve() const {
        auto c = load_config(config.empty() ? std::nullopt : std::optional<std::filesystem::path>(config));
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed) c.seed = seed;
        if (!out.empty()) c.out_dir = out;
        if (!data.empty()) {
            c.data_csv = data;
            c.source = DataSourceKind::Csv;
        }
        if (!group.empty()) set_config_value(c, "model.group", group);
        return c;
    }
};

std::map<std::string, double> parse_values(const std::string& text) {
    std::map<std::string, double> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto comma = text.find(',', start);
        if (comma == std::string::npos) comma = text.size();
        const auto item = text.substr(start, comma - start);
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw InputError("--values expects NAME=VALUE pairs, got '" + item + "'");
        try {
            out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
        } catch (const std::exception&) {
            throw InputError("not a number in '" + item + "'");
        }
        start = comma + 1;
    }
    return out;
}

struct Record {
    std::vector<double> values;
    std::string bank_id;
    std::optional<Date> date;
};

Record read_record(const ModelArtifact& artifact, const std::string& path, const std::string& bank_id,
                   const std::string& date) {
    Record r;
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open '" + path + "'");
        const auto j = Json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw InputError("'" + path + "' is not a JSON object");
        const auto& ind = j.contains("indicators") ? j["indicators"] : j;
        std::map<std::string, double> values;
        for (auto it = ind.begin(); it != ind.end(); ++it)
            if (it.value().is_number()) values[it.key()] = it.value().get<double>();
            else if (it.key() != "bank_id" && it.key() != "report_date")
                throw SchemaError("value for " + it.key() + " is not a number", it.key());
        r.values = factual_from_map(artifact, values);
        r.bank_id = j.value("bank_id", bank_id);
        if (j.contains("report_date")) r.date = parse_iso_date(j["report_date"].get<std::string>());
        return r;
    }
    const auto table = load_csv(path, schema_for(artifact.model.feature_names()));
    std::optional<Date> want;
    if (!date.empty()) want = quarter_end(parse_iso_date(date));
    std::set<std::string> banks;
    const BankQuarterRecord* pick = nullptr;
    for (const auto& row : table.rows) {
        if (!bank_id.empty() && row.bank_id != bank_id) continue;
        if (want && row.report_date != *want) continue;
        banks.insert(row.bank_id);
        if (!pick || row.report_date > pick->report_date) pick = &row;  // latest quarter by default
    }
    if (!pick) throw InputError("no matching record in '" + path + "'");
    if (banks.size() > 1) throw InputError("records of several banks match; pass --bank-id");
    r.values = pick->indicators;
    r.bank_id = pick->bank_id;
    r.date = pick->report_date;
    return r;
}

int run(int argc, char** argv) {
    CLI::App app{"Counterfactual explanations for bank failure prediction"};
    app.require_subcommand(1);

    CommonFlags train_flags;
    std::string train_model, train_strategy;
    auto* train = app.add_subcommand("train", "fit one model and report out-of-sample and out-of-time metrics");
    train_flags.add_to(train);
    train->add_option("--model", train_model, "DecisionTree, RandomForest or ExtraTrees");
    train->add_option("--strategy", train_strategy, "Original, Undersampling, Oversampling, SMOTE or CostSensitive");

    CommonFlags bench_flags;
    std::vector<std::string> bench_methods;
    std::optional<std::size_t> bench_cap;
    auto* bench = app.add_subcommand("benchmark", "score every model x strategy x method cell");
    bench_flags.add_to(bench);
    bench->add_option("--method", bench_methods, "restrict to these methods");
    bench->add_option("--max-factuals", bench_cap, "factuals explained per cell");

    CommonFlags ex_flags;
    std::string ex_model, ex_method = "NICE", ex_record, ex_bank, ex_date, ex_values, ex_format = "text";
    std::vector<std::string> ex_frozen;
    std::optional<std::size_t> ex_max;
    auto* explain = app.add_subcommand("explain", "explain one bank's prediction with counterfactuals");
    ex_flags.add_to(explain);
    explain->add_option("--model", ex_model, "model file written by train")->required();
    explain->add_option("--method", ex_method, "WhatIf, NICE or MOC");
    explain->add_option("--record", ex_record, "CSV or JSON file holding the bank's indicators");
    explain->add_option("--bank-id", ex_bank, "bank to pick from a CSV record file");
    explain->add_option("--date", ex_date, "report date to pick from a CSV record file");
    explain->add_option("--values", ex_values, "inline indicators, NAME=VALUE,...");
    explain->add_option("--frozen", ex_frozen, "features that must not change");
    explain->add_option("--max-cf", ex_max, "maximum counterfactuals");
    explain->add_option("--format", ex_format, "text or json")->check(CLI::IsMember({"text", "json"}));

    CommonFlags serve_flags;
    std::vector<std::string> serve_models;
    std::string serve_host;
    std::optional<int> serve_port;
    auto* serve = app.add_subcommand("serve", "HTTP service for predictions and counterfactuals");
    serve_flags.add_to(serve);
    serve->add_option("--model", serve_models, "model files to serve");
    serve->add_option("--host", serve_host, "bind address");
    serve->add_option("--port", serve_port, "port");

    std::string desk_out = "data/desk_banks.csv";
    std::optional<std::uint64_t> desk_seed;
    auto* desk = app.add_subcommand("make-desk-data", "write the bundled synthetic desk dataset");
    desk->add_option("--out", desk_out, "output CSV path");
    desk->add_option("--seed", desk_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    if (*train) {
        auto c = train_flags.resolve();
        if (!train_model.empty()) set_config_value(c, "model.kind", train_model);
        if (!train_strategy.empty()) set_config_value(c, "model.strategy", train_strategy);
        const auto bundle = cmd_train(c);
        std::cout << "model written to " << (c.out_dir / "model.json").string() << " (config " << bundle.config_hash
                  << ")\n";
        for (const auto& [name, r] : bundle.reports)
            std::cout << name << ": accuracy " << fixed6(r.accuracy) << "  f1 " << fixed6(r.f1) << "\n";
        return 0;
    }
    if (*bench) {
        auto c = bench_flags.resolve();
        if (!bench_methods.empty()) {
            std::string joined;
            for (const auto& m : bench_methods) joined += (joined.empty() ? "" : ",") + m;
            set_config_value(c, "cf.methods", joined);
        }
        if (bench_cap) c.max_factuals = *bench_cap;
        const auto bundle = cmd_benchmark(c);
        std::size_t populated = 0;
        for (const auto& [key, cell] : bundle.grid->cells) populated += cell.empty() ? 0 : 1;
        std::cout << bundle.grid->cells.size() << " cells (" << populated << " populated) written to "
                  << c.out_dir.string() << "\n";
        return 0;
    }
    if (*explain) {
        auto c = ex_flags.resolve();
        const auto artifact = load_artifact(ex_model);
        const auto method = parse_cf_method(ex_method);
        if (method == CfMethod::MOC && !c.seed) throw ConfigError("seed: MOC needs --seed");
        Record rec;
        if (!ex_values.empty()) rec.values = factual_from_map(artifact, parse_values(ex_values));
        else if (!ex_record.empty()) rec = read_record(artifact, ex_record, ex_bank, ex_date);
        else throw InputError("give the bank's indicators with --record or --values");
        if (rec.bank_id.empty()) rec.bank_id = ex_bank;

        ExplainOptions opt;
        opt.frozen_features = ex_frozen.empty() ? c.frozen_features : ex_frozen;
        opt.max_counterfactuals = ex_max.value_or(c.max_counterfactuals);
        opt.moc.population_size = c.moc_population;
        opt.moc.generations = c.moc_generations;
        opt.moc.seed = derive_seed(c.seed.value_or(0), "explain");
        opt.desiderata = c.desiderata;
        opt.bank_id = rec.bank_id;
        opt.report_date = rec.date;
        const auto ex = cmd_explain(artifact, rec.values, method, opt);
        if (!ex_flags.out.empty()) {
            std::filesystem::create_directories(c.out_dir);
            write_text_file(c.out_dir / "explanation.json", canonical_json(ex.document));
            write_text_file(c.out_dir / "explanation.txt", ex.text);
        }
        std::cout << (ex_format == "json" ? canonical_json(ex.document) : ex.text);
        return ex.exit_code();
    }
    if (*serve) {
        auto c = serve_flags.resolve();
        if (!serve_models.empty()) {
            c.serve_models.clear();
            for (const auto& m : serve_models) c.serve_models.emplace_back(m);
        }
        if (!serve_host.empty()) c.host = serve_host;
        if (serve_port) c.port = *serve_port;
        serve_http(c);
        return 0;
    }
    if (*desk) {
        DeskDataOptions opt;
        if (desk_seed) opt.seed = *desk_seed;
        const auto table = make_desk_dataset(opt);
        const auto labeled = label_with_failure_lag(table);
        write_csv(labeled, desk_out);
        std::cout << labeled.size() << " rows, " << labeled.positives() << " labelled failing, written to "
                  << desk_out << "\n";
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return 1;
}
