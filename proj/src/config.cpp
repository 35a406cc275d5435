#include "bankcf/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "bankcf/error.hpp"
#include "csv_util.hpp"

namespace bankcf {

namespace {

using detail::trim;

std::string unquote(std::string_view v) {
    v = trim(v);
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\'')))
        v = v.substr(1, v.size() - 2);
    return std::string(v);
}

std::vector<std::string> parse_list(std::string_view v) {
    v = trim(v);
    if (!v.empty() && v.front() == '[') {
        if (v.back() != ']') throw ConfigError("unterminated list '" + std::string(v) + "'");
        v = v.substr(1, v.size() - 2);
    }
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const auto item = unquote(v.substr(start, comma == std::string_view::npos ? v.npos : comma - start));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

template <typename T>
T parse_number(const std::string& key, std::string_view text) {
    text = trim(text);
    T out{};
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc{} || p != text.data() + text.size())
        throw ConfigError(key + ": expected a number, got '" + std::string(text) + "'");
    return out;
}

std::string num(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

struct KeyDef {
    const char* name;
    bool hashed;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

// Enum parsers raise their own error types; normalise them to ConfigError.
template <typename F>
auto as_config(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

const std::vector<KeyDef>& key_defs() {
    static const std::vector<KeyDef> defs = [] {
        std::vector<KeyDef> d;
        auto size_key = [&](const char* name, bool hashed, std::size_t RunConfig::*field) {
            d.push_back({name, hashed, [field](const RunConfig& c) { return std::to_string(c.*field); },
                         [field](RunConfig& c, const std::string& k, const std::string& v) {
                             c.*field = parse_number<std::size_t>(k, v);
                         }});
        };
        auto double_key = [&](const char* name, bool hashed, double RunConfig::*field) {
            d.push_back({name, hashed, [field](const RunConfig& c) { return num(c.*field); },
                         [field](RunConfig& c, const std::string& k, const std::string& v) {
                             c.*field = parse_number<double>(k, v);
                         }});
        };

        d.push_back({"data.source", true,
                     [](const RunConfig& c) { return c.source == DataSourceKind::Csv ? "csv" : "fdic"; },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         const auto s = lower(unquote(v));
                         if (s == "csv") c.source = DataSourceKind::Csv;
                         else if (s == "fdic") c.source = DataSourceKind::Fdic;
                         else throw ConfigError(k + ": expected csv or fdic, got '" + s + "'");
                     }});
        d.push_back({"data.csv", true, [](const RunConfig& c) { return c.data_csv.generic_string(); },
                     [](RunConfig& c, const std::string&, const std::string& v) { c.data_csv = unquote(v); }});
        d.push_back({"data.fdic_url", true, [](const RunConfig& c) { return c.fdic_url; },
                     [](RunConfig& c, const std::string&, const std::string& v) { c.fdic_url = unquote(v); }});
        auto date_key = [&](const char* name, std::optional<Date> RunConfig::*field) {
            d.push_back({name, true,
                         [field](const RunConfig& c) {
                             return (c.*field) ? format_iso_date(*(c.*field)) : std::string();
                         },
                         [field](RunConfig& c, const std::string& k, const std::string& v) {
                             const auto s = unquote(v);
                             if (s.empty()) c.*field = std::nullopt;
                             else c.*field = as_config(k, [&] { return parse_iso_date(s); });
                         }});
        };
        date_key("data.from", &RunConfig::fdic_from);
        date_key("data.to", &RunConfig::fdic_to);
        size_key("data.fdic_page_size", true, &RunConfig::fdic_page_size);
        size_key("data.fdic_retries", false, &RunConfig::fdic_retries);

        d.push_back({"split.lag_months", true, [](const RunConfig& c) { return std::to_string(c.lag_months); },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.lag_months = parse_number<int>(k, v);
                     }});
        d.push_back({"split.boundary", true, [](const RunConfig& c) { return format_iso_date(c.boundary); },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.boundary = as_config(k, [&] { return parse_iso_date(unquote(v)); });
                     }});
        double_key("split.holdout_ratio", true, &RunConfig::holdout_ratio);

        d.push_back({"model.group", true, [](const RunConfig& c) { return to_string(c.group); },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.group = as_config(k, [&] { return parse_group(unquote(v)); });
                     }});
        d.push_back({"model.kind", true, [](const RunConfig& c) { return to_string(c.model); },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.model = as_config(k, [&] { return parse_model_kind(unquote(v)); });
                     }});
        d.push_back({"model.strategy", true, [](const RunConfig& c) { return to_string(c.strategy); },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.strategy = as_config(k, [&] { return parse_balancing(unquote(v)); });
                     }});
        size_key("model.n_trees", true, &RunConfig::n_trees);
        d.push_back({"model.max_depth", true,
                     [](const RunConfig& c) { return c.max_depth ? std::to_string(*c.max_depth) : std::string(); },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         const auto s = unquote(v);
                         if (s.empty() || lower(s) == "none") c.max_depth = std::nullopt;
                         else c.max_depth = parse_number<std::size_t>(k, s);
                     }});
        size_key("model.min_samples_split", true, &RunConfig::min_samples_split);
        double_key("model.threshold", true, &RunConfig::decision_threshold);
        d.push_back({"model.smote_k", true, [](const RunConfig& c) { return std::to_string(c.smote_k); },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.smote_k = parse_number<int>(k, v);
                     }});

        d.push_back({"cf.methods", true,
                     [](const RunConfig& c) {
                         std::vector<std::string> names;
                         for (auto m : c.methods) names.push_back(to_string(m));
                         return join(names);
                     },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.methods.clear();
                         for (const auto& item : parse_list(v))
                             c.methods.push_back(as_config(k, [&] { return parse_cf_method(item); }));
                     }});
        d.push_back({"cf.frozen", true, [](const RunConfig& c) { return join(c.frozen_features); },
                     [](RunConfig& c, const std::string&, const std::string& v) { c.frozen_features = parse_list(v); }});
        size_key("cf.max_counterfactuals", true, &RunConfig::max_counterfactuals);
        size_key("cf.moc_population", true, &RunConfig::moc_population);
        size_key("cf.moc_generations", true, &RunConfig::moc_generations);
        d.push_back({"cf.epsilon", true, [](const RunConfig& c) { return num(c.desiderata.epsilon); },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.desiderata.epsilon = parse_number<double>(k, v);
                     }});
        d.push_back({"cf.k_plausibility", true, [](const RunConfig& c) { return std::to_string(c.desiderata.k_plaus); },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.desiderata.k_plaus = parse_number<std::size_t>(k, v);
                     }});
        d.push_back({"cf.distance", true,
                     [](const RunConfig& c) { return c.desiderata.distance == DistanceKind::Gower ? "gower" : "heom"; },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         const auto s = lower(unquote(v));
                         if (s == "gower") c.desiderata.distance = DistanceKind::Gower;
                         else if (s == "heom") c.desiderata.distance = DistanceKind::HEOM;
                         else throw ConfigError(k + ": expected gower or heom, got '" + s + "'");
                     }});
        size_key("benchmark.max_factuals", true, &RunConfig::max_factuals);

        d.push_back({"seed", true, [](const RunConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string(); },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         const auto s = unquote(v);
                         if (s.empty()) c.seed = std::nullopt;
                         else c.seed = parse_number<std::uint64_t>(k, s);
                     }});
        d.push_back({"out", false, [](const RunConfig& c) { return c.out_dir.generic_string(); },
                     [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = unquote(v); }});

        d.push_back({"serve.host", false, [](const RunConfig& c) { return c.host; },
                     [](RunConfig& c, const std::string&, const std::string& v) { c.host = unquote(v); }});
        d.push_back({"serve.port", false, [](const RunConfig& c) { return std::to_string(c.port); },
                     [](RunConfig& c, const std::string& k, const std::string& v) { c.port = parse_number<int>(k, v); }});
        d.push_back({"serve.models", false,
                     [](const RunConfig& c) {
                         std::vector<std::string> names;
                         for (const auto& p : c.serve_models) names.push_back(p.generic_string());
                         return join(names);
                     },
                     [](RunConfig& c, const std::string&, const std::string& v) {
                         c.serve_models.clear();
                         for (const auto& item : parse_list(v)) c.serve_models.emplace_back(item);
                     }});
        d.push_back({"serve.budget_s", false, [](const RunConfig& c) { return num(c.request_budget_s); },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.request_budget_s = parse_number<double>(k, v);
                     }});
        d.push_back({"serve.max_counterfactuals", false, [](const RunConfig& c) { return std::to_string(c.request_cap); },
                     [](RunConfig& c, const std::string& k, const std::string& v) {
                         c.request_cap = parse_number<std::size_t>(k, v);
                     }});
        d.push_back({"serve.cors_origin", false, [](const RunConfig& c) { return c.cors_origin; },
                     [](RunConfig& c, const std::string&, const std::string& v) { c.cors_origin = unquote(v); }});
        return d;
    }();
    return defs;
}

const KeyDef& find_key(const std::string& key) {
    for (const auto& d : key_defs())
        if (key == d.name) return d;
    throw ConfigError("unknown configuration key '" + key + "'");
}

std::string env_name(const std::string& key) {
    std::string out = "BANKCF_";
    for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& d : key_defs()) out.emplace_back(d.name);
        return out;
    }();
    return keys;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
    find_key(key).set(config, key, value);
}

RunConfig parse_config(const std::string& text, const RunConfig& base) {
    RunConfig config = base;
    std::istringstream in(text);
    std::string line, section;
    std::set<std::string> seen;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // Strip comments outside quotes.
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        const auto body = std::string(trim(line));
        if (body.empty()) continue;
        if (body.front() == '[' && body.back() == ']' && body.find('=') == std::string::npos) {
            section = std::string(trim(std::string_view(body).substr(1, body.size() - 2)));
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key(trim(std::string_view(body).substr(0, eq)));
        if (!section.empty()) key = section + "." + key;
        if (!seen.insert(key).second)
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        try {
            set_config_value(config, key, body.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return config;
}

RunConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env) {
    RunConfig config;
    if (path) {
        std::ifstream in(*path, std::ios::binary);
        if (!in) throw ConfigError("cannot read config file '" + path->string() + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        config = parse_config(ss.str());
        // Relative data paths resolve against the config file's directory.
        if (!config.data_csv.empty() && config.data_csv.is_relative())
            config.data_csv = path->parent_path() / config.data_csv;
    }
    for (const auto& d : key_defs()) {
        if (auto v = env(env_name(d.name))) {
            try {
                d.set(config, d.name, *v);
            } catch (const ConfigError& e) {
                throw ConfigError(env_name(d.name) + ": " + e.what());
            }
        }
    }
    return config;
}

void validate_config(const RunConfig& c) {
    if (!c.seed) throw ConfigError("seed: a seed is required (no clock-derived default)");
    if (c.source == DataSourceKind::Csv && c.data_csv.empty()) throw ConfigError("data.csv: no input file given");
    if (c.source == DataSourceKind::Fdic && c.fdic_page_size == 0) throw ConfigError("data.fdic_page_size: must be positive");
    if (c.lag_months < 0) throw ConfigError("split.lag_months: must be non-negative");
    if (!(c.holdout_ratio > 0.0 && c.holdout_ratio < 1.0)) throw ConfigError("split.holdout_ratio: must be in (0, 1)");
    if (c.n_trees == 0) throw ConfigError("model.n_trees: must be positive");
    if (c.min_samples_split < 2) throw ConfigError("model.min_samples_split: must be at least 2");
    if (!(c.decision_threshold > 0.0 && c.decision_threshold < 1.0))
        throw ConfigError("model.threshold: must be in (0, 1)");
    if (c.smote_k < 1) throw ConfigError("model.smote_k: must be positive");
    if (c.methods.empty()) throw ConfigError("cf.methods: at least one method is required");
    if (c.max_counterfactuals == 0) throw ConfigError("cf.max_counterfactuals: must be positive");
    if (c.moc_population < 2) throw ConfigError("cf.moc_population: must be at least 2");
    if (c.moc_generations == 0) throw ConfigError("cf.moc_generations: must be positive");
    if (!(c.desiderata.epsilon > 0.0)) throw ConfigError("cf.epsilon: must be positive");
    if (c.desiderata.k_plaus == 0) throw ConfigError("cf.k_plausibility: must be positive");
    for (const auto& f : c.frozen_features) {
        const auto names = predictor_group(c.group).features;
        if (std::find(names.begin(), names.end(), f) == names.end())
            throw ConfigError("cf.frozen: '" + f + "' is not in predictor group " + to_string(c.group));
    }
    if (c.port < 0 || c.port > 65535) throw ConfigError("serve.port: out of range");
    if (!(c.request_budget_s > 0.0)) throw ConfigError("serve.budget_s: must be positive");
    if (c.request_cap == 0) throw ConfigError("serve.max_counterfactuals: must be positive");
}

std::string config_to_text(const RunConfig& config, bool hashed_only) {
    std::string out;
    for (const auto& d : key_defs())
        if (d.hashed || !hashed_only) out += std::string(d.name) + " = " + d.get(config) + "\n";
    return out;
}

Json config_to_json(const RunConfig& config) {
    Json j = Json::object();
    for (const auto& d : key_defs()) j[d.name] = d.get(config);
    return j;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string config_hash(const RunConfig& config) {
    std::string text;
    for (const auto& d : key_defs())
        if (d.hashed) text += std::string(d.name) + "=" + d.get(config) + "\n";
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
    return buf;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label) noexcept {
    // splitmix64 finaliser over the base seed mixed with the label hash.
    std::uint64_t z = base ^ fnv1a64(label);
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace bankcf
