#include "bankcf/fdic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "bankcf/error.hpp"
#include "csv_util.hpp"

namespace bankcf {

using nlohmann::json;

namespace {

struct UrlParts {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path without trailing slash
};

UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("FDIC base URL lacks a scheme: '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    UrlParts parts;
    parts.origin = url.substr(0, path_start);
    if (path_start != std::string::npos) parts.prefix = url.substr(path_start);
    while (!parts.prefix.empty() && parts.prefix.back() == '/') parts.prefix.pop_back();
    return parts;
}

std::string compact_date(const Date& d) {
    auto iso = format_iso_date(d);
    iso.erase(std::remove(iso.begin(), iso.end(), '-'), iso.end());
    return iso;
}

class Pager {
public:
    explicit Pager(const FdicConfig& cfg) : cfg_(cfg), url_(split_url(cfg.base_url)), client_(url_.origin) {
        client_.set_connection_timeout(cfg.timeout_s, 0);
        client_.set_read_timeout(cfg.timeout_s, 0);
        client_.set_follow_location(true);
    }

    // GET with retries; returns the parsed body.
    json get(const std::string& endpoint, httplib::Params params) {
        const std::string path = url_.prefix + "/" + endpoint;
        std::string last_error;
        for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
            if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms * attempt));
            auto res = client_.Get(path, params, httplib::Headers{{"Accept", "application/json"}});
            if (!res) {
                last_error = "transport failure: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500 || res->status == 429) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw TransportError("FDIC " + endpoint + " returned HTTP " + std::to_string(res->status));
            try {
                return json::parse(res->body);
            } catch (const json::parse_error& e) {
                last_error = std::string("malformed JSON: ") + e.what();
            }
        }
        throw TransportError("FDIC " + endpoint + " failed after " + std::to_string(cfg_.retries + 1) +
                             " attempts: " + last_error);
    }

private:
    const FdicConfig& cfg_;
    UrlParts url_;
    httplib::Client client_;
};

const json& record_of(const json& item) {
    // BankFind wraps each record as {"data": {...}, "score": ...}.
    if (item.is_object() && item.contains("data") && item["data"].is_object()) return item["data"];
    return item;
}

std::string as_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return std::to_string(v.get<double>());
    return {};
}

std::optional<double> as_number(const json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        try {
            std::size_t used = 0;
            double d = std::stod(s, &used);
            if (used == s.size() && std::isfinite(d)) return d;
        } catch (const std::exception&) {
        }
    }
    return std::nullopt;
}

std::size_t total_of(const json& body) {
    if (body.contains("meta") && body["meta"].contains("total")) return body["meta"]["total"].get<std::size_t>();
    if (body.contains("totals") && body["totals"].contains("count")) return body["totals"]["count"].get<std::size_t>();
    return 0;
}

std::map<std::string, Date> fetch_failures(Pager& pager, const FdicConfig& cfg, FetchDiagnostics& diag) {
    std::map<std::string, Date> out;
    for (std::size_t offset = 0;; offset += cfg.page_size) {
        const json body = pager.get("failures", {{"fields", "CERT,FAILDATE"},
                                                 {"limit", std::to_string(cfg.page_size)},
                                                 {"offset", std::to_string(offset)},
                                                 {"sort_by", "CERT"},
                                                 {"sort_order", "ASC"},
                                                 {"format", "json"}});
        const auto& data = body.at("data");
        for (const auto& item : data) {
            const auto& rec = record_of(item);
            if (!rec.contains("CERT") || !rec.contains("FAILDATE")) continue;
            const auto cert = as_text(rec["CERT"]);
            const auto text = as_text(rec["FAILDATE"]);
            if (cert.empty() || text.empty()) continue;
            out.emplace(cert, parse_fdic_date(text));
        }
        if (data.size() < cfg.page_size || offset + data.size() >= total_of(body)) break;
    }
    diag.failed_banks = out.size();
    return out;
}

}  // namespace

Date parse_fdic_date(std::string_view text) {
    text = detail::trim(text);
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) return parse_iso_date(text);
    const auto slash2 = text.find('/', slash + 1);
    if (slash2 == std::string_view::npos) throw InputError("invalid FDIC date '" + std::string(text) + "'");
    try {
        const unsigned m = static_cast<unsigned>(std::stoi(std::string(text.substr(0, slash))));
        const unsigned d = static_cast<unsigned>(std::stoi(std::string(text.substr(slash + 1, slash2 - slash - 1))));
        const int y = std::stoi(std::string(text.substr(slash2 + 1)));
        Date out{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
        if (out.ok()) return out;
    } catch (const std::exception&) {
    }
    throw InputError("invalid FDIC date '" + std::string(text) + "'");
}

void stream_fdic_snapshot(const FdicConfig& config, const RecordSink& sink, FetchDiagnostics* diagnostics) {
    if (config.page_size == 0) throw ConfigError("FDIC page size must be positive");
    FetchDiagnostics local;
    FetchDiagnostics& diag = diagnostics ? *diagnostics : local;
    Pager pager(config);
    const auto failures = fetch_failures(pager, config, diag);

    std::string fields = "CERT,REPDTE";
    for (const auto& s : config.schema) fields += "," + s.name;
    httplib::Params base{{"fields", fields}, {"sort_by", "CERT"}, {"sort_order", "ASC"}, {"format", "json"},
                         {"limit", std::to_string(config.page_size)}};
    if (config.date_from || config.date_to) {
        const std::string lo = config.date_from ? compact_date(*config.date_from) : "*";
        const std::string hi = config.date_to ? compact_date(*config.date_to) : "*";
        base.emplace("filters", "REPDTE:[" + lo + " TO " + hi + "]");
    }

    for (std::size_t offset = 0;; offset += config.page_size) {
        auto params = base;
        params.emplace("offset", std::to_string(offset));
        const json body = pager.get("financials", params);
        if (!body.contains("data") || !body["data"].is_array())
            throw SchemaError("FDIC financials response has no data array");
        const auto& data = body["data"];
        ++diag.pages;

        std::vector<BankQuarterRecord> page;
        page.reserve(data.size());
        for (const auto& item : data) {
            const auto& rec = record_of(item);
            for (const char* key : {"CERT", "REPDTE"})
                if (!rec.contains(key)) throw SchemaError(std::string("field '") + key + "' absent in FDIC response", key);
            BankQuarterRecord row;
            row.bank_id = as_text(rec["CERT"]);
            row.report_date = quarter_end(parse_fdic_date(as_text(rec["REPDTE"])));
            bool missing = false;
            for (const auto& s : config.schema) {
                if (!rec.contains(s.name))
                    throw SchemaError("field '" + s.name + "' absent in FDIC response", s.name);
                auto v = as_number(rec[s.name]);
                if (!v) {
                    missing = true;
                    break;
                }
                row.indicators.push_back(*v);
            }
            if (missing) {
                ++diag.dropped_missing;
                continue;
            }
            if (auto it = failures.find(row.bank_id); it != failures.end()) {
                row.failure_date = it->second;
                row.failed_label = 1;
            }
            page.push_back(std::move(row));
        }
        diag.records += page.size();
        if (!page.empty()) sink(std::move(page));
        if (data.size() < config.page_size || offset + data.size() >= total_of(body)) break;
    }
    if (diag.records == 0) diag.warnings.push_back("FDIC query matched no records; returning an empty table");
    if (diag.dropped_missing > 0)
        diag.warnings.push_back("dropped " + std::to_string(diag.dropped_missing) +
                                " FDIC records with missing indicator values");
}

DataTable fetch_fdic_snapshot(const FdicConfig& config, FetchDiagnostics* diagnostics) {
    DataTable table;
    table.schema = config.schema;
    stream_fdic_snapshot(
        config,
        [&](std::vector<BankQuarterRecord>&& page) {
            for (auto& r : page) table.rows.push_back(std::move(r));
        },
        diagnostics);
    return table;
}

void fetch_fdic_to_csv(const FdicConfig& config, const std::filesystem::path& out, FetchDiagnostics* diagnostics) {
    const auto tmp = std::filesystem::path(out.string() + ".part");
    {
        std::ofstream file(tmp, std::ios::binary);
        if (!file) throw IoError("cannot write '" + tmp.string() + "'");
        write_csv_header(file, config.schema);
        try {
            stream_fdic_snapshot(
                config,
                [&](std::vector<BankQuarterRecord>&& page) {
                    for (const auto& r : page) write_csv_row(file, r);
                },
                diagnostics);
        } catch (...) {
            file.close();
            std::filesystem::remove(tmp);
            throw;
        }
    }
    std::filesystem::rename(tmp, out);
}

}  // namespace bankcf
