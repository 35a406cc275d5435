#include "bankcf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include "bankcf/error.hpp"
#include "csv_util.hpp"

namespace bankcf {

using namespace std::chrono;

Date parse_iso_date(std::string_view text) {
    text = detail::trim(text);
    int y = 0;
    unsigned m = 0, d = 0;
    auto read = [&](std::size_t pos, std::size_t len, auto& out) {
        if (pos + len > text.size()) return false;
        auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
        return ec == std::errc{} && p == text.data() + pos + len;
    };
    bool ok = false;
    if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
        ok = read(0, 4, y) && read(5, 2, m) && read(8, 2, d);
    } else if (text.size() == 8) {
        ok = read(0, 4, y) && read(4, 2, m) && read(6, 2, d);
    }
    Date out{year{y}, month{m}, day{d}};
    if (!ok || !out.ok()) throw InputError("invalid date '" + std::string(text) + "'");
    return out;
}

std::string format_iso_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

Date quarter_end(const Date& d) {
    const unsigned m = static_cast<unsigned>(d.month());
    const unsigned qm = ((m - 1) / 3 + 1) * 3;
    const year_month_day_last last{d.year(), month_day_last{month{qm}}};
    return Date{last};
}

Date minus_months(const Date& d, months m) {
    const year_month ym = year_month{d.year(), d.month()} - m;
    const Date candidate{ym.year(), ym.month(), d.day()};
    if (candidate.ok()) return candidate;
    return Date{year_month_day_last{ym.year(), month_day_last{ym.month()}}};
}

const std::vector<FeatureSpec>& indicator_catalog() {
    static const std::vector<FeatureSpec> catalog = [] {
        auto numeric = [](std::string name, double lo, double hi) {
            FeatureSpec s;
            s.name = std::move(name);
            s.valid_range = Interval{lo, hi};
            return s;
        };
        return std::vector<FeatureSpec>{
            numeric("TICRC", -0.01, 0.19),   numeric("PLLL", -3, 10),
            numeric("TIE", 0, 2.2),          numeric("EQR", -20, 100),
            numeric("NIMY", -4, 26),         numeric("INTEXPYQ", -0.5, 5.5),
            numeric("RBCIAAJ", -20, 200),    numeric("ROE", -12000, 1000),
            numeric("NIMYQ", -4, 26),        numeric("LNATRESR", 0, 26),
            numeric("NONIXAYQ", -20, 300),   numeric("ROAQ", -100, 350),
        };
    }();
    return catalog;
}

const FeatureSpec& indicator_spec(std::string_view name) {
    for (const auto& s : indicator_catalog())
        if (s.name == name) return s;
    throw SchemaError("unknown indicator '" + std::string(name) + "'", std::string(name));
}

PredictorGroup predictor_group(GroupId id) {
    switch (id) {
    case GroupId::I: return {id, {"TICRC", "PLLL", "TIE", "EQR"}};
    case GroupId::II: return {id, {"TICRC", "NIMY", "INTEXPYQ", "RBCIAAJ", "ROE"}};
    case GroupId::III: return {id, {"NIMYQ", "LNATRESR", "NONIXAYQ", "ROAQ"}};
    }
    throw ParameterError("invalid predictor group");
}

GroupId parse_group(std::string_view text) {
    if (text == "I" || text == "1") return GroupId::I;
    if (text == "II" || text == "2") return GroupId::II;
    if (text == "III" || text == "3") return GroupId::III;
    throw ConfigError("unknown predictor group '" + std::string(text) + "'");
}

std::string to_string(GroupId id) {
    switch (id) {
    case GroupId::I: return "I";
    case GroupId::II: return "II";
    case GroupId::III: return "III";
    }
    return "?";
}

std::vector<FeatureSpec> schema_for(const std::vector<std::string>& names) {
    std::vector<FeatureSpec> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(indicator_spec(n));
    return out;
}

std::vector<FeatureSpec> schema_for(GroupId id) { return schema_for(predictor_group(id).features); }

std::optional<std::size_t> DataTable::find_feature(std::string_view name) const {
    for (std::size_t i = 0; i < schema.size(); ++i)
        if (schema[i].name == name) return i;
    return std::nullopt;
}

std::vector<std::string> DataTable::feature_names() const {
    std::vector<std::string> out;
    out.reserve(schema.size());
    for (const auto& s : schema) out.push_back(s.name);
    return out;
}

std::size_t DataTable::positives() const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(),
                                                  [](const auto& r) { return r.failed_label == 1; }));
}

namespace {

bool is_missing(std::string_view cell) {
    cell = detail::trim(cell);
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null";
}

std::optional<double> parse_number(std::string_view cell) {
    cell = detail::trim(cell);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double v = 0.0;
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || p != cell.data() + cell.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string format_number(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

}  // namespace

DataTable load_csv(const std::filesystem::path& path, const std::vector<FeatureSpec>& schema,
                   LoadDiagnostics* diagnostics) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty CSV file '" + path.string() + "'");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
    const auto header = detail::split_csv_line(line);
    std::unordered_map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) column[std::string(detail::trim(header[i]))] = i;

    auto require = [&](const std::string& name) {
        auto it = column.find(name);
        if (it == column.end())
            throw SchemaError("missing column '" + name + "' in '" + path.string() + "'", name);
        return it->second;
    };
    const std::size_t c_bank = require("bank_id");
    const std::size_t c_date = require("report_date");
    const std::size_t c_label = require("failed_label");
    std::optional<std::size_t> c_fail;
    if (auto it = column.find("failure_date"); it != column.end()) c_fail = it->second;
    std::vector<std::size_t> c_feat;
    for (const auto& spec : schema) c_feat.push_back(require(spec.name));

    DataTable table;
    table.schema = schema;
    LoadDiagnostics local;
    LoadDiagnostics& diag = diagnostics ? *diagnostics : local;
    std::set<std::pair<std::string, int>> seen;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        ++diag.rows_read;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() < header.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(header.size()) + " cells, got " +
                                 std::to_string(cells.size()),
                             line_no);
        BankQuarterRecord rec;
        rec.bank_id = std::string(detail::trim(cells[c_bank]));
        try {
            rec.report_date = quarter_end(parse_iso_date(cells[c_date]));
            if (c_fail && !is_missing(cells[*c_fail])) rec.failure_date = parse_iso_date(cells[*c_fail]);
        } catch (const InputError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
        const auto label = detail::trim(cells[c_label]);
        if (label == "0") rec.failed_label = 0;
        else if (label == "1") rec.failed_label = 1;
        else
            throw ParseError("line " + std::to_string(line_no) + ": failed_label must be 0 or 1, got '" +
                                 std::string(label) + "'",
                             line_no);

        bool missing = false;
        rec.indicators.reserve(schema.size());
        for (std::size_t f = 0; f < schema.size(); ++f) {
            const auto& cell = cells[c_feat[f]];
            if (is_missing(cell)) {
                missing = true;
                break;
            }
            auto v = parse_number(cell);
            if (!v)
                throw ParseError("line " + std::to_string(line_no) + ": cannot parse " + schema[f].name +
                                     " value '" + cell + "'",
                                 line_no);
            rec.indicators.push_back(*v);
        }
        if (missing) {
            ++diag.dropped_missing;
            continue;
        }
        const auto key = std::make_pair(rec.bank_id, static_cast<int>(sys_days(rec.report_date).time_since_epoch().count()));
        if (!seen.insert(key).second)
            throw DuplicateKeyError("line " + std::to_string(line_no) + ": duplicate (bank_id, report_date) = (" +
                                    rec.bank_id + ", " + format_iso_date(rec.report_date) + ")");
        table.rows.push_back(std::move(rec));
    }
    if (diag.dropped_missing > 0)
        diag.warnings.push_back("dropped " + std::to_string(diag.dropped_missing) +
                                " rows with missing indicator values");
    return table;
}

void write_csv_header(std::ostream& out, const std::vector<FeatureSpec>& schema) {
    out << "bank_id,report_date,failed_label,failure_date";
    for (const auto& s : schema) out << ',' << detail::csv_field(s.name);
    out << '\n';
}

void write_csv_row(std::ostream& out, const BankQuarterRecord& r) {
    out << detail::csv_field(r.bank_id) << ',' << format_iso_date(r.report_date) << ',' << r.failed_label << ','
        << (r.failure_date ? format_iso_date(*r.failure_date) : std::string());
    for (double v : r.indicators) out << ',' << format_number(v);
    out << '\n';
}

void write_csv(const DataTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    write_csv_header(out, table.schema);
    for (const auto& r : table.rows) write_csv_row(out, r);
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

DataTable label_with_failure_lag(const DataTable& table, months lag) {
    // A bank counts as failed when any of its rows carries a failure date or a
    // positive label.
    std::map<std::string, std::optional<Date>> failure_of;
    std::set<std::string> flagged;
    for (const auto& r : table.rows) {
        auto& slot = failure_of[r.bank_id];
        if (r.failure_date) {
            if (slot && *slot != *r.failure_date)
                throw LabelingError("bank '" + r.bank_id + "' has conflicting failure dates", r.bank_id);
            slot = r.failure_date;
        }
        if (r.failed_label == 1) flagged.insert(r.bank_id);
    }
    for (const auto& id : flagged)
        if (!failure_of[id])
            throw LabelingError("failed bank '" + id + "' has no failure_date", id);

    DataTable out;
    out.schema = table.schema;
    out.rows.reserve(table.rows.size());
    for (const auto& r : table.rows) {
        const auto& fd = failure_of[r.bank_id];
        BankQuarterRecord rec = r;
        if (fd) {
            if (r.report_date > *fd) continue;
            rec.failure_date = fd;
            rec.failed_label = r.report_date > minus_months(*fd, lag) ? 1 : 0;
        } else {
            rec.failed_label = 0;
        }
        out.rows.push_back(std::move(rec));
    }
    return out;
}

DataTable select_predictors(const DataTable& table, const PredictorGroup& group) {
    std::vector<std::size_t> idx;
    for (const auto& name : group.features) {
        auto i = table.find_feature(name);
        if (!i) throw SchemaError("predictor '" + name + "' not present in table", name);
        idx.push_back(*i);
    }
    DataTable out;
    for (auto i : idx) out.schema.push_back(table.schema[i]);
    out.rows.reserve(table.rows.size());
    for (const auto& r : table.rows) {
        BankQuarterRecord rec;
        rec.bank_id = r.bank_id;
        rec.report_date = r.report_date;
        rec.failed_label = r.failed_label;
        rec.failure_date = r.failure_date;
        rec.indicators.reserve(idx.size());
        for (auto i : idx) rec.indicators.push_back(r.indicators[i]);
        out.rows.push_back(std::move(rec));
    }
    return out;
}

SplitBundle split_temporal_holdout(const DataTable& table, const Date& boundary, double ratio,
                                   std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw SplitError("holdout ratio must lie in (0, 1)");
    std::vector<std::size_t> pre;
    SplitBundle bundle;
    bundle.boundary_date = boundary;
    bundle.holdout_ratio = ratio;
    bundle.seed = seed;
    bundle.in_sample.schema = bundle.out_of_sample.schema = bundle.out_of_time.schema = table.schema;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        if (table.rows[i].report_date < boundary) pre.push_back(i);
        else bundle.out_of_time.rows.push_back(table.rows[i]);
    }
    if (pre.empty() || bundle.out_of_time.rows.empty())
        throw SplitError("all rows fall on one side of the boundary " + format_iso_date(boundary));

    std::vector<std::size_t> order = pre;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_in = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(pre.size())));
    std::vector<char> in_mask(table.rows.size(), 0);
    for (std::size_t k = 0; k < n_in; ++k) in_mask[order[k]] = 1;
    // Partitions keep the source row order.
    for (auto i : pre) (in_mask[i] ? bundle.in_sample : bundle.out_of_sample).rows.push_back(table.rows[i]);
    return bundle;
}

std::vector<RangeViolation> validate_ranges(const DataTable& table) {
    std::vector<RangeViolation> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t f = 0; f < table.schema.size(); ++f) {
            const auto& spec = table.schema[f];
            if (spec.kind != FeatureKind::Numeric || !spec.valid_range) continue;
            const double v = table.rows[r].indicators[f];
            if (!spec.valid_range->contains(v)) out.push_back({r, spec.name, v});
        }
    }
    return out;
}

std::vector<FeatureSpec> fit_observed_ranges(const DataTable& table) {
    auto schema = table.schema;
    if (table.rows.empty()) return schema;
    for (std::size_t f = 0; f < schema.size(); ++f) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& r : table.rows) {
            lo = std::min(lo, r.indicators[f]);
            hi = std::max(hi, r.indicators[f]);
        }
        schema[f].observed_range = Interval{lo, hi};
    }
    return schema;
}

}  // namespace bankcf
