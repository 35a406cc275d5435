#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bankcf {

using Date = std::chrono::year_month_day;

Date parse_iso_date(std::string_view text);
std::string format_iso_date(const Date& d);
Date quarter_end(const Date& d);
// Calendar subtraction; day clamped to the last valid day of the target month.
Date minus_months(const Date& d, std::chrono::months m);

struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    bool contains(double v) const noexcept { return v >= lower && v <= upper; }
    double width() const noexcept { return upper - lower; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

enum class FeatureKind { Numeric, Categorical };

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::Numeric;
    std::optional<Interval> valid_range;     // validation bounds (numeric only)
    std::optional<Interval> observed_range;  // learned from training rows
    bool mutable_in_cf = true;

    friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

// The thirteen indicators behind the three predictor groups, with their
// documented value ranges.
const std::vector<FeatureSpec>& indicator_catalog();
const FeatureSpec& indicator_spec(std::string_view name);

enum class GroupId { I, II, III };

struct PredictorGroup {
    GroupId id;
    std::vector<std::string> features;
};

PredictorGroup predictor_group(GroupId id);
GroupId parse_group(std::string_view text);
std::string to_string(GroupId id);

// Schema made from catalog entries, in the given order.
std::vector<FeatureSpec> schema_for(const std::vector<std::string>& names);
std::vector<FeatureSpec> schema_for(GroupId id);

struct BankQuarterRecord {
    std::string bank_id;
    Date report_date;
    std::vector<double> indicators;  // aligned with DataTable::schema
    int failed_label = 0;
    std::optional<Date> failure_date;
};

struct DataTable {
    std::vector<FeatureSpec> schema;
    std::vector<BankQuarterRecord> rows;

    std::size_t feature_count() const noexcept { return schema.size(); }
    std::size_t size() const noexcept { return rows.size(); }
    bool empty() const noexcept { return rows.empty(); }
    std::optional<std::size_t> find_feature(std::string_view name) const;
    std::vector<std::string> feature_names() const;
    std::size_t positives() const;
};

struct LoadDiagnostics {
    std::size_t rows_read = 0;
    std::size_t dropped_missing = 0;
    std::vector<std::string> warnings;
};

DataTable load_csv(const std::filesystem::path& path, const std::vector<FeatureSpec>& schema,
                   LoadDiagnostics* diagnostics = nullptr);
void write_csv(const DataTable& table, const std::filesystem::path& path);
void write_csv_header(std::ostream& out, const std::vector<FeatureSpec>& schema);
void write_csv_row(std::ostream& out, const BankQuarterRecord& row);

// Labels rows of failed banks dated in (failure_date - lag, failure_date] as 1,
// drops rows dated after failure_date, and labels everything else 0.
DataTable label_with_failure_lag(const DataTable& table,
                                 std::chrono::months lag = std::chrono::months{12});

DataTable select_predictors(const DataTable& table, const PredictorGroup& group);

struct SplitBundle {
    DataTable in_sample;
    DataTable out_of_sample;
    DataTable out_of_time;
    Date boundary_date;
    double holdout_ratio = 0.8;
    std::uint64_t seed = 0;
};

inline const Date kDefaultBoundary{std::chrono::year{2014}, std::chrono::January, std::chrono::day{1}};

SplitBundle split_temporal_holdout(const DataTable& table, const Date& boundary, double ratio,
                                   std::uint64_t seed);

struct RangeViolation {
    std::size_t row;
    std::string feature;
    double value;
};

std::vector<RangeViolation> validate_ranges(const DataTable& table);

// Copy of the schema with observed_range set to the min/max seen in `table`.
std::vector<FeatureSpec> fit_observed_ranges(const DataTable& table);

}  // namespace bankcf
