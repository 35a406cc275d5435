#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bankcf/dataset.hpp"

namespace bankcf {

// Query against the FDIC BankFind financials endpoint.
struct FdicConfig {
    std::string base_url = "https://banks.data.fdic.gov/api";
    std::vector<FeatureSpec> schema;  // indicators to request, by FDIC field name
    std::optional<Date> date_from;
    std::optional<Date> date_to;
    std::size_t page_size = 10000;
    int retries = 3;
    int backoff_ms = 250;
    int timeout_s = 60;
};

struct FetchDiagnostics {
    std::size_t pages = 0;
    std::size_t records = 0;
    std::size_t dropped_missing = 0;
    std::size_t failed_banks = 0;
    std::vector<std::string> warnings;
};

// Receives one converted page at a time.
using RecordSink = std::function<void(std::vector<BankQuarterRecord>&&)>;

// Pages through the financials endpoint with offset/limit and hands each page
// to `sink`. Failure dates come from the failures registry, which is fetched
// first. Memory use is bounded by one page.
void stream_fdic_snapshot(const FdicConfig& config, const RecordSink& sink,
                          FetchDiagnostics* diagnostics = nullptr);

DataTable fetch_fdic_snapshot(const FdicConfig& config, FetchDiagnostics* diagnostics = nullptr);

// Streams straight into a CSV file in the ingest format.
void fetch_fdic_to_csv(const FdicConfig& config, const std::filesystem::path& out,
                       FetchDiagnostics* diagnostics = nullptr);

// FDIC dates come as YYYYMMDD, ISO, or M/D/YYYY.
Date parse_fdic_date(std::string_view text);

}  // namespace bankcf
