#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bankcf/balancing.hpp"
#include "bankcf/cfgen.hpp"
#include "bankcf/dataset.hpp"
#include "bankcf/evaluation.hpp"
#include "bankcf/trees.hpp"

namespace bankcf {

enum class DataSourceKind { Csv, Fdic };

struct RunConfig {
    // data
    DataSourceKind source = DataSourceKind::Csv;
    std::filesystem::path data_csv;
    std::string fdic_url = "https://banks.data.fdic.gov/api";
    std::optional<Date> fdic_from;
    std::optional<Date> fdic_to;
    std::size_t fdic_page_size = 10000;
    std::size_t fdic_retries = 3;

    // labelling and split
    int lag_months = 12;
    Date boundary = kDefaultBoundary;
    double holdout_ratio = 0.8;

    // model
    GroupId group = GroupId::II;
    ModelKind model = ModelKind::RandomForest;
    BalancingTag strategy = BalancingTag::CostSensitive;
    std::size_t n_trees = 100;
    std::optional<std::size_t> max_depth;
    std::size_t min_samples_split = 2;
    double decision_threshold = 0.5;
    int smote_k = 5;

    // counterfactuals
    std::vector<CfMethod> methods{CfMethod::WhatIf, CfMethod::NICE, CfMethod::MOC};
    std::vector<std::string> frozen_features;
    std::size_t max_counterfactuals = 5;
    std::size_t moc_population = 50;
    std::size_t moc_generations = 100;
    DesiderataConfig desiderata;
    std::size_t max_factuals = 100;  // per benchmark cell

    std::optional<std::uint64_t> seed;
    std::filesystem::path out_dir = "out";

    // service
    std::string host = "127.0.0.1";
    int port = 8080;
    std::vector<std::filesystem::path> serve_models;
    double request_budget_s = 10.0;
    std::size_t request_cap = 5;
    std::string cors_origin = "*";
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

// Reads the process environment.
EnvLookup process_env();

// Every recognised key, in canonical order.
const std::vector<std::string>& config_keys();

// Sets one key from its text form. Throws ConfigError naming the key.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

// key = value lines, optional [section] headers that prefix keys with
// "section.", # comments, quoted strings and [a, b] lists. Unknown keys and
// duplicates are errors.
RunConfig parse_config(const std::string& text, const RunConfig& base = {});

// File (if given), then BANKCF_<KEY> environment overrides, where KEY is the
// dotted key upper-cased with dots replaced by underscores.
RunConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env = process_env());

// Throws ConfigError when a value is out of range or the seed is missing.
void validate_config(const RunConfig& config);

// Canonical key = value rendering. With `hashed_only`, output and service
// settings are left out so reports do not depend on where they are written.
std::string config_to_text(const RunConfig& config, bool hashed_only = false);
Json config_to_json(const RunConfig& config);

// FNV-1a 64 over the canonical text, excluding output and service settings,
// as 16 hex digits.
std::string config_hash(const RunConfig& config);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// Independent stream seed for a labelled sub-task.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label) noexcept;

}  // namespace bankcf
