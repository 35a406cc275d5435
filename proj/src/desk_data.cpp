#include "bankcf/desk_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace bankcf {

namespace {

using namespace std::chrono;

struct Profile {
    const char* name;
    double healthy;
    double distressed;
    double sd;  // quarter-to-quarter noise
};

// Typical levels per indicator; distressed values are what a bank looks like
// in the quarter before it closes.
const Profile kProfiles[] = {
    {"TICRC", 0.105, 0.030, 0.018},  {"PLLL", 0.35, 3.2, 0.45},    {"TIE", 0.85, 1.55, 0.22},
    {"EQR", 10.5, 3.5, 1.9},         {"NIMY", 3.75, 2.70, 0.45},   {"INTEXPYQ", 1.25, 2.35, 0.35},
    {"RBCIAAJ", 14.5, 5.5, 2.8},     {"ROE", 8.0, -55.0, 7.5},     {"NIMYQ", 3.75, 2.65, 0.50},
    {"LNATRESR", 1.45, 4.3, 0.45},   {"NONIXAYQ", 3.0, 4.4, 0.55}, {"ROAQ", 0.95, -3.8, 0.65},
};

// Interest-rate regime: funding costs were high in 2008, near zero through
// 2015-2021 and rising again afterwards.
double rate_level(int quarter_index) {
    const double t = quarter_index / 4.0;  // years since 2008
    if (t < 2.0) return 1.0 - 0.3 * t;
    if (t < 8.0) return 0.4 - 0.04 * (t - 2.0);
    if (t < 14.0) return 0.16;
    return 0.16 + 0.35 * (t - 14.0);
}

bool rate_sensitive(std::string_view name) { return name == "TIE" || name == "INTEXPYQ"; }

Date quarter_date(int quarter_index) {
    const int y = 2008 + quarter_index / 4;
    const unsigned m = static_cast<unsigned>(quarter_index % 4) * 3 + 3;
    return Date{year_month_day_last{year{y}, month_day_last{month{m}}}};
}

int quarter_of(const Date& d) {
    return (static_cast<int>(d.year()) - 2008) * 4 + (static_cast<int>(static_cast<unsigned>(d.month())) - 1) / 3;
}

}  // namespace

DataTable make_desk_dataset(const DeskDataOptions& options) {
    DataTable table;
    table.schema = indicator_catalog();
    const std::size_t d = table.schema.size();
    constexpr int kQuarters = 64;  // 2008Q1 .. 2023Q4

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const std::size_t n_banks = options.healthy_banks + options.crisis_failures + options.late_failures;
    for (std::size_t b = 0; b < n_banks; ++b) {
        char id[32];
        std::snprintf(id, sizeof id, "DESK%03zu", b + 1);

        std::optional<Date> failure;
        if (b >= options.healthy_banks) {
            const bool crisis = b < options.healthy_banks + options.crisis_failures;
            const int first = crisis ? 5 : 28;  // 2009Q2 or 2015Q1
            const int last = crisis ? 22 : 51;  // 2013Q3 or 2020Q4
            const int q = first + static_cast<int>(unit(rng) * (last - first + 1));
            // Closing dates fall inside the quarter, not on its last day.
            const Date qd = quarter_date(q);
            const unsigned day = 1 + static_cast<unsigned>(unit(rng) * 27);
            failure = Date{qd.year(), qd.month(), std::chrono::day{day}};
        }
        // Distress ramps in over 18-36 months with bank-specific severity.
        const double ramp_q = 6.0 + unit(rng) * 6.0;
        const double severity = 0.6 + unit(rng) * 0.6;
        // Some survivors have a milder episode around the crisis.
        const bool episode = !failure && unit(rng) < 0.25;
        const int episode_peak = 6 + static_cast<int>(unit(rng) * 12);
        const double episode_depth = 0.35 + unit(rng) * 0.35;

        std::vector<double> offset(d), state(d, 0.0);
        for (std::size_t f = 0; f < d; ++f) offset[f] = normal(rng) * kProfiles[f].sd * 0.8;

        const int end_q = failure ? quarter_of(*failure) : kQuarters - 1;
        for (int q = 0; q <= end_q; ++q) {
            const Date date = quarter_date(q);
            double stress = 0.0;
            if (failure) {
                // Last report before closing sits at distress ~= severity.
                const double quarters_left = (quarter_of(*failure) - q) + 0.5;
                stress = severity * std::pow(std::clamp(1.0 - quarters_left / ramp_q, 0.0, 1.0), 1.3);
            } else if (episode) {
                const double gap = std::abs(q - episode_peak) / 4.0;
                stress = episode_depth * std::exp(-gap * gap);
            }
            // System-wide stress in 2009-2010.
            stress += 0.08 * std::exp(-std::pow((q - 8) / 4.0, 2.0));

            BankQuarterRecord row;
            row.bank_id = id;
            row.report_date = date;
            row.failure_date = failure;
            row.indicators.resize(d);
            for (std::size_t f = 0; f < d; ++f) {
                const auto& p = kProfiles[f];
                state[f] = 0.6 * state[f] + normal(rng) * p.sd * 0.8;
                double base = p.healthy;
                if (rate_sensitive(p.name)) base *= 0.5 + rate_level(q);
                double v = base + offset[f] + state[f] + stress * (p.distressed - p.healthy);
                const auto& r = *table.schema[f].valid_range;
                v = std::clamp(v, r.lower, r.upper);
                // Reported ratios carry limited precision.
                v = std::round(v * 1e6) / 1e6;
                row.indicators[f] = v;
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

}  // namespace bankcf
