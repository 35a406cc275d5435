#pragma once

#include <cstdint>

#include "bankcf/dataset.hpp"

namespace bankcf {

struct DeskDataOptions {
    std::size_t healthy_banks = 28;
    std::size_t crisis_failures = 20;  // failing 2009-2013
    std::size_t late_failures = 6;     // failing 2015-2020
    std::uint64_t seed = 20240607;
};

// Synthetic bank-quarter panel over every catalog indicator, 2008Q1-2023Q4.
// Failed banks drift toward distressed values over the two to three years
// before failure; a few survivors go through a milder stress episode. Rows
// carry failure dates but are not yet lag-labelled.
DataTable make_desk_dataset(const DeskDataOptions& options = {});

}  // namespace bankcf
