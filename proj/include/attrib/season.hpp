#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "attrib/dataio.hpp"
#include "attrib/gridops.hpp"

namespace attrib::season {

// Smoothed biweekly NDVI climatology, 24 bins per cell, circular in the year.
struct NdviClim {
    gridops::GridSpec spec;
    std::array<std::vector<double>, 24> bins;  // NaN = missing
};

struct SeasonMap {
    std::map<std::string, int> greenest_month;  // country -> 1..12
};

// Calendar month (1..12) containing the midpoint of biweekly bin 1..24.
int month_of_bin(int bin);

// Multi-year mean per bin followed by a centered circular moving mean of
// width 7 bins (the 14-week window on biweekly data).
NdviClim ndvi_climatology(const std::vector<gridops::GridField>& series);

// Per-cell argmax over the 24 bins, mapped to the calendar month of the bin
// midpoint. Ties take the earliest bin, hence the earliest calendar month.
gridops::GridField greenest_month_cell(const NdviClim& clim);

// Weighted modal month per country. Countries without NDVI coverage take the
// configured donor country's month; no donor is a hard error.
SeasonMap country_green_month(const gridops::GridField& cell_months,
                              const gridops::GridField& weights,
                              const gridops::CountryMask& mask,
                              const std::map<std::string, std::string>& donors = {});

struct CountryMonthWeather {
    gridops::CountryMonthPanel tmean, tmin, tmax, precip;
};

// Aggregates country-month weather into per-year seasonal levels.
// Green window: months m-2..m+2 around the greenest month m, labeled by the
// calendar year of the center month, wrap months drawn from adjacent years.
// Calendar window: the 12 months of the labeled year. T = mean, P = sum.
dataio::SeasonalPanel seasonal_aggregate(const CountryMonthWeather& cm,
                                         const SeasonMap& s, Window window);

void write_season_map(const SeasonMap& s, const std::string& path);
SeasonMap read_season_map(const std::string& path);

}  // namespace attrib::season
