#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "attrib/modelspec.hpp"

namespace attrib::dataio {

// The seven region tokens accepted in meta.csv.
const std::vector<std::string>& region_tokens();

// Country-level log index panel (TFP or output), unbalanced allowed.
struct IndexPanel {
    std::vector<std::string> countries;
    std::vector<std::map<int, double>> ln_level;  // per country: year -> ln(index)

    int country_index(const std::string& id) const;
    std::size_t n_rows() const;
};

struct GrowthPanel {
    std::vector<std::string> countries;
    std::vector<std::map<int, double>> growth;  // year t -> ln(t) - ln(t-1)

    int country_index(const std::string& id) const;
    std::size_t n_rows() const;
};

struct CountryMeta {
    struct Entry {
        std::string region;
        double latitude = 0.0;
        double revenue_weight = 0.0;  // normalized to sum 1 on load
    };
    std::vector<std::string> countries;
    std::map<std::string, Entry> entries;

    const Entry& at(const std::string& id) const;
};

// Seasonal weather levels for the season labeled by a year.
// Temperatures in degC; precip in mm per season. NaN = not available.
struct SeasonalValue {
    double tmean = std::numeric_limits<double>::quiet_NaN();
    double tmin = std::numeric_limits<double>::quiet_NaN();
    double tmax = std::numeric_limits<double>::quiet_NaN();
    double precip = std::numeric_limits<double>::quiet_NaN();

    double get(TVar v) const;
};

struct SeasonalPanel {
    std::vector<std::string> countries;
    std::vector<std::map<int, SeasonalValue>> years;  // per country

    int country_index(const std::string& id) const;
    const SeasonalValue* find(int country, int year) const;
};

// One regression observation. Precip levels and deltas are stored in units
// of 1,000 mm so quadratic coefficients stay O(1); reported curves convert
// back to mm.
struct RegRow {
    int country = 0;  // index into RegTable::countries
    int year = 0;
    double y = 0.0;
    double t_level = 0.0;  // seasonal level of the spec's temperature variable
    double p_level = 0.0;  // seasonal precip level, 1,000 mm units
    double dt = 0.0, dt2 = 0.0, dt3 = 0.0;
    double dp = 0.0, dp2 = 0.0, dp3 = 0.0;
};

struct RegTable {
    std::vector<std::string> countries;
    std::vector<std::string> region;          // per country
    std::vector<double> latitude;             // per country
    std::vector<double> revenue_weight;       // per country, sums to 1
    std::vector<int> tercile;                 // per country, 0..2
    std::vector<RegRow> rows;                 // sorted by (country, year)
    bool has_precip = true;
    bool has_cubic = false;
    TVar tvar = TVar::tmean;
    Window window = Window::green;
    AggWeights agg_weights = AggWeights::cropland;

    int country_index(const std::string& id) const;
    const RegRow* find(int country, int year) const;
};

struct AssembleOptions {
    double min_coverage = 0.9;   // hard error below this join fraction
    bool signed_latitude = false;  // tercile split on signed instead of |lat|
};

struct AssembleReport {
    std::size_t joined = 0;
    std::vector<std::string> dropped;  // "country:year" pairs lacking weather
};

// ---- operations ----

// Equal-size tercile split by a latitude key; ties broken by country id.
std::vector<int> assign_terciles(const std::vector<std::string>& countries,
                                 const std::vector<double>& key);

// CSV with header country,year,<index_column>; index must be positive.
IndexPanel load_index_panel(const std::string& path, const std::string& index_column);
inline IndexPanel load_tfp_panel(const std::string& path) {
    return load_index_panel(path, "tfp_index");
}

GrowthPanel first_difference(const IndexPanel& p);

CountryMeta load_meta(const std::string& path);

RegTable assemble_panel(const GrowthPanel& g, const SeasonalPanel& w,
                        const CountryMeta& m, const ModelSpec& spec,
                        const AssembleOptions& opt = {},
                        AssembleReport* report = nullptr);

// seasonal panel CSV: country,year,tmean,tmin,tmax,precip ("NA" = absent)
void write_seasonal_panel(const SeasonalPanel& p, const std::string& path);
SeasonalPanel read_seasonal_panel(const std::string& path);

// growth CSV: country,year,dln_tfp[,dln_output]
void write_growth(const GrowthPanel& tfp, const GrowthPanel* output,
                  const std::string& path);
GrowthPanel read_growth(const std::string& path, const std::string& column);

}  // namespace attrib::dataio
