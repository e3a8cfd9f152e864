#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace attrib::gridops {

enum class VarTag : std::uint32_t {
    tmean = 0,
    tmin = 1,
    tmax = 2,
    precip = 3,
    ndvi = 4,
    weight = 5,
};

std::string tag_name(VarTag t);
VarTag tag_from_name(const std::string& s);

struct GridSpec {
    double lat0 = 0.0;  // center of cell row 0
    double lon0 = 0.0;  // center of cell col 0
    double dlat = 1.0;
    double dlon = 1.0;
    int nlat = 0;
    int nlon = 0;

    double lat(int r) const { return lat0 + r * dlat; }
    double lon(int c) const { return lon0 + c * dlon; }
    std::size_t size() const { return static_cast<std::size_t>(nlat) * nlon; }
    bool operator==(const GridSpec&) const = default;

    void validate() const;  // DataError on violated invariants
};

// Regular lat-lon raster of one variable for one (year, sub) stamp.
// sub is the month 1..12 for monthly fields, the biweekly bin 1..24 for
// NDVI, and 0 for static fields (weights, climatologies).
struct GridField {
    GridSpec spec;
    VarTag tag = VarTag::tmean;
    int year = 0;
    int sub = 0;
    std::vector<double> values;  // row-major, NaN = missing

    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * spec.nlon + c]; }
    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * spec.nlon + c]; }
    static bool missing(double v) { return std::isnan(v); }

    static GridField make(const GridSpec& spec, VarTag tag, int year, int sub,
                          double fill = 0.0);
    void validate() const;
};

// One country id per cell; -1 = no country (ocean).
struct CountryMask {
    GridSpec spec;
    std::vector<std::string> countries;
    std::vector<std::int32_t> cell;  // row-major index into countries, -1 none

    void validate() const;
};

// ---- raster operations ----

// Bilinear resampling between cell-center grids. Destination centers outside
// the source center hull are clamped to the edge. Missing source neighbors
// renormalize the interpolation weights; an all-missing neighborhood yields
// missing.
GridField resample_bilinear(const GridField& src, const GridSpec& dst);

// cos(latitude)-weighted mean of the source cell centers covered by each
// destination cell. Destination cells covering no source center come back
// missing with a warning.
GridField coarsen_area_weighted(const GridField& src, const GridSpec& dst);

struct CountryMonthPanel {
    std::vector<std::string> countries;
    // per country: (year*12 + month-1) -> value
    std::vector<std::unordered_map<int, double>> values;

    int country_index(const std::string& id) const;
    bool get(int country, int year, int month, double* out) const;
    void set(int country, int year, int month, double v);
};

struct ZonalReport {
    std::vector<std::string> absent_countries;        // in mask list, no cells
    std::vector<std::string> zero_weight_countries;   // fell back to area mean
};

// Weighted zonal mean per country and month:
//   sum(value * weight * cellarea) / sum(weight * cellarea)
// over the country's non-missing cells; zero total weight falls back to the
// unweighted area mean (logged).
CountryMonthPanel zonal_aggregate(const std::vector<GridField>& fields,
                                  const GridField& weights,
                                  const CountryMask& mask,
                                  ZonalReport* report = nullptr);

// ---- file formats ----

// Plain binary grid: magic "AGRF", version, GridSpec, tag, year, sub,
// row-major float64 values (little-endian), NaN = missing.
void write_grid(const GridField& f, const std::string& path);
GridField read_grid(const std::string& path);

// Debug encoder: lat,lon,value CSV.
void write_grid_csv(const GridField& f, const std::string& path);

// Mask file: magic "AMSK", version, GridSpec, country table, int32 cells.
void write_mask(const CountryMask& m, const std::string& path);
CountryMask read_mask(const std::string& path);

// Loads every *.agrf file under dir, keyed by (tag, year, sub).
struct GridKey {
    VarTag tag;
    int year;
    int sub;
    auto operator<=>(const GridKey&) const = default;
};
std::map<GridKey, GridField> load_grid_dir(const std::string& dir);

inline double cell_area_weight(double lat_deg) {
    return std::cos(lat_deg * 0.017453292519943295);
}

}  // namespace attrib::gridops
