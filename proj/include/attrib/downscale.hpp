#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "attrib/dataio.hpp"
#include "attrib/gridops.hpp"
#include "attrib/season.hpp"

namespace attrib::downscale {

enum class MapKind { additive, ratio };  // temperature vs precipitation

// Paired order statistics of model and observed training values for one
// (cell, month).
struct QmapEntry {
    std::vector<double> model_q;  // sorted nondecreasing
    std::vector<double> obs_q;    // sorted nondecreasing

    bool empty() const { return model_q.empty(); }
};

struct QmapTable {
    gridops::GridSpec spec;
    // cells[cell][month-1]
    std::vector<std::array<QmapEntry, 12>> cells;
};

// Fits the empirical quantile map per cell and calendar month over the
// training years. Only years where both sides are non-missing enter; fewer
// than 2 paired values is an error.
QmapTable fit_quantile_map(const std::map<gridops::GridKey, gridops::GridField>& model,
                           const std::map<gridops::GridKey, gridops::GridField>& obs_coarse,
                           gridops::VarTag tag, int year_lo, int year_hi);

// Piecewise-linear empirical mapping. Inside the training range the value's
// midpoint rank in the model quantiles is evaluated against the observed
// quantile function; outside, a constant offset (additive) or constant ratio
// (ratio) of the nearest endpoint pair extrapolates. A degenerate table (all
// model quantiles equal) maps everything to the observed median.
double apply_quantile_map(const QmapEntry& e, double x, MapKind kind);

gridops::GridField apply_quantile_map(const QmapTable& q, const gridops::GridField& f,
                                      MapKind kind);

// Per-month long-run means over [year_lo, year_hi].
std::array<gridops::GridField, 12> monthly_climatology(
    const std::map<gridops::GridKey, gridops::GridField>& fields, gridops::VarTag tag,
    int year_lo, int year_hi);

struct DisaggregateOptions {
    double ratio_cap = 5.0;    // max ratio anomaly before recombination
    double ratio_floor = 0.01; // mm/month floor on the climatology denominator
};

// Spatial disaggregation step of BCSD: anomaly against the coarse
// climatology (difference for temperature, floored/capped ratio for
// precipitation), bilinear interpolation to the fine grid, recombination
// with the fine climatology.
gridops::GridField spatial_disaggregate(const gridops::GridField& bc_coarse,
                                        const gridops::GridField& clim_coarse,
                                        const gridops::GridField& clim_fine,
                                        MapKind kind,
                                        const DisaggregateOptions& opt = {},
                                        int* cap_hits = nullptr);

// Country-level seasonal trajectories for one GCM under both scenarios, plus
// the without-ACC baseline climatology per country.
struct ScenarioTraj {
    std::string gcm;
    dataio::SeasonalPanel with_acc;
    dataio::SeasonalPanel without_acc;
    std::map<std::string, dataio::SeasonalValue> baseline;  // per country
    int baseline_lo = 0, baseline_hi = 0;  // actual window used
};

struct ScenarioSet {
    std::vector<ScenarioTraj> members;
    int year_lo = 1961;
    int year_hi = 2020;
};

struct GcmFields {
    std::string id;
    // per experiment: (tag, year, sub) -> monthly field on the fine grid
    std::map<gridops::GridKey, gridops::GridField> histnat;
    std::map<gridops::GridKey, gridops::GridField> historical;
    std::map<gridops::GridKey, gridops::GridField> ssp245;
};

struct AssembleOptions {
    int splice_year = 2015;       // first year taken from ssp245
    int baseline_lo = 1950;
    int baseline_hi = 1972;
    int year_lo = 1961;
    int year_hi = 2020;
};

// Splices historical+ssp245 into the with-ACC world, aggregates both worlds
// through the same weights/mask/season map as the observations, and computes
// the per-GCM without-ACC baseline climatology per country-season. GCMs
// missing an experiment are dropped with a warning.
ScenarioSet assemble_scenarios(const std::vector<GcmFields>& gcms,
                               const gridops::GridField& weights,
                               const gridops::CountryMask& mask,
                               const season::SeasonMap& smap, Window window,
                               const AssembleOptions& opt = {});

// Full BCSD for one variable of one experiment: quantile-map each monthly
// field (table trained on the historical experiment against coarsened
// observations), then spatially disaggregate against the observed
// climatologies.
std::map<gridops::GridKey, gridops::GridField> bcsd_experiment(
    const std::map<gridops::GridKey, gridops::GridField>& experiment_fields,
    const QmapTable& qmap,
    const std::array<gridops::GridField, 12>& clim_coarse,
    const std::array<gridops::GridField, 12>& clim_fine, MapKind kind,
    const DisaggregateOptions& opt = {}, int* cap_hits = nullptr);

// scenarios CSV: gcm,scenario,country,year,tmean,tmin,tmax,precip
void write_scenarios(const ScenarioSet& ss, const std::string& path);
ScenarioSet read_scenarios(const std::string& path, const std::string& baseline_path);
// baselines CSV: gcm,country,tmean,tmin,tmax,precip
void write_baselines(const ScenarioSet& ss, const std::string& path);

}  // namespace attrib::downscale
