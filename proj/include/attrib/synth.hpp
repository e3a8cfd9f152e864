#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "attrib/dataio.hpp"
#include "attrib/downscale.hpp"
#include "attrib/econ.hpp"
#include "attrib/gridops.hpp"
#include "attrib/season.hpp"

namespace attrib::synth {

struct WorldParams {
    int n_countries = 20;
    int year_lo = 1961, year_hi = 2015;            // TFP panel span
    int scen_year_lo = 1950, scen_year_hi = 2020;  // hist-nat span
    int fine_nlat = 12, fine_nlon = 24;
    int coarse_nlat = 6, coarse_nlon = 12;
    std::map<std::string, double> beta = {
        {"dT", -0.05}, {"dT2", -0.005}, {"dP", 0.08}, {"dP2", -0.06}};
    double alpha_sd = 0.01;
    double theta_sd = 0.005;
    double noise_sd = 0.0;
    bool heteroskedastic = false;
    double trend_c_per_decade = 0.0;  // with-ACC warming injection
    double gcm_bias_t = 0.0;          // per-GCM additive temperature bias scale
    double gcm_bias_p = 0.0;          // per-GCM multiplicative precip bias scale
    double shock_t_sd = 0.8;          // country-year temperature shocks (degC)
    double shock_p_frac_sd = 0.12;    // country-year fractional precip shocks
    double seas_amp_t = 6.0;          // seasonal cycle amplitude (0 = flat year)
    double seas_amp_p = 0.5;
    bool identical_weight_sets = false;  // cropland_pasture := cropland
    int n_gcms = 3;
    int ndvi_years = 3;
    std::vector<int> peak_months;  // per country; empty = hemisphere default (7/1)
    bool make_output_panel = true;
    bool emit_fine_scenarios = false;  // also write the bias-free fine fields
    std::uint64_t seed = 1;
};

struct GcmWorld {
    std::string id;
    std::map<gridops::GridKey, gridops::GridField> histnat;     // coarse
    std::map<gridops::GridKey, gridops::GridField> historical;  // coarse
    std::map<gridops::GridKey, gridops::GridField> ssp245;      // coarse
    // The same scenario evaluated directly on the fine grid, bias-free: what
    // a perfect downscaler would return. Used by in-memory impact tests and
    // emitted under downscaled=true manifests.
    std::map<gridops::GridKey, gridops::GridField> fine_histnat;
    std::map<gridops::GridKey, gridops::GridField> fine_historical;
    std::map<gridops::GridKey, gridops::GridField> fine_ssp245;
};

struct World {
    WorldParams params;
    gridops::GridSpec fine, coarse;
    gridops::CountryMask mask;
    gridops::GridField cropland, cropland_pasture;
    std::vector<gridops::GridField> ndvi;               // biweekly, ndvi_years
    std::map<gridops::GridKey, gridops::GridField> obs; // fine monthly fields
    std::vector<GcmWorld> gcms;
    dataio::IndexPanel tfp;
    dataio::IndexPanel output;
    dataio::CountryMeta meta;
    season::SeasonMap true_season;
    std::map<std::string, double> true_beta;
    std::vector<double> true_alpha;   // per country index
    std::map<int, double> true_theta; // per growth year
    dataio::SeasonalPanel obs_seasonal;  // the panel the DGP was built from
};

// Full synthetic bundle: grids, NDVI, scenarios, TFP panel generated from
// the regression equation with known coefficients. Pure function of params.
World generate_world(const WorldParams& p);

// Writes the bundle in the pipeline's native formats plus manifest.json and
// truth.json.
void write_world(const World& w, const std::string& dir);

// Explicit-dummy weighted least squares on a dense system; verifies the
// absorbing estimator. Instances above ~2,000 rows are refused.
std::vector<double> oracle_fe_ols(const econ::Design& d);

// Panel-only DGP for estimator and resampling tests (no grids involved).
struct PanelParams {
    int n_countries = 20;
    int year_lo = 1981, year_hi = 2010;
    std::map<std::string, double> beta = {
        {"dT", -0.05}, {"dT2", -0.005}, {"dP", 0.08}, {"dP2", -0.06}};
    double alpha_sd = 0.01;
    double theta_sd = 0.005;
    double noise_sd = 0.01;
    bool heteroskedastic = false;
    double t_level_base = 15.0;
    double t_shock_sd = 1.0;
    double p_level_base = 800.0;  // mm
    double p_shock_sd = 120.0;
    int n_regions = 7;
    std::uint64_t seed = 1;
};

struct PanelWorld {
    dataio::RegTable rt;
    std::map<std::string, double> true_beta;
};

PanelWorld make_panel_world(const PanelParams& p);

}  // namespace attrib::synth
