#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "attrib/counterfactual.hpp"
#include "attrib/dataio.hpp"
#include "attrib/downscale.hpp"
#include "attrib/econ.hpp"
#include "attrib/inference.hpp"
#include "attrib/modelspec.hpp"
#include "attrib/season.hpp"
#include "attrib/synth.hpp"

namespace attrib::pipeline {

// Everything a model spec needs to run end to end: growth panels, metadata,
// the season map, and seasonal/scenario data for each (window, agg-weights)
// variant that was prepared.
struct Bundle {
    dataio::GrowthPanel tfp_growth;
    dataio::GrowthPanel output_growth;
    bool has_output = false;
    dataio::CountryMeta meta;
    season::SeasonMap season_map;
    std::map<std::pair<Window, AggWeights>, dataio::SeasonalPanel> seasonal;
    std::map<std::pair<Window, AggWeights>, downscale::ScenarioSet> scenarios;

    const dataio::SeasonalPanel& seasonal_for(const ModelSpec& spec) const;
    const downscale::ScenarioSet& scenarios_for(const ModelSpec& spec) const;
    const dataio::GrowthPanel& growth_for(const ModelSpec& spec) const;
    bool has_scenarios(const ModelSpec& spec) const;
};

// In-memory bundle from a synthetic world, using the world's bias-free fine
// scenario fields (the downscaled product). all_variants prepares all four
// (window, agg) combinations; otherwise only the baseline combination.
Bundle bundle_from_world(const synth::World& w, bool all_variants = false);

dataio::RegTable bundle_regtable(const Bundle& b, const ModelSpec& spec,
                                 const dataio::AssembleOptions& opt = {});

struct SpecRunConfig {
    int B = 500;
    int n_ensemble = 2000;
    int cv_k = 10;
    std::uint64_t seed = 1;
    int workers = 1;
    bool with_cv = true;
    bool with_impact = true;
};

struct SpecOutcome {
    econ::FitResult fit;
    inference::BootstrapEnsemble boot;
    counterfactual::ImpactEnsemble impacts;
    inference::CvResult cv;
    bool has_impacts = false;
    bool has_cv = false;
    std::size_t n_obs = 0;
};

// Fit + bootstrap + ensemble impacts + cross-validation for one spec. The
// sweep and the standalone CLI stages share this path, so a sweep row and a
// standalone run with the same derived seed match bit for bit.
SpecOutcome run_spec_pipeline(const Bundle& b, const ModelSpec& spec,
                              const SpecRunConfig& cfg);

// Per-spec seed, derived from the master seed and the spec key.
std::uint64_t spec_seed(std::uint64_t master, const ModelSpec& spec);

// ---- data manifest (file-based bundles) ----

struct DataManifest {
    std::string root;  // directory of the manifest file
    std::string tfp, output, meta;
    std::string obs_dir, ndvi_dir, mask;
    std::map<std::string, std::string> weights;  // cropland, cropland_pasture
    struct Gcm {
        std::string id;
        bool downscaled = false;
        std::string histnat_dir, historical_dir, ssp245_dir;
    };
    std::vector<Gcm> gcms;
    std::map<std::string, std::string> donors;
    int qmap_lo = 1961, qmap_hi = 2014;
    int baseline_lo = 1950, baseline_hi = 1972;

    std::string resolve(const std::string& rel) const;
};

DataManifest load_manifest(const std::string& dir_or_file);

// Conventional artifact filenames under an output directory.
std::string seasonal_csv_name(Window w, AggWeights a);
std::string scenarios_csv_name(Window w, AggWeights a);
std::string baselines_csv_name(Window w, AggWeights a);

// Loads a bundle from stage artifacts (ingest/season/downscale outputs).
// Missing variant files are skipped; at least the baseline variant must be
// present. require_scenarios demands scenario files for every loaded
// seasonal variant.
Bundle load_bundle(const std::string& data_dir, const std::string& artifacts_dir,
                   bool require_scenarios);

}  // namespace attrib::pipeline
