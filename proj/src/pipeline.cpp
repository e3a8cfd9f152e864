#include "attrib/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "attrib/csv.hpp"
#include "attrib/errors.hpp"
#include "attrib/logging.hpp"
#include "attrib/rng.hpp"

#include <json.hpp>

namespace attrib::pipeline {

namespace fs = std::filesystem;

const dataio::SeasonalPanel& Bundle::seasonal_for(const ModelSpec& spec) const {
    const auto it = seasonal.find({spec.window, spec.agg_weights});
    if (it == seasonal.end())
        throw DataError("bundle has no seasonal panel for window=" +
                        std::string(window_token(spec.window)) + " agg=" +
                        std::string(agg_weights_token(spec.agg_weights)));
    return it->second;
}

const downscale::ScenarioSet& Bundle::scenarios_for(const ModelSpec& spec) const {
    const auto it = scenarios.find({spec.window, spec.agg_weights});
    if (it == scenarios.end())
        throw DataError("bundle has no scenarios for window=" +
                        std::string(window_token(spec.window)) + " agg=" +
                        std::string(agg_weights_token(spec.agg_weights)));
    return it->second;
}

bool Bundle::has_scenarios(const ModelSpec& spec) const {
    return scenarios.count({spec.window, spec.agg_weights}) > 0;
}

const dataio::GrowthPanel& Bundle::growth_for(const ModelSpec& spec) const {
    if (spec.dependent == Dependent::output_growth) {
        if (!has_output) throw DataError("bundle has no output growth panel");
        return output_growth;
    }
    return tfp_growth;
}

Bundle bundle_from_world(const synth::World& w, bool all_variants) {
    Bundle b;
    b.meta = w.meta;
    b.tfp_growth = dataio::first_difference(w.tfp);
    if (!w.output.countries.empty()) {
        b.output_growth = dataio::first_difference(w.output);
        b.has_output = true;
    }

    // Season map through the NDVI pipeline (not the generator's truth).
    const season::NdviClim clim = season::ndvi_climatology(w.ndvi);
    const gridops::GridField months = season::greenest_month_cell(clim);
    b.season_map = season::country_green_month(months, w.cropland, w.mask);

    std::vector<std::pair<Window, AggWeights>> combos = {
        {Window::green, AggWeights::cropland}};
    if (all_variants) {
        combos = {{Window::green, AggWeights::cropland},
                  {Window::green, AggWeights::cropland_pasture},
                  {Window::calendar, AggWeights::cropland},
                  {Window::calendar, AggWeights::cropland_pasture}};
    }

    for (const AggWeights agg : {AggWeights::cropland, AggWeights::cropland_pasture}) {
        bool wanted = false;
        for (const auto& c : combos) {
            if (c.second == agg) wanted = true;
        }
        if (!wanted) continue;
        const gridops::GridField& weights =
            agg == AggWeights::cropland ? w.cropland : w.cropland_pasture;

        // Observed country-month weather, shared across windows.
        season::CountryMonthWeather cw;
        {
            auto split = [&](gridops::VarTag tag) {
                std::vector<gridops::GridField> sel;
                for (const auto& [key, f] : w.obs)
                    if (key.tag == tag) sel.push_back(f);
                return gridops::zonal_aggregate(sel, weights, w.mask);
            };
            cw.tmean = split(gridops::VarTag::tmean);
            cw.tmin = split(gridops::VarTag::tmin);
            cw.tmax = split(gridops::VarTag::tmax);
            cw.precip = split(gridops::VarTag::precip);
        }

        std::vector<downscale::GcmFields> gcms;
        for (const auto& g : w.gcms) {
            downscale::GcmFields gf;
            gf.id = g.id;
            gf.histnat = g.fine_histnat;
            gf.historical = g.fine_historical;
            gf.ssp245 = g.fine_ssp245;
            gcms.push_back(std::move(gf));
        }

        for (const auto& combo : combos) {
            if (combo.second != agg) continue;
            b.seasonal[combo] = season::seasonal_aggregate(cw, b.season_map, combo.first);
            if (!gcms.empty()) {
                downscale::AssembleOptions opt;
                opt.baseline_lo = std::max(w.params.scen_year_lo, w.params.year_lo - 11);
                opt.baseline_hi = std::min(w.params.scen_year_hi, w.params.year_lo + 11);
                opt.year_hi = w.params.scen_year_hi;
                b.scenarios[combo] = downscale::assemble_scenarios(
                    gcms, weights, w.mask, b.season_map, combo.first, opt);
            }
        }
    }
    return b;
}

dataio::RegTable bundle_regtable(const Bundle& b, const ModelSpec& spec,
                                 const dataio::AssembleOptions& opt) {
    return dataio::assemble_panel(b.growth_for(spec), b.seasonal_for(spec), b.meta, spec,
                                  opt);
}

std::uint64_t spec_seed(std::uint64_t master, const ModelSpec& spec) {
    return derive_seed(master, spec.key());
}

SpecOutcome run_spec_pipeline(const Bundle& b, const ModelSpec& spec,
                              const SpecRunConfig& cfg) {
    SpecOutcome out;
    const dataio::RegTable rt = bundle_regtable(b, spec);
    const econ::Design design = econ::build_design(rt, spec);
    out.n_obs = design.n();
    out.fit = econ::fit_twoway_fe(design);
    out.boot = inference::block_bootstrap(design, cfg.B, cfg.seed, cfg.workers);
    if (cfg.with_impact && b.has_scenarios(spec)) {
        out.impacts = counterfactual::ensemble_impacts(
            out.boot, b.scenarios_for(spec), rt, spec, cfg.n_ensemble,
            derive_seed(cfg.seed, "ensemble"), cfg.workers);
        out.has_impacts = true;
    }
    if (cfg.with_cv) {
        out.cv = inference::kfold_cv(rt, spec, cfg.cv_k, derive_seed(cfg.seed, "cv"),
                                     cfg.workers);
        out.has_cv = true;
    }
    return out;
}

std::string DataManifest::resolve(const std::string& rel) const {
    if (rel.empty()) return rel;
    const fs::path p(rel);
    if (p.is_absolute()) return rel;
    return (fs::path(root) / p).string();
}

DataManifest load_manifest(const std::string& dir_or_file) {
    fs::path path(dir_or_file);
    if (fs::is_directory(path)) path /= "manifest.json";
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest parse error: " + std::string(e.what()));
    }
    DataManifest m;
    m.root = path.parent_path().string();
    if (m.root.empty()) m.root = ".";
    m.tfp = j.value("tfp", "");
    m.output = j.value("output", "");
    m.meta = j.value("meta", "");
    m.obs_dir = j.value("obs_dir", "");
    m.ndvi_dir = j.value("ndvi_dir", "");
    m.mask = j.value("mask", "");
    if (j.contains("weights")) {
        for (const auto& [key, val] : j["weights"].items())
            m.weights[key] = val.get<std::string>();
    }
    if (j.contains("gcms")) {
        for (const auto& g : j["gcms"]) {
            DataManifest::Gcm e;
            e.id = g.at("id").get<std::string>();
            e.downscaled = g.value("downscaled", false);
            e.histnat_dir = g.at("histnat_dir").get<std::string>();
            e.historical_dir = g.at("historical_dir").get<std::string>();
            e.ssp245_dir = g.at("ssp245_dir").get<std::string>();
            m.gcms.push_back(std::move(e));
        }
    }
    if (j.contains("donors")) {
        for (const auto& [key, val] : j["donors"].items())
            m.donors[key] = val.get<std::string>();
    }
    if (j.contains("qmap_training")) {
        m.qmap_lo = j["qmap_training"][0].get<int>();
        m.qmap_hi = j["qmap_training"][1].get<int>();
    }
    if (j.contains("baseline_window")) {
        m.baseline_lo = j["baseline_window"][0].get<int>();
        m.baseline_hi = j["baseline_window"][1].get<int>();
    }
    return m;
}

std::string seasonal_csv_name(Window w, AggWeights a) {
    return std::string("seasonal_") + window_token(w) + "_" + agg_weights_token(a) + ".csv";
}
std::string scenarios_csv_name(Window w, AggWeights a) {
    return std::string("scenarios_") + window_token(w) + "_" + agg_weights_token(a) + ".csv";
}
std::string baselines_csv_name(Window w, AggWeights a) {
    return std::string("baselines_") + window_token(w) + "_" + agg_weights_token(a) + ".csv";
}

Bundle load_bundle(const std::string& data_dir, const std::string& artifacts_dir,
                   bool require_scenarios) {
    const DataManifest m = load_manifest(data_dir);
    Bundle b;
    const std::string growth_path = (fs::path(artifacts_dir) / "growth.csv").string();
    if (!fs::exists(growth_path))
        throw DataError("missing " + growth_path + "; run the ingest stage first");
    b.tfp_growth = dataio::read_growth(growth_path, "dln_tfp");
    {
        const csv::Table t = csv::read_file(growth_path);
        if (t.column("dln_output") >= 0) {
            b.output_growth = dataio::read_growth(growth_path, "dln_output");
            b.has_output = true;
        }
    }
    if (m.meta.empty()) throw DataError("manifest lacks a meta entry");
    b.meta = dataio::load_meta(m.resolve(m.meta));

    const std::string smap_path = (fs::path(artifacts_dir) / "season_map.csv").string();
    if (!fs::exists(smap_path))
        throw DataError("missing " + smap_path + "; run the season stage first");
    b.season_map = season::read_season_map(smap_path);

    for (const Window w : {Window::green, Window::calendar}) {
        for (const AggWeights a : {AggWeights::cropland, AggWeights::cropland_pasture}) {
            const std::string spath =
                (fs::path(artifacts_dir) / seasonal_csv_name(w, a)).string();
            if (!fs::exists(spath)) continue;
            b.seasonal[{w, a}] = dataio::read_seasonal_panel(spath);
            const std::string scen =
                (fs::path(artifacts_dir) / scenarios_csv_name(w, a)).string();
            const std::string base =
                (fs::path(artifacts_dir) / baselines_csv_name(w, a)).string();
            if (fs::exists(scen) && fs::exists(base)) {
                b.scenarios[{w, a}] = downscale::read_scenarios(scen, base);
            } else if (require_scenarios) {
                throw DataError("missing " + scen + "; run the downscale stage first");
            }
        }
    }
    if (b.seasonal.empty())
        throw DataError("no seasonal panels under " + artifacts_dir +
                        "; run the season stage first");
    return b;
}

}  // namespace attrib::pipeline
