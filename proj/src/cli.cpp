#include "attrib/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "attrib/counterfactual.hpp"
#include "attrib/csv.hpp"
#include "attrib/dataio.hpp"
#include "attrib/downscale.hpp"
#include "attrib/econ.hpp"
#include "attrib/errors.hpp"
#include "attrib/gridops.hpp"
#include "attrib/inference.hpp"
#include "attrib/logging.hpp"
#include "attrib/pipeline.hpp"
#include "attrib/rng.hpp"
#include "attrib/season.hpp"
#include "attrib/stats.hpp"
#include "attrib/sweep.hpp"
#include "attrib/synth.hpp"

namespace attrib::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* VERSION = "0.1.0";

struct Opts {
    std::string config_path;
    std::string data;
    std::string artifacts;
    std::string out;
    std::string spec_key = ModelSpec::baseline().key();
    std::string tfp_path, output_path, meta_path;
    std::string season_map_override;
    std::string mode = "year";
    std::string window_filter = "both";
    std::string agg_filter = "both";
    std::string drop_countries;  // comma separated
    long long seed = -1;
    bool seed_given = false;
    int workers = 0;
    int B = 500;
    int R = 10000;
    int n_ensemble = 2000;
    int k = 10;
    int lag_test = -1;
    int slope_split = 0;
    double min_coverage = 0.9;
    bool signed_latitude = false;
    json config;  // raw config document

    ModelSpec spec() const { return ModelSpec::from_key(spec_key); }
    dataio::AssembleOptions assemble_opts() const {
        dataio::AssembleOptions o;
        o.min_coverage = min_coverage;
        o.signed_latitude = signed_latitude;
        return o;
    }
    std::string artifacts_dir() const { return artifacts.empty() ? out : artifacts; }
};

// Config JSON fills anything the command line did not set explicitly.
void apply_config(const CLI::App& app, Opts& o) {
    if (o.config_path.empty()) return;
    std::ifstream in(o.config_path);
    if (!in) throw UsageError("cannot open config '" + o.config_path + "'");
    try {
        in >> o.config;
    } catch (const json::exception& e) {
        throw UsageError("config parse error: " + std::string(e.what()));
    }
    auto want = [&](const char* flag) {
        const CLI::Option* opt = app.get_option_no_throw(flag);
        return opt != nullptr && opt->count() == 0;
    };
    auto take_str = [&](const char* flag, const char* key, std::string& dst) {
        if (want(flag) && o.config.contains(key)) dst = o.config[key].get<std::string>();
    };
    auto take_int = [&](const char* flag, const char* key, auto& dst) {
        if (want(flag) && o.config.contains(key))
            dst = o.config[key].get<std::decay_t<decltype(dst)>>();
    };
    take_str("--data", "data", o.data);
    take_str("--artifacts", "artifacts", o.artifacts);
    take_str("--out", "out", o.out);
    take_str("--spec", "spec", o.spec_key);
    take_str("--tfp", "tfp", o.tfp_path);
    take_str("--output-index", "output", o.output_path);
    take_str("--meta", "meta", o.meta_path);
    take_str("--season-map", "season_map", o.season_map_override);
    take_str("--mode", "mode", o.mode);
    take_str("--window", "window", o.window_filter);
    take_str("--agg", "agg", o.agg_filter);
    take_str("--drop-countries", "drop_countries", o.drop_countries);
    take_int("-B", "B", o.B);
    take_int("-R", "R", o.R);
    take_int("--n-ensemble", "n_ensemble", o.n_ensemble);
    take_int("-k", "k", o.k);
    take_int("--workers", "workers", o.workers);
    take_int("--lag-test", "lag_test", o.lag_test);
    take_int("--slope-test", "slope_split", o.slope_split);
    take_int("--min-coverage", "min_coverage", o.min_coverage);
    if (app.get_option_no_throw("--seed") != nullptr &&
        app.get_option_no_throw("--seed")->count() == 0 && o.config.contains("seed")) {
        o.seed = o.config["seed"].get<long long>();
        o.seed_given = true;
    }
    if (o.config.contains("signed_latitude") &&
        app.get_option_no_throw("--signed-latitude") != nullptr &&
        app.get_option_no_throw("--signed-latitude")->count() == 0) {
        o.signed_latitude = o.config["signed_latitude"].get<bool>();
    }
}

std::uint64_t require_seed(const Opts& o) {
    if (!o.seed_given || o.seed < 0)
        throw UsageError("a nonnegative --seed is required (no wall-clock defaults)");
    return static_cast<std::uint64_t>(o.seed);
}

void ensure_out(const Opts& o) {
    if (o.out.empty()) throw UsageError("--out is required");
    fs::create_directories(o.out);
}

std::string out_path(const Opts& o, const std::string& name) {
    return (fs::path(o.out) / name).string();
}

void require_file(const std::string& path, const std::string& hint) {
    if (path.empty()) throw UsageError("missing required path: " + hint);
    if (!fs::exists(path)) throw DataError("input not found: " + path + " (" + hint + ")");
}

struct StageTimer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    long long ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - t0)
            .count();
    }
};

// Manifest with a config hash so reruns can be verified; timings are
// informational and excluded from the hash.
void write_run_manifest(const Opts& o, const std::string& command, const StageTimer& timer,
                        const std::vector<std::string>& outputs) {
    json cfg = {
        {"command", command},
        {"data", o.data},
        {"artifacts", o.artifacts_dir()},
        {"out", o.out},
        {"spec", o.spec_key},
        {"seed", o.seed},
        {"B", o.B},
        {"R", o.R},
        {"n_ensemble", o.n_ensemble},
        {"k", o.k},
        {"window", o.window_filter},
        {"agg", o.agg_filter},
        {"mode", o.mode},
        {"min_coverage", o.min_coverage},
        {"signed_latitude", o.signed_latitude},
    };
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(derive_seed(0, cfg.dump())));
    json m = {
        {"command", command},
        {"version", VERSION},
        {"config", cfg},
        {"config_hash", hash},
        {"elapsed_ms", timer.ms()},
        {"outputs", outputs},
    };
    std::ofstream f(out_path(o, "manifest_" + command + ".json"));
    f << m.dump(2) << "\n";
}

std::vector<Window> windows_of(const Opts& o) {
    if (o.window_filter == "both") return {Window::green, Window::calendar};
    return {window_from_token(o.window_filter)};
}

std::vector<AggWeights> aggs_of(const Opts& o) {
    if (o.agg_filter == "both") return {AggWeights::cropland, AggWeights::cropland_pasture};
    return {agg_weights_from_token(o.agg_filter)};
}

json beta_json(const econ::FitResult& fr) {
    json out = json::object();
    for (std::size_t i = 0; i < fr.colnames.size(); ++i) out[fr.colnames[i]] = fr.beta[i];
    return out;
}

// ---- subcommand bodies ----

int cmd_synth(const Opts& o) {
    StageTimer timer;
    ensure_out(o);
    synth::WorldParams p;
    p.seed = require_seed(o);
    if (o.config.contains("synth")) {
        const json& s = o.config["synth"];
        p.n_countries = s.value("n_countries", p.n_countries);
        p.year_lo = s.value("year_lo", p.year_lo);
        p.year_hi = s.value("year_hi", p.year_hi);
        p.scen_year_lo = s.value("scen_year_lo", p.scen_year_lo);
        p.scen_year_hi = s.value("scen_year_hi", p.scen_year_hi);
        p.fine_nlat = s.value("fine_nlat", p.fine_nlat);
        p.fine_nlon = s.value("fine_nlon", p.fine_nlon);
        p.coarse_nlat = s.value("coarse_nlat", p.coarse_nlat);
        p.coarse_nlon = s.value("coarse_nlon", p.coarse_nlon);
        p.noise_sd = s.value("noise_sd", p.noise_sd);
        p.alpha_sd = s.value("alpha_sd", p.alpha_sd);
        p.theta_sd = s.value("theta_sd", p.theta_sd);
        p.trend_c_per_decade = s.value("trend_c_per_decade", p.trend_c_per_decade);
        p.gcm_bias_t = s.value("gcm_bias_t", p.gcm_bias_t);
        p.gcm_bias_p = s.value("gcm_bias_p", p.gcm_bias_p);
        p.n_gcms = s.value("n_gcms", p.n_gcms);
        p.ndvi_years = s.value("ndvi_years", p.ndvi_years);
        p.heteroskedastic = s.value("heteroskedastic", p.heteroskedastic);
        p.identical_weight_sets = s.value("identical_weight_sets", p.identical_weight_sets);
        p.emit_fine_scenarios = s.value("emit_fine_scenarios", p.emit_fine_scenarios);
        p.seas_amp_t = s.value("seas_amp_t", p.seas_amp_t);
        p.seas_amp_p = s.value("seas_amp_p", p.seas_amp_p);
        if (s.contains("beta")) {
            p.beta.clear();
            for (const auto& [key, val] : s["beta"].items()) p.beta[key] = val.get<double>();
        }
        if (s.contains("peak_months"))
            p.peak_months = s["peak_months"].get<std::vector<int>>();
    }
    const synth::World w = synth::generate_world(p);
    synth::write_world(w, o.out);
    write_run_manifest(o, "synth", timer, {"manifest.json", "truth.json", "tfp.csv", "meta.csv"});
    std::cout << "synth: " << p.n_countries << " countries, years " << p.year_lo << "-"
              << p.year_hi << ", " << p.n_gcms << " GCMs -> " << o.out << "\n";
    return 0;
}

int cmd_ingest(const Opts& o) {
    StageTimer timer;
    ensure_out(o);
    std::string tfp = o.tfp_path, meta = o.meta_path, output = o.output_path;
    if ((tfp.empty() || meta.empty()) && !o.data.empty()) {
        const pipeline::DataManifest m = pipeline::load_manifest(o.data);
        if (tfp.empty()) tfp = m.resolve(m.tfp);
        if (meta.empty()) meta = m.resolve(m.meta);
        if (output.empty() && !m.output.empty()) output = m.resolve(m.output);
    }
    require_file(tfp, "--tfp");
    require_file(meta, "--meta");

    const dataio::IndexPanel panel = dataio::load_tfp_panel(tfp);
    const dataio::GrowthPanel growth = dataio::first_difference(panel);
    const dataio::CountryMeta cmeta = dataio::load_meta(meta);
    for (const auto& id : panel.countries) {
        if (!cmeta.entries.count(id))
            throw DataError("country '" + id + "' in " + tfp + " missing from meta");
    }

    dataio::GrowthPanel output_growth;
    bool has_output = false;
    if (!output.empty()) {
        require_file(output, "--output-index");
        output_growth =
            dataio::first_difference(dataio::load_index_panel(output, "output_index"));
        has_output = true;
    }
    dataio::write_growth(growth, has_output ? &output_growth : nullptr,
                         out_path(o, "growth.csv"));

    json report = {
        {"tfp_rows", panel.n_rows()},
        {"countries", panel.countries.size()},
        {"growth_rows", growth.n_rows()},
        {"has_output", has_output},
    };
    std::ofstream rf(out_path(o, "panel_report.json"));
    rf << report.dump(2) << "\n";
    write_run_manifest(o, "ingest", timer, {"growth.csv", "panel_report.json"});
    std::cout << "ingest: " << panel.n_rows() << " level rows, " << growth.n_rows()
              << " growth rows, " << panel.countries.size() << " countries\n";
    return 0;
}

int cmd_season(const Opts& o) {
    StageTimer timer;
    ensure_out(o);
    if (o.data.empty()) throw UsageError("--data (manifest directory) is required");
    const pipeline::DataManifest m = pipeline::load_manifest(o.data);

    require_file(m.resolve(m.mask), "manifest mask");
    const gridops::CountryMask mask = gridops::read_mask(m.resolve(m.mask));

    std::map<std::string, gridops::GridField> weight_fields;
    for (const auto& [name, rel] : m.weights) {
        require_file(m.resolve(rel), "weights." + name);
        weight_fields[name] = gridops::read_grid(m.resolve(rel));
    }
    auto weights_for = [&](AggWeights a) -> const gridops::GridField& {
        const std::string key = agg_weights_token(a);
        const auto it = weight_fields.find(key);
        if (it == weight_fields.end())
            throw DataError("manifest lacks weights." + key);
        return it->second;
    };

    season::SeasonMap smap;
    if (!o.season_map_override.empty()) {
        require_file(o.season_map_override, "--season-map");
        smap = season::read_season_map(o.season_map_override);
        log::info("season: using season map override " + o.season_map_override);
    } else {
        if (m.ndvi_dir.empty()) throw DataError("manifest lacks ndvi_dir");
        const auto ndvi_map = gridops::load_grid_dir(m.resolve(m.ndvi_dir));
        std::vector<gridops::GridField> series;
        for (const auto& [key, f] : ndvi_map)
            if (key.tag == gridops::VarTag::ndvi) series.push_back(f);
        const season::NdviClim clim = season::ndvi_climatology(series);
        const gridops::GridField months = season::greenest_month_cell(clim);
        smap = season::country_green_month(months, weights_for(AggWeights::cropland), mask,
                                           m.donors);
    }
    season::write_season_map(smap, out_path(o, "season_map.csv"));

    if (m.obs_dir.empty()) throw DataError("manifest lacks obs_dir");
    const auto obs = gridops::load_grid_dir(m.resolve(m.obs_dir));
    std::vector<std::string> outputs = {"season_map.csv"};
    for (const AggWeights agg : aggs_of(o)) {
        season::CountryMonthWeather cw;
        auto split = [&](gridops::VarTag tag) {
            std::vector<gridops::GridField> sel;
            for (const auto& [key, f] : obs)
                if (key.tag == tag) sel.push_back(f);
            return gridops::zonal_aggregate(sel, weights_for(agg), mask);
        };
        cw.tmean = split(gridops::VarTag::tmean);
        cw.tmin = split(gridops::VarTag::tmin);
        cw.tmax = split(gridops::VarTag::tmax);
        cw.precip = split(gridops::VarTag::precip);
        for (const Window win : windows_of(o)) {
            const dataio::SeasonalPanel panel = season::seasonal_aggregate(cw, smap, win);
            const std::string name = pipeline::seasonal_csv_name(win, agg);
            dataio::write_seasonal_panel(panel, out_path(o, name));
            outputs.push_back(name);
        }
    }
    write_run_manifest(o, "season", timer, outputs);
    std::cout << "season: wrote " << outputs.size() << " artifacts to " << o.out << "\n";
    return 0;
}

int cmd_downscale(const Opts& o) {
    StageTimer timer;
    ensure_out(o);
    if (o.data.empty()) throw UsageError("--data (manifest directory) is required");
    const pipeline::DataManifest m = pipeline::load_manifest(o.data);
    if (m.gcms.empty()) throw DataError("manifest lists no GCMs");

    const gridops::CountryMask mask = gridops::read_mask(m.resolve(m.mask));
    std::map<std::string, gridops::GridField> weight_fields;
    for (const auto& [name, rel] : m.weights)
        weight_fields[name] = gridops::read_grid(m.resolve(rel));

    const std::string smap_path =
        (fs::path(o.artifacts_dir()) / "season_map.csv").string();
    require_file(smap_path, "season_map.csv (run the season stage first)");
    const season::SeasonMap smap = season::read_season_map(smap_path);

    // Observations are needed once, for training and climatologies.
    std::map<gridops::GridKey, gridops::GridField> obs;
    bool any_bcsd = false;
    for (const auto& g : m.gcms)
        if (!g.downscaled) any_bcsd = true;
    if (any_bcsd) {
        if (m.obs_dir.empty()) throw DataError("manifest lacks obs_dir (needed for BCSD)");
        obs = gridops::load_grid_dir(m.resolve(m.obs_dir));
    }

    json report = json::object();
    std::vector<downscale::GcmFields> prepared;
    for (const auto& g : m.gcms) {
        downscale::GcmFields gf;
        gf.id = g.id;
        auto histnat = gridops::load_grid_dir(m.resolve(g.histnat_dir));
        auto historical = gridops::load_grid_dir(m.resolve(g.historical_dir));
        auto ssp = gridops::load_grid_dir(m.resolve(g.ssp245_dir));
        if (g.downscaled) {
            gf.histnat = std::move(histnat);
            gf.historical = std::move(historical);
            gf.ssp245 = std::move(ssp);
            report[g.id] = {{"downscaled_input", true}};
        } else {
            // Coarsen observations to this GCM grid over the training years.
            const gridops::GridSpec coarse = historical.begin()->second.spec;
            std::map<gridops::GridKey, gridops::GridField> obs_coarse;
            for (const auto& [key, f] : obs) {
                if (key.year < m.qmap_lo || key.year > m.qmap_hi) continue;
                obs_coarse.emplace(key, gridops::coarsen_area_weighted(f, coarse));
            }
            json gcm_report = {{"downscaled_input", false}};
            int cap_hits = 0;
            for (const gridops::VarTag tag :
                 {gridops::VarTag::tmean, gridops::VarTag::tmin, gridops::VarTag::tmax,
                  gridops::VarTag::precip}) {
                const downscale::MapKind kind = tag == gridops::VarTag::precip
                                                    ? downscale::MapKind::ratio
                                                    : downscale::MapKind::additive;
                const downscale::QmapTable qmap = downscale::fit_quantile_map(
                    historical, obs_coarse, tag, m.qmap_lo, m.qmap_hi);
                const auto clim_coarse =
                    downscale::monthly_climatology(obs_coarse, tag, m.qmap_lo, m.qmap_hi);
                const auto clim_fine =
                    downscale::monthly_climatology(obs, tag, m.qmap_lo, m.qmap_hi);
                auto pick = [&](const std::map<gridops::GridKey, gridops::GridField>& src) {
                    std::map<gridops::GridKey, gridops::GridField> sel;
                    for (const auto& [key, f] : src)
                        if (key.tag == tag) sel.emplace(key, f);
                    return sel;
                };
                auto merge = [](std::map<gridops::GridKey, gridops::GridField>& dst,
                                std::map<gridops::GridKey, gridops::GridField>&& src) {
                    for (auto& [key, f] : src) dst.emplace(key, std::move(f));
                };
                merge(gf.histnat, downscale::bcsd_experiment(pick(histnat), qmap, clim_coarse,
                                                             clim_fine, kind, {}, &cap_hits));
                merge(gf.historical, downscale::bcsd_experiment(pick(historical), qmap,
                                                                clim_coarse, clim_fine, kind,
                                                                {}, &cap_hits));
                merge(gf.ssp245, downscale::bcsd_experiment(pick(ssp), qmap, clim_coarse,
                                                            clim_fine, kind, {}, &cap_hits));
            }
            gcm_report["ratio_cap_hits"] = cap_hits;
            report[g.id] = gcm_report;
        }
        prepared.push_back(std::move(gf));
    }

    std::vector<std::string> outputs;
    for (const AggWeights agg : aggs_of(o)) {
        const auto wit = weight_fields.find(agg_weights_token(agg));
        if (wit == weight_fields.end()) throw DataError("manifest lacks weights for agg variant");
        for (const Window win : windows_of(o)) {
            downscale::AssembleOptions aopt;
            aopt.baseline_lo = m.baseline_lo;
            aopt.baseline_hi = m.baseline_hi;
            const downscale::ScenarioSet ss =
                downscale::assemble_scenarios(prepared, wit->second, mask, smap, win, aopt);
            const std::string sname = pipeline::scenarios_csv_name(win, agg);
            const std::string bname = pipeline::baselines_csv_name(win, agg);
            downscale::write_scenarios(ss, out_path(o, sname));
            downscale::write_baselines(ss, out_path(o, bname));
            outputs.push_back(sname);
            outputs.push_back(bname);
        }
    }
    std::ofstream rf(out_path(o, "downscale_report.json"));
    rf << report.dump(2) << "\n";
    outputs.push_back("downscale_report.json");
    write_run_manifest(o, "downscale", timer, outputs);
    std::cout << "downscale: prepared " << prepared.size() << " GCMs -> " << o.out << "\n";
    return 0;
}

// Shared loading for fit/bootstrap/placebo/cv/impact.
struct FitInputs {
    pipeline::Bundle bundle;
    dataio::RegTable rt;
    econ::Design design;
};

FitInputs load_fit_inputs(const Opts& o, bool require_scenarios) {
    FitInputs fi;
    fi.bundle = pipeline::load_bundle(o.data, o.artifacts_dir(), require_scenarios);
    const ModelSpec spec = o.spec();
    fi.rt = pipeline::bundle_regtable(fi.bundle, spec, o.assemble_opts());
    fi.design = econ::build_design(fi.rt, spec);
    return fi;
}

void write_curves(const Opts& o, const econ::Design& d, const econ::FitResult& fit,
                  std::vector<std::string>* outputs) {
    const ModelSpec spec = o.spec();
    // Exposure grids span the observed seasonal levels.
    auto grid_of = [](double lo, double hi, int n) {
        std::vector<double> g(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
        return g;
    };
    {
        double lo = 1e300, hi = -1e300;
        for (double x : d.t_exposure) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        const auto grid = grid_of(lo, hi, 101);
        csv::Writer w(out_path(o, "curve_T.csv"));
        for (const char* h : {"group", "t_level_c", "response", "marginal"}) w.field(std::string(h));
        w.endrow();
        for (int g = 0; g < fit.ngroups; ++g) {
            std::vector<double> ex, ew;
            for (std::size_t i = 0; i < d.n(); ++i) {
                if (d.group[i] == g) {
                    ex.push_back(d.t_exposure[i]);
                    ew.push_back(d.w[i]);
                }
            }
            const econ::Curve c = econ::response_curve(fit, g, 'T', grid, ex, ew);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                w.field(g);
                w.field(c.x[i]);
                w.field(c.value[i]);
                w.field(c.marginal[i]);
                w.endrow();
            }
        }
        outputs->push_back("curve_T.csv");
    }
    if (spec.include_precip) {
        double lo = 1e300, hi = -1e300;
        for (double x : d.p_exposure) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        const auto grid = grid_of(lo, hi, 101);  // model units (1,000 mm)
        csv::Writer w(out_path(o, "curve_P.csv"));
        for (const char* h : {"group", "p_level_mm", "response", "marginal"}) w.field(std::string(h));
        w.endrow();
        for (int g = 0; g < fit.ngroups; ++g) {
            std::vector<double> ex, ew;
            for (std::size_t i = 0; i < d.n(); ++i) {
                if (d.group[i] == g) {
                    ex.push_back(d.p_exposure[i]);
                    ew.push_back(d.w[i]);
                }
            }
            const econ::Curve c = econ::response_curve(fit, g, 'P', grid, ex, ew);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                w.field(g);
                w.field(c.x[i] * 1000.0);  // report in mm
                w.field(c.value[i]);
                w.field(c.marginal[i]);
                w.endrow();
            }
        }
        outputs->push_back("curve_P.csv");
    }
}

int cmd_fit(const Opts& o) {
    StageTimer timer;
    ensure_out(o);
    FitInputs fi = load_fit_inputs(o, false);
    const econ::FitResult fit = econ::fit_twoway_fe(fi.design);

    json out = {
        {"spec", o.spec_key},
        {"n", fit.n},
        {"within_r2", fit.within_r2},
        {"demean_iterations", fit.demean_iterations},
        {"demean_delta", fit.demean_delta},
        {"mu", fit.mu},
        {"beta", beta_json(fit)},
    };
    json alpha = json::object();
    for (std::size_t i = 0; i < fit.country_names.size(); ++i)
        alpha[fit.country_names[i]] = fit.alpha[i];
    out["alpha"] = alpha;
    json theta = json::object();
    for (std::size_t i = 0; i < fit.years.size(); ++i)
        theta[std::to_string(fit.years[i])] = fit.theta[i];
    out["theta"] = theta;

    std::vector<std::string> outputs = {"fit.json"};
    write_curves(o, fi.design, fit, &outputs);

    if (o.lag_test >= 0) {
        const econ::LagTestResult lt = econ::cumulative_lag_test(
            fi.rt, o.spec(), o.lag_test, o.B, derive_seed(require_seed(o), "lagtest"),
            o.workers);
        json lj = {
            {"lags", lt.lags},  {"wald", lt.wald},       {"p_value", lt.p_value},
            {"n_rows", lt.n_rows}, {"families", lt.families},
        };
        json sums = json::object();
        for (std::size_t i = 0; i < lt.families.size(); ++i) sums[lt.families[i]] = lt.lag_sums[i];
        lj["lag_sums"] = sums;
        std::ofstream f(out_path(o, "lag_test.json"));
        f << lj.dump(2) << "\n";
        outputs.push_back("lag_test.json");
        out["lag_test"] = {{"p_value", lt.p_value}};
    }
    if (o.slope_split > 0) {
        const econ::SlopeChangeResult sc = econ::slope_change_test(
            fi.rt, o.spec(), o.slope_split, o.B, derive_seed(require_seed(o), "slopetest"),
            o.workers);
        json sj = {
            {"split_year", sc.split_year},
            {"base_slope", sc.base_slope},
            {"interaction", sc.interaction},
            {"p_value", sc.p_value},
        };
        std::ofstream f(out_path(o, "slope_test.json"));
        f << sj.dump(2) << "\n";
        outputs.push_back("slope_test.json");
        out["slope_test"] = {{"p_value", sc.p_value}};
    }

    std::ofstream f(out_path(o, "fit.json"));
    f << out.dump(2) << "\n";
    write_run_manifest(o, "fit", timer, outputs);
    std::cout << "fit: n=" << fit.n << " within_r2=" << csv::format_double(fit.within_r2)
              << "\n";
    return 0;
}

int cmd_bootstrap(const Opts& o) {
    StageTimer timer;
    ensure_out(o);
    const std::uint64_t seed = require_seed(o);
    FitInputs fi = load_fit_inputs(o, false);
    const econ::FitResult fit = econ::fit_twoway_fe(fi.design);
    const inference::BootstrapEnsemble be =
        inference::block_bootstrap(fi.design, o.B, seed, o.workers);

    {
        csv::Writer w(out_path(o, "bootstrap.csv"));
        w.field(std::string("draw_id"));
        for (const auto& c : be.colnames) w.field(c);
        w.endrow();
        for (std::size_t b = 0; b < be.draws.size(); ++b) {
            w.field(static_cast<long long>(b));
            for (double v : be.draws[b]) w.field(v);
            w.endrow();
        }
    }
    json summary = {
        {"B", static_cast<int>(be.draws.size())},
        {"n_blocks", be.n_blocks},
        {"redraws", be.redraws},
        {"seed", o.seed},
    };
    json coefs = json::object();
    for (std::size_t c = 0; c < be.colnames.size(); ++c) {
        const auto ci90 = be.percentile_ci(static_cast<int>(c), 0.90);
        const auto ci95 = be.percentile_ci(static_cast<int>(c), 0.95);
        coefs[be.colnames[c]] = {
            {"estimate", fit.beta[c]},
            {"ci90", {ci90.first, ci90.second}},
            {"ci95", {ci95.first, ci95.second}},
        };
    }
    summary["coefficients"] = coefs;
    std::ofstream f(out_path(o, "bootstrap_summary.json"));
    f << summary.dump(2) << "\n";
    write_run_manifest(o, "bootstrap", timer, {"bootstrap.csv", "bootstrap_summary.json"});
    std::cout << "bootstrap: B=" << be.draws.size() << " blocks=" << be.n_blocks
              << " redraws=" << be.redraws << "\n";
    return 0;
}

int cmd_placebo(const Opts& o) {
    StageTimer timer;
    ensure_out(o);
    const std::uint64_t seed = require_seed(o);
    FitInputs fi = load_fit_inputs(o, false);
    const inference::PlaceboMode mode =
        o.mode == "country" ? inference::PlaceboMode::country : inference::PlaceboMode::year;
    if (o.mode != "country" && o.mode != "year")
        throw UsageError("--mode must be year or country");
    const inference::PlaceboDistribution pd =
        inference::placebo_test(fi.rt, o.spec(), mode, o.R, seed, o.workers);

    {
        csv::Writer w(out_path(o, "placebo.csv"));
        w.field(std::string("rep_id"));
        for (const auto& c : pd.colnames) w.field(c);
        w.endrow();
        for (std::size_t r = 0; r < pd.draws.size(); ++r) {
            w.field(static_cast<long long>(r));
            for (double v : pd.draws[r]) w.field(v);
            w.endrow();
        }
    }
    json summary = {{"R", static_cast<int>(pd.draws.size())},
                    {"mode", o.mode},
                    {"seed", o.seed}};
    json coefs = json::object();
    for (std::size_t c = 0; c < pd.colnames.size(); ++c) {
        coefs[pd.colnames[c]] = {
            {"sample", pd.sample[c]},
            {"percentile", pd.percentile[c]},
            {"outside_95", pd.percentile[c] < 2.5 || pd.percentile[c] > 97.5},
        };
    }
    summary["coefficients"] = coefs;
    std::ofstream f(out_path(o, "placebo_summary.json"));
    f << summary.dump(2) << "\n";
    write_run_manifest(o, "placebo", timer, {"placebo.csv", "placebo_summary.json"});
    std::cout << "placebo: R=" << pd.draws.size() << " mode=" << o.mode << "\n";
    return 0;
}

int cmd_cv(const Opts& o) {
    StageTimer timer;
    ensure_out(o);
    const std::uint64_t seed = require_seed(o);
    FitInputs fi = load_fit_inputs(o, false);
    const inference::CvResult cv = inference::kfold_cv(fi.rt, o.spec(), o.k, seed, o.workers);
    json out = {
        {"k", cv.k},
        {"mse_full", cv.mse_full},
        {"mse_noweather", cv.mse_noweather},
        {"reduction", cv.reduction},
        {"seed", o.seed},
    };
    std::ofstream f(out_path(o, "cv.json"));
    f << out.dump(2) << "\n";
    write_run_manifest(o, "cv", timer, {"cv.json"});
    std::cout << "cv: reduction=" << csv::format_double(cv.reduction) << "\n";
    return 0;
}

inference::BootstrapEnsemble read_bootstrap_csv(const std::string& path) {
    const csv::Table t = csv::read_file(path);
    if (t.header.empty() || t.header.front() != "draw_id")
        throw DataError(path + ": expected draw_id leading column");
    inference::BootstrapEnsemble be;
    be.colnames.assign(t.header.begin() + 1, t.header.end());
    std::size_t lineno = 1;
    for (const auto& row : t.rows) {
        ++lineno;
        std::vector<double> draw;
        for (std::size_t c = 1; c < row.size(); ++c)
            draw.push_back(csv::parse_double(row[c], path, lineno, t.header[c]));
        be.draws.push_back(std::move(draw));
    }
    if (be.draws.empty()) throw DataError(path + ": no draws");
    return be;
}

int cmd_impact(const Opts& o) {
    StageTimer timer;
    ensure_out(o);
    const std::uint64_t seed = require_seed(o);
    const ModelSpec spec = o.spec();
    pipeline::Bundle bundle = pipeline::load_bundle(o.data, o.artifacts_dir(), false);
    if (!bundle.has_scenarios(spec))
        throw DataError("no scenarios prepared for this spec; run the downscale stage");
    const dataio::RegTable rt = pipeline::bundle_regtable(bundle, spec, o.assemble_opts());
    const std::string boot_path = (fs::path(o.artifacts_dir()) / "bootstrap.csv").string();
    require_file(boot_path, "bootstrap.csv (run the bootstrap stage first)");
    const inference::BootstrapEnsemble be = read_bootstrap_csv(boot_path);

    const counterfactual::ImpactEnsemble ie = counterfactual::ensemble_impacts(
        be, bundle.scenarios_for(spec), rt, spec, o.n_ensemble, seed, o.workers);
    const auto levels =
        counterfactual::project_and_level(bundle.growth_for(spec), ie, rt);
    const counterfactual::YearsLostResult yl = counterfactual::years_lost(levels.at("global"));

    {
        csv::Writer w(out_path(o, "impacts.csv"));
        for (const char* h : {"member_id", "draw", "gcm", "entity", "year", "impact"})
            w.field(std::string(h));
        w.endrow();
        for (std::size_t i = 0; i < ie.global.size(); ++i) {
            const auto [draw, gcm] = ie.pairs[i];
            for (std::size_t y = 0; y < ie.years.size(); ++y) {
                w.field(static_cast<long long>(i));
                w.field(draw);
                w.field(ie.gcms[static_cast<std::size_t>(gcm)]);
                w.field(std::string("global"));
                w.field(ie.years[y]);
                w.field(ie.global[i][y]);
                w.endrow();
            }
            for (std::size_t r = 0; r < ie.regions.size(); ++r) {
                for (std::size_t y = 0; y < ie.years.size(); ++y) {
                    w.field(static_cast<long long>(i));
                    w.field(draw);
                    w.field(ie.gcms[static_cast<std::size_t>(gcm)]);
                    w.field(ie.regions[r]);
                    w.field(ie.years[y]);
                    w.field(ie.regional[r][i][y]);
                    w.endrow();
                }
            }
        }
        for (std::size_t c = 0; c < ie.countries.size(); ++c) {
            for (std::size_t y = 0; y < ie.years.size(); ++y) {
                w.field(std::string("mean"));
                w.field(-1);
                w.field(std::string(""));
                w.field(ie.countries[c]);
                w.field(ie.years[y]);
                w.field(ie.country_mean[c][y]);
                w.endrow();
            }
        }
    }
    {
        csv::Writer w(out_path(o, "levels.csv"));
        for (const char* h :
             {"entity", "year", "observed", "cf_mean", "cf_q05", "cf_q95", "projected"})
            w.field(std::string(h));
        w.endrow();
        for (const auto& [name, lp] : levels) {
            for (std::size_t y = 0; y < lp.years.size(); ++y) {
                w.field(name);
                w.field(lp.years[y]);
                w.field(lp.observed[y]);
                w.field(lp.cf_mean[y]);
                w.field(lp.cf_q05[y]);
                w.field(lp.cf_q95[y]);
                w.field(std::string(lp.years[y] >= lp.projection_start ? "1" : "0"));
                w.endrow();
            }
        }
    }
    json summary = {
        {"spec", o.spec_key},
        {"n_ensemble", static_cast<int>(ie.global.size())},
        {"seed", o.seed},
        {"terminal_year", ie.years.back()},
        {"global",
         {{"impact2020_mean", ie.terminal_mean},
          {"impact2020_pct", 100.0 * (std::exp(ie.terminal_mean) - 1.0)},
          {"ci90", {ie.terminal_ci90.first, ie.terminal_ci90.second}},
          {"ci95", {ie.terminal_ci95.first, ie.terminal_ci95.second}}}},
    };
    json regions = json::object();
    for (std::size_t r = 0; r < ie.regions.size(); ++r) {
        std::vector<double> terminal;
        terminal.reserve(ie.regional[r].size());
        for (const auto& path : ie.regional[r]) terminal.push_back(path.back());
        std::sort(terminal.begin(), terminal.end());
        double mean = 0.0;
        for (double v : terminal) mean += v;
        mean /= static_cast<double>(terminal.size());
        regions[ie.regions[r]] = {
            {"impact2020_mean", mean},
            {"impact2020_pct", 100.0 * (std::exp(mean) - 1.0)},
            {"ci90",
             {stats::quantile_sorted(terminal, 0.05), stats::quantile_sorted(terminal, 0.95)}},
        };
    }
    summary["regional"] = regions;
    summary["years_lost"] = {
        {"mean", yl.mean_estimate},
        {"ci90", {yl.ci90.first, yl.ci90.second}},
        {"no_crossing_members", yl.no_crossing},
    };
    std::ofstream f(out_path(o, "summary.json"));
    f << summary.dump(2) << "\n";
    write_run_manifest(o, "impact", timer, {"impacts.csv", "levels.csv", "summary.json"});
    std::cout << "impact: terminal mean " << csv::format_double(ie.terminal_mean)
              << " log points (" << csv::format_double(100.0 * (std::exp(ie.terminal_mean) - 1.0))
              << "%)\n";
    return 0;
}

int cmd_sweep(const Opts& o) {
    StageTimer timer;
    ensure_out(o);
    const std::uint64_t seed = require_seed(o);
    pipeline::Bundle bundle = pipeline::load_bundle(o.data, o.artifacts_dir(), true);

    sweep::SweepConfig cfg;
    cfg.B = o.B;
    cfg.n_ensemble = o.n_ensemble;
    cfg.cv_k = o.k;
    cfg.seed = seed;
    cfg.workers = o.workers;
    if (!o.drop_countries.empty()) {
        cfg.drop_countries.clear();
        std::size_t start = 0;
        while (start <= o.drop_countries.size()) {
            const auto pos = o.drop_countries.find(',', start);
            const std::string tok = o.drop_countries.substr(
                start, pos == std::string::npos ? std::string::npos : pos - start);
            if (!tok.empty()) cfg.drop_countries.push_back(tok);
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
    }
    const auto specs = sweep::enumerate_models(cfg.drop_countries);
    const sweep::SweepReport report = sweep::run_sweep(bundle, specs, cfg);
    sweep::write_sweep_csv(report, out_path(o, "sweep.csv"));

    json m = {
        {"n_specs", static_cast<int>(specs.size())},
        {"n_failed", report.n_failed},
        {"summary_mean", report.summary_mean},
        {"summary_sd", report.summary_sd},
        {"summary_mean_pct", 100.0 * (std::exp(report.summary_mean) - 1.0)},
        {"B", cfg.B},
        {"n_ensemble", cfg.n_ensemble},
        {"cv_k", cfg.cv_k},
        {"seed", o.seed},
        {"drop_countries", cfg.drop_countries},
    };
    std::ofstream f(out_path(o, "sweep_manifest.json"));
    f << m.dump(2) << "\n";
    write_run_manifest(o, "sweep", timer, {"sweep.csv", "sweep_manifest.json"});
    std::cout << "sweep: " << specs.size() << " specs, summary mean "
              << csv::format_double(report.summary_mean) << " +- "
              << csv::format_double(report.summary_sd) << " log points\n";
    return 0;
}

int cmd_report(const Opts& o) {
    StageTimer timer;
    ensure_out(o);
    const std::string art = o.artifacts_dir();
    fs::create_directories(out_path(o, "report"));
    std::vector<std::string> produced;

    auto exists = [&](const std::string& name) { return fs::exists(fs::path(art) / name); };
    auto artifact = [&](const std::string& name) { return (fs::path(art) / name).string(); };

    if (exists("growth.csv")) {
        // Fig 1A equivalent: observed level trajectories per country.
        const dataio::GrowthPanel g = dataio::read_growth(artifact("growth.csv"), "dln_tfp");
        csv::Writer w(out_path(o, "report/fig1a_levels.csv"));
        for (const char* h : {"country", "year", "level"}) w.field(std::string(h));
        w.endrow();
        for (std::size_t c = 0; c < g.countries.size(); ++c) {
            double acc = 0.0;
            bool first = true;
            for (const auto& [year, dln] : g.growth[c]) {
                if (first) {
                    w.field(g.countries[c]);
                    w.field(year - 1);
                    w.field(100.0);
                    w.endrow();
                    first = false;
                }
                acc += dln;
                w.field(g.countries[c]);
                w.field(year);
                w.field(100.0 * std::exp(acc));
                w.endrow();
            }
        }
        produced.push_back("fig1a_levels.csv");

        // Fig 1B equivalent: per-year growth distribution quantiles.
        std::map<int, std::vector<double>> by_year;
        for (std::size_t c = 0; c < g.countries.size(); ++c)
            for (const auto& [year, dln] : g.growth[c]) by_year[year].push_back(dln);
        csv::Writer wb(out_path(o, "report/fig1b_growth_dist.csv"));
        for (const char* h : {"year", "q05", "q25", "q50", "q75", "q95"})
            wb.field(std::string(h));
        wb.endrow();
        for (auto& [year, v] : by_year) {
            std::sort(v.begin(), v.end());
            wb.field(year);
            for (const double q : {0.05, 0.25, 0.50, 0.75, 0.95})
                wb.field(stats::quantile_sorted(v, q));
            wb.endrow();
        }
        produced.push_back("fig1b_growth_dist.csv");
    }

    for (const char* name : {"curve_T.csv", "curve_P.csv"}) {
        if (exists(name)) {
            fs::copy_file(artifact(name), out_path(o, std::string("report/fig2_") + name),
                          fs::copy_options::overwrite_existing);
            produced.push_back(std::string("fig2_") + name);
        }
    }
    if (exists("placebo.csv")) {
        fs::copy_file(artifact("placebo.csv"), out_path(o, "report/fig2_placebo.csv"),
                      fs::copy_options::overwrite_existing);
        produced.push_back("fig2_placebo.csv");
    }

    if (exists("impacts.csv")) {
        // Fig 3A equivalent: global impact path quantiles across members.
        const csv::Table t = csv::read_file(artifact("impacts.csv"));
        const int c_entity = t.require("entity");
        const int c_year = t.require("year");
        const int c_impact = t.require("impact");
        const int c_member = t.require("member_id");
        std::map<int, std::vector<double>> by_year;
        for (const auto& row : t.rows) {
            if (row[static_cast<std::size_t>(c_entity)] != "global") continue;
            if (row[static_cast<std::size_t>(c_member)] == "mean") continue;
            by_year[std::stoi(row[static_cast<std::size_t>(c_year)])].push_back(
                std::stod(row[static_cast<std::size_t>(c_impact)]));
        }
        csv::Writer w(out_path(o, "report/fig3a_impact.csv"));
        for (const char* h : {"year", "mean", "q025", "q05", "q95", "q975"})
            w.field(std::string(h));
        w.endrow();
        for (auto& [year, v] : by_year) {
            std::sort(v.begin(), v.end());
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            w.field(year);
            w.field(mean);
            for (const double q : {0.025, 0.05, 0.95, 0.975})
                w.field(stats::quantile_sorted(v, q));
            w.endrow();
        }
        produced.push_back("fig3a_impact.csv");

        // Fig 4 equivalent: regional terminal distributions.
        std::map<std::string, std::vector<double>> by_region;
        int last_year = 0;
        for (const auto& row : t.rows)
            last_year = std::max(last_year, std::stoi(row[static_cast<std::size_t>(c_year)]));
        for (const auto& row : t.rows) {
            const std::string& entity = row[static_cast<std::size_t>(c_entity)];
            if (entity == "global") continue;
            if (row[static_cast<std::size_t>(c_member)] == "mean") continue;
            if (std::stoi(row[static_cast<std::size_t>(c_year)]) != last_year) continue;
            by_region[entity].push_back(std::stod(row[static_cast<std::size_t>(c_impact)]));
        }
        csv::Writer wr(out_path(o, "report/fig4_regional.csv"));
        for (const char* h : {"region", "mean", "q025", "q05", "q95", "q975"})
            wr.field(std::string(h));
        wr.endrow();
        for (auto& [region, v] : by_region) {
            std::sort(v.begin(), v.end());
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            wr.field(region);
            wr.field(mean);
            for (const double q : {0.025, 0.05, 0.95, 0.975})
                wr.field(stats::quantile_sorted(v, q));
            wr.endrow();
        }
        produced.push_back("fig4_regional.csv");
    }

    if (exists("levels.csv")) {
        fs::copy_file(artifact("levels.csv"), out_path(o, "report/fig3b_levels.csv"),
                      fs::copy_options::overwrite_existing);
        produced.push_back("fig3b_levels.csv");
    }
    if (exists("sweep.csv")) {
        fs::copy_file(artifact("sweep.csv"), out_path(o, "report/fig5_sweep.csv"),
                      fs::copy_options::overwrite_existing);
        produced.push_back("fig5_sweep.csv");
    }

    json m = {{"produced", produced}};
    std::ofstream f(out_path(o, "report/report_manifest.json"));
    f << m.dump(2) << "\n";
    write_run_manifest(o, "report", timer, produced);
    std::cout << "report: " << produced.size() << " plot-ready CSVs under " << o.out
              << "/report\n";
    return 0;
}

void add_common(CLI::App* cmd, Opts& o) {
    cmd->add_option("--config", o.config_path, "JSON config; flags override its keys");
    cmd->add_option("--data", o.data, "data directory (contains manifest.json)");
    cmd->add_option("--artifacts", o.artifacts,
                    "directory with upstream stage outputs (default: --out)");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--spec", o.spec_key, "model spec key");
    cmd->add_option("--seed", o.seed, "master RNG seed (required where stochastic)")
        ->each([&o](const std::string&) { o.seed_given = true; });
    cmd->add_option("--workers", o.workers, "worker threads (ATTRIB_WORKERS fallback)");
    cmd->add_option("--min-coverage", o.min_coverage, "weather join coverage threshold");
    cmd->add_flag("--signed-latitude", o.signed_latitude,
                  "latitude terciles on signed latitude");
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"weather-response estimation and climate counterfactuals for TFP growth"};
    app.require_subcommand(1);

    Opts o;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic data bundle");
    add_common(synth_cmd, o);

    auto* ingest_cmd = app.add_subcommand("ingest", "load and difference the index panels");
    add_common(ingest_cmd, o);
    ingest_cmd->add_option("--tfp", o.tfp_path, "tfp.csv path");
    ingest_cmd->add_option("--meta", o.meta_path, "meta.csv path");
    ingest_cmd->add_option("--output-index", o.output_path, "output.csv path (optional)");

    auto* season_cmd = app.add_subcommand("season", "green season map + seasonal weather");
    add_common(season_cmd, o);
    season_cmd->add_option("--season-map", o.season_map_override, "override season map CSV");
    season_cmd->add_option("--window", o.window_filter, "green|calendar|both");
    season_cmd->add_option("--agg", o.agg_filter, "cropland|cropland_pasture|both");

    auto* down_cmd = app.add_subcommand("downscale", "BCSD + scenario assembly");
    add_common(down_cmd, o);
    down_cmd->add_option("--window", o.window_filter, "green|calendar|both");
    down_cmd->add_option("--agg", o.agg_filter, "cropland|cropland_pasture|both");

    auto* fit_cmd = app.add_subcommand("fit", "two-way FE regression + response curves");
    add_common(fit_cmd, o);
    fit_cmd->add_option("-B,--bootstrap-b", o.B, "bootstrap draws for auxiliary tests");
    fit_cmd->add_option("--lag-test", o.lag_test, "run the cumulative lag test with L lags");
    fit_cmd->add_option("--slope-test", o.slope_split,
                        "run the changing-sensitivity test at this split year");

    auto* boot_cmd = app.add_subcommand("bootstrap", "year-region block bootstrap");
    add_common(boot_cmd, o);
    boot_cmd->add_option("-B,--bootstrap-b", o.B, "number of draws");

    auto* placebo_cmd = app.add_subcommand("placebo", "reshuffle placebo test");
    add_common(placebo_cmd, o);
    placebo_cmd->add_option("-R,--replicates", o.R, "number of reshuffles");
    placebo_cmd->add_option("--mode", o.mode, "year|country");

    auto* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation by year");
    add_common(cv_cmd, o);
    cv_cmd->add_option("-k,--folds", o.k, "folds");

    auto* impact_cmd = app.add_subcommand("impact", "counterfactual impact ensemble");
    add_common(impact_cmd, o);
    impact_cmd->add_option("--n-ensemble", o.n_ensemble, "number of (draw, GCM) pairs");

    auto* sweep_cmd = app.add_subcommand("sweep", "the 200-variant robustness analysis");
    add_common(sweep_cmd, o);
    sweep_cmd->add_option("-B,--bootstrap-b", o.B, "bootstrap draws per spec");
    sweep_cmd->add_option("--n-ensemble", o.n_ensemble, "ensemble pairs per spec");
    sweep_cmd->add_option("-k,--folds", o.k, "CV folds per spec");
    sweep_cmd->add_option("--drop-countries", o.drop_countries,
                          "comma-separated country exclusions");

    auto* report_cmd = app.add_subcommand("report", "collate plot-ready figure CSVs");
    add_common(report_cmd, o);

    std::vector<std::string> argv_storage = args;
    std::vector<const char*> argv;
    argv.push_back("attrib");
    for (const auto& a : argv_storage) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        apply_config(*sub, o);
        const std::string name = sub->get_name();
        if (name == "synth") return cmd_synth(o);
        if (name == "ingest") return cmd_ingest(o);
        if (name == "season") return cmd_season(o);
        if (name == "downscale") return cmd_downscale(o);
        if (name == "fit") return cmd_fit(o);
        if (name == "bootstrap") return cmd_bootstrap(o);
        if (name == "placebo") return cmd_placebo(o);
        if (name == "cv") return cmd_cv(o);
        if (name == "impact") return cmd_impact(o);
        if (name == "sweep") return cmd_sweep(o);
        if (name == "report") return cmd_report(o);
        throw UsageError("unknown subcommand " + name);
    } catch (const UsageError& e) {
        std::cerr << "error (usage): " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error (data): " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error (numeric): " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace attrib::cli
