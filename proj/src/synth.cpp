#include "attrib/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "attrib/csv.hpp"
#include "attrib/errors.hpp"
#include "attrib/rng.hpp"

#include <json.hpp>

namespace attrib::synth {

using gridops::GridField;
using gridops::GridKey;
using gridops::GridSpec;
using gridops::VarTag;

namespace {

constexpr double TWO_PI = 6.283185307179586476925286766559;

// Deterministic random access: first normal of the (tag, a, b) substream.
double noise_normal(std::uint64_t seed, const char* tag, std::uint64_t a, std::uint64_t b) {
    CounterRng rng(derive_seed(seed, tag), a * 1000003ULL + b);
    return rng.normal();
}

double noise_uniform(std::uint64_t seed, const char* tag, std::uint64_t a, std::uint64_t b) {
    CounterRng rng(derive_seed(seed, tag), a * 1000003ULL + b);
    return rng.uniform01();
}

int mid_month_day(int month) {
    static const int start[12] = {0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};
    static const int len[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return start[month - 1] + len[month - 1] / 2;
}

struct Terrain {
    double t_base;    // latitude-driven mean temperature
    double t_spatial; // static spatial texture
    double p_base;    // mean monthly precip (mm)
};

Terrain terrain_at(double lat, double lon) {
    Terrain t;
    t.t_base = 26.0 - 0.30 * std::abs(lat);
    t.t_spatial = 1.2 * std::sin(TWO_PI * lon / 360.0) * std::cos(TWO_PI * lat / 360.0);
    t.p_base = 70.0 + 25.0 * std::cos(TWO_PI * lat / 180.0) +
               8.0 * std::sin(TWO_PI * lon / 180.0);
    return t;
}

}  // namespace

World generate_world(const WorldParams& p) {
    if (p.n_countries < 2) throw UsageError("generate_world: need at least 2 countries");
    World w;
    w.params = p;

    w.fine.nlat = p.fine_nlat;
    w.fine.nlon = p.fine_nlon;
    w.fine.dlat = 132.0 / p.fine_nlat;
    w.fine.dlon = 360.0 / p.fine_nlon;
    w.fine.lat0 = -66.0 + 0.5 * w.fine.dlat;
    w.fine.lon0 = -180.0;
    w.fine.validate();

    w.coarse.nlat = p.coarse_nlat;
    w.coarse.nlon = p.coarse_nlon;
    w.coarse.dlat = 132.0 / p.coarse_nlat;
    w.coarse.dlon = 360.0 / p.coarse_nlon;
    w.coarse.lat0 = -66.0 + 0.5 * w.coarse.dlat;
    w.coarse.lon0 = -180.0 + 0.5 * (w.coarse.dlon - w.fine.dlon);
    w.coarse.validate();

    // Countries: contiguous row-major stripes of fine cells.
    const std::size_t ncell = w.fine.size();
    w.mask.spec = w.fine;
    w.mask.cell.resize(ncell);
    for (int c = 0; c < p.n_countries; ++c) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "c%02d", c + 1);
        w.mask.countries.push_back(buf);
    }
    std::vector<double> lat_sum(static_cast<std::size_t>(p.n_countries), 0.0);
    std::vector<int> cell_count(static_cast<std::size_t>(p.n_countries), 0);
    for (std::size_t k = 0; k < ncell; ++k) {
        const int c = static_cast<int>(k * static_cast<std::size_t>(p.n_countries) / ncell);
        w.mask.cell[k] = c;
        lat_sum[static_cast<std::size_t>(c)] += w.fine.lat(static_cast<int>(k) / w.fine.nlon);
        cell_count[static_cast<std::size_t>(c)] += 1;
    }

    std::vector<double> centroid(static_cast<std::size_t>(p.n_countries));
    std::vector<int> peak(static_cast<std::size_t>(p.n_countries));
    for (int c = 0; c < p.n_countries; ++c) {
        centroid[static_cast<std::size_t>(c)] =
            lat_sum[static_cast<std::size_t>(c)] / cell_count[static_cast<std::size_t>(c)];
        if (!p.peak_months.empty()) {
            peak[static_cast<std::size_t>(c)] =
                p.peak_months[static_cast<std::size_t>(c) % p.peak_months.size()];
        } else {
            peak[static_cast<std::size_t>(c)] = centroid[static_cast<std::size_t>(c)] >= 0.0 ? 7 : 1;
        }
        w.true_season.greenest_month[w.mask.countries[static_cast<std::size_t>(c)]] =
            peak[static_cast<std::size_t>(c)];
    }

    // Land-cover weights.
    w.cropland = GridField::make(w.fine, VarTag::weight, 0, 0);
    w.cropland_pasture = GridField::make(w.fine, VarTag::weight, 0, 0);
    for (std::size_t k = 0; k < ncell; ++k) {
        const double u = noise_uniform(p.seed, "cropland", k, 0);
        w.cropland.values[k] = 0.2 + 0.6 * u;
        w.cropland_pasture.values[k] =
            p.identical_weight_sets
                ? w.cropland.values[k]
                : std::min(1.0, w.cropland.values[k] + 0.1 +
                                    0.2 * noise_uniform(p.seed, "pasture", k, 0));
    }

    // NDVI: truncated sinusoid peaking at the country's configured month.
    for (int y = 0; y < p.ndvi_years; ++y) {
        for (int bin = 1; bin <= 24; ++bin) {
            GridField f = GridField::make(w.fine, VarTag::ndvi, 1981 + y, bin);
            const double day = (bin - 0.5) * (365.0 / 24.0);
            for (std::size_t k = 0; k < ncell; ++k) {
                const int c = w.mask.cell[k];
                const double pd = mid_month_day(peak[static_cast<std::size_t>(c)]);
                const double phase = TWO_PI * (day - pd) / 365.0;
                f.values[k] = 0.1 + 0.7 * std::max(0.0, std::cos(phase));
            }
            w.ndvi.push_back(std::move(f));
        }
    }

    // Monthly temperature (clean of trend) at any grid point. Country-year
    // shocks drive the panel identification; the GCM stream has its own.
    auto obs_t = [&](double lat, double lon, int country, int year, int month) {
        const Terrain t = terrain_at(lat, lon);
        const double pk = mid_month_day(peak[static_cast<std::size_t>(country)]);
        const double seas =
            p.seas_amp_t * std::cos(TWO_PI * (mid_month_day(month) - pk) / 365.0);
        const double shock = p.shock_t_sd * noise_normal(p.seed, "obs_shock_t",
                                                         static_cast<std::uint64_t>(country),
                                                         static_cast<std::uint64_t>(year));
        return t.t_base + seas + t.t_spatial + shock;
    };
    auto obs_p = [&](double lat, double lon, int country, int year, int month) {
        const Terrain t = terrain_at(lat, lon);
        const double pk = mid_month_day(peak[static_cast<std::size_t>(country)]);
        const double seas =
            1.0 + p.seas_amp_p * std::cos(TWO_PI * (mid_month_day(month) - pk) / 365.0);
        const double shock =
            1.0 + p.shock_p_frac_sd * noise_normal(p.seed, "obs_shock_p",
                                                   static_cast<std::uint64_t>(country),
                                                   static_cast<std::uint64_t>(year));
        return std::max(0.0, t.p_base * seas * shock);
    };
    const double tspread = 5.0;

    const int obs_lo = p.year_lo - 1;
    for (int y = obs_lo; y <= p.year_hi; ++y) {
        for (int m = 1; m <= 12; ++m) {
            GridField tmean = GridField::make(w.fine, VarTag::tmean, y, m);
            GridField tmin = GridField::make(w.fine, VarTag::tmin, y, m);
            GridField tmax = GridField::make(w.fine, VarTag::tmax, y, m);
            GridField pr = GridField::make(w.fine, VarTag::precip, y, m);
            for (int r = 0; r < w.fine.nlat; ++r) {
                for (int cc = 0; cc < w.fine.nlon; ++cc) {
                    const std::size_t k = static_cast<std::size_t>(r) * w.fine.nlon + cc;
                    const int country = w.mask.cell[k];
                    const double lat = w.fine.lat(r);
                    const double lon = w.fine.lon(cc);
                    const double t = obs_t(lat, lon, country, y, m);
                    tmean.values[k] = t;
                    tmin.values[k] = t - tspread;
                    tmax.values[k] = t + tspread;
                    pr.values[k] = obs_p(lat, lon, country, y, m);
                }
            }
            w.obs.emplace(GridKey{VarTag::tmean, y, m}, std::move(tmean));
            w.obs.emplace(GridKey{VarTag::tmin, y, m}, std::move(tmin));
            w.obs.emplace(GridKey{VarTag::tmax, y, m}, std::move(tmax));
            w.obs.emplace(GridKey{VarTag::precip, y, m}, std::move(pr));
        }
    }

    // GCM scenarios. The historical/ssp245 world is the hist-nat world plus
    // the injected trend, added value-wise so both share their variability.
    const double trend_per_year = p.trend_c_per_decade / 10.0;
    for (int g = 0; g < p.n_gcms; ++g) {
        GcmWorld gw;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "gcm%02d", g + 1);
        gw.id = buf;
        const double bias_t = p.gcm_bias_t * (g - 0.5 * (p.n_gcms - 1));
        const double bias_p = 1.0 + p.gcm_bias_p * 0.2 * (g - 0.5 * (p.n_gcms - 1));
        const std::uint64_t gcm_shock_seed = derive_seed(p.seed, "gcm_shock_" + gw.id);

        auto gcm_cell_value = [&](VarTag tag, const GridSpec& spec, int r, int cc,
                                  int year, int month, bool with_bias) {
            const double lat = spec.lat(r);
            const double lon = spec.lon(cc);
            const Terrain t = terrain_at(lat, lon);
            const int pk_month = lat >= 0.0 ? 7 : 1;
            const double pk = mid_month_day(pk_month);
            CounterRng shock_rng(gcm_shock_seed, static_cast<std::uint64_t>(year) * 2 +
                                                     (lat >= 0.0 ? 1 : 0));
            const double shock = shock_rng.normal();
            if (tag == VarTag::precip) {
                const double seas =
                    1.0 + p.seas_amp_p * std::cos(TWO_PI * (mid_month_day(month) - pk) / 365.0);
                const double v = t.p_base * seas * (1.0 + p.shock_p_frac_sd * 0.8 * shock);
                return std::max(0.0, v * (with_bias ? bias_p : 1.0));
            }
            const double seas =
                p.seas_amp_t * std::cos(TWO_PI * (mid_month_day(month) - pk) / 365.0);
            double v = t.t_base + seas + t.t_spatial + p.shock_t_sd * 0.8 * shock +
                       (with_bias ? bias_t : 0.0);
            if (tag == VarTag::tmin) v -= tspread;
            if (tag == VarTag::tmax) v += tspread;
            return v;
        };

        auto make_experiment = [&](const GridSpec& spec, bool with_bias,
                                   std::map<GridKey, GridField>& histnat,
                                   std::map<GridKey, GridField>& historical,
                                   std::map<GridKey, GridField>& ssp) {
            for (const VarTag tag : {VarTag::tmean, VarTag::tmin, VarTag::tmax, VarTag::precip}) {
                for (int y = p.scen_year_lo; y <= p.scen_year_hi; ++y) {
                    for (int m = 1; m <= 12; ++m) {
                        GridField f = GridField::make(spec, tag, y, m);
                        for (int r = 0; r < spec.nlat; ++r) {
                            for (int cc = 0; cc < spec.nlon; ++cc) {
                                f.values[static_cast<std::size_t>(r) * spec.nlon + cc] =
                                    gcm_cell_value(tag, spec, r, cc, y, m, with_bias);
                            }
                        }
                        const double delta =
                            tag == VarTag::precip
                                ? 0.0
                                : trend_per_year * std::max(0, y - (p.year_lo));
                        if (y <= 2014) {
                            GridField h = f;
                            for (auto& v : h.values) v += delta;
                            historical.emplace(GridKey{tag, y, m}, std::move(h));
                        } else {
                            GridField h = f;
                            for (auto& v : h.values) v += delta;
                            ssp.emplace(GridKey{tag, y, m}, std::move(h));
                        }
                        histnat.emplace(GridKey{tag, y, m}, std::move(f));
                    }
                }
            }
        };
        make_experiment(w.coarse, true, gw.histnat, gw.historical, gw.ssp245);
        make_experiment(w.fine, false, gw.fine_histnat, gw.fine_historical, gw.fine_ssp245);
        w.gcms.push_back(std::move(gw));
    }

    // Meta.
    const auto& regions = dataio::region_tokens();
    double wtot = 0.0;
    std::vector<double> rw(static_cast<std::size_t>(p.n_countries));
    for (int c = 0; c < p.n_countries; ++c) {
        rw[static_cast<std::size_t>(c)] =
            0.5 + noise_uniform(p.seed, "revw", static_cast<std::uint64_t>(c), 0);
        wtot += rw[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < p.n_countries; ++c) {
        const std::string id = w.mask.countries[static_cast<std::size_t>(c)];
        dataio::CountryMeta::Entry e;
        e.region = regions[static_cast<std::size_t>(c) % regions.size()];
        e.latitude = centroid[static_cast<std::size_t>(c)];
        e.revenue_weight = rw[static_cast<std::size_t>(c)] / wtot;
        w.meta.countries.push_back(id);
        w.meta.entries.emplace(id, std::move(e));
    }
    std::sort(w.meta.countries.begin(), w.meta.countries.end());

    // Observed seasonal panel via the pipeline's own aggregation.
    {
        std::vector<GridField> fields;
        for (const auto& [key, f] : w.obs) fields.push_back(f);
        season::CountryMonthWeather cw;
        auto split = [&](VarTag tag) {
            std::vector<GridField> sel;
            for (const auto& f : fields)
                if (f.tag == tag) sel.push_back(f);
            return gridops::zonal_aggregate(sel, w.cropland, w.mask);
        };
        cw.tmean = split(VarTag::tmean);
        cw.tmin = split(VarTag::tmin);
        cw.tmax = split(VarTag::tmax);
        cw.precip = split(VarTag::precip);
        w.obs_seasonal = season::seasonal_aggregate(cw, w.true_season, Window::green);
    }

    // TFP growth from the regression equation on the observed seasonal panel.
    w.true_beta = p.beta;
    w.true_alpha.resize(static_cast<std::size_t>(p.n_countries));
    for (int c = 0; c < p.n_countries; ++c)
        w.true_alpha[static_cast<std::size_t>(c)] =
            p.alpha_sd * noise_normal(p.seed, "alpha", static_cast<std::uint64_t>(c), 0);
    for (int y = p.year_lo + 1; y <= p.year_hi; ++y)
        w.true_theta[y] =
            p.theta_sd * noise_normal(p.seed, "theta", static_cast<std::uint64_t>(y), 0);

    auto beta_of = [&](const char* name) {
        const auto it = p.beta.find(name);
        return it == p.beta.end() ? 0.0 : it->second;
    };

    w.tfp.countries = w.mask.countries;
    w.tfp.ln_level.resize(w.tfp.countries.size());
    if (p.make_output_panel) {
        w.output.countries = w.mask.countries;
        w.output.ln_level.resize(w.output.countries.size());
    }
    for (int c = 0; c < p.n_countries; ++c) {
        const int si = w.obs_seasonal.country_index(w.mask.countries[static_cast<std::size_t>(c)]);
        if (si < 0) throw NumericError("generate_world: seasonal panel lacks a country");
        double lnlev = 0.0, lnout = 0.0;
        w.tfp.ln_level[static_cast<std::size_t>(c)][p.year_lo] = lnlev;
        if (p.make_output_panel)
            w.output.ln_level[static_cast<std::size_t>(c)][p.year_lo] = lnout;
        for (int y = p.year_lo + 1; y <= p.year_hi; ++y) {
            const auto* now = w.obs_seasonal.find(si, y);
            const auto* prev = w.obs_seasonal.find(si, y - 1);
            if (!now || !prev || std::isnan(now->tmean) || std::isnan(prev->tmean) ||
                std::isnan(now->precip) || std::isnan(prev->precip)) {
                throw NumericError("generate_world: incomplete seasonal coverage at year " +
                                   std::to_string(y));
            }
            const double dt = now->tmean - prev->tmean;
            const double dp = (now->precip - prev->precip) / 1000.0;
            const double signal = beta_of("dT") * dt + beta_of("dT2") * dt * dt +
                                  beta_of("dT3") * dt * dt * dt + beta_of("dP") * dp +
                                  beta_of("dP2") * dp * dp + beta_of("dP3") * dp * dp * dp;
            const double scale =
                p.heteroskedastic
                    ? 0.5 + static_cast<double>(c) / static_cast<double>(p.n_countries)
                    : 1.0;
            const double eps =
                p.noise_sd * scale *
                noise_normal(p.seed, "eps", static_cast<std::uint64_t>(c),
                             static_cast<std::uint64_t>(y));
            const double growth = w.true_alpha[static_cast<std::size_t>(c)] +
                                  w.true_theta.at(y) + signal + eps;
            lnlev += growth;
            w.tfp.ln_level[static_cast<std::size_t>(c)][y] = lnlev;
            if (p.make_output_panel) {
                const double oeps =
                    (p.noise_sd * 1.5 + 0.002) *
                    noise_normal(p.seed, "oeps", static_cast<std::uint64_t>(c),
                                 static_cast<std::uint64_t>(y));
                lnout += 1.5 * signal + w.true_alpha[static_cast<std::size_t>(c)] +
                         w.true_theta.at(y) + oeps;
                w.output.ln_level[static_cast<std::size_t>(c)][y] = lnout;
            }
        }
    }
    return w;
}

namespace {
std::string grid_filename(const GridField& f) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d_%02d.agrf", gridops::tag_name(f.tag).c_str(),
                  f.year, f.sub);
    return buf;
}

void write_grid_dir(const std::map<GridKey, GridField>& fields, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [key, f] : fields) gridops::write_grid(f, dir + "/" + grid_filename(f));
}
}  // namespace

void write_world(const World& w, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    fs::create_directories(dir + "/grids/weights");

    // Index panels.
    {
        csv::Writer out(dir + "/tfp.csv");
        out.field(std::string("country"));
        out.field(std::string("year"));
        out.field(std::string("tfp_index"));
        out.endrow();
        for (std::size_t c = 0; c < w.tfp.countries.size(); ++c) {
            for (const auto& [year, ln] : w.tfp.ln_level[c]) {
                out.field(w.tfp.countries[c]);
                out.field(year);
                out.field(std::exp(ln));
                out.endrow();
            }
        }
    }
    if (!w.output.countries.empty()) {
        csv::Writer out(dir + "/output.csv");
        out.field(std::string("country"));
        out.field(std::string("year"));
        out.field(std::string("output_index"));
        out.endrow();
        for (std::size_t c = 0; c < w.output.countries.size(); ++c) {
            for (const auto& [year, ln] : w.output.ln_level[c]) {
                out.field(w.output.countries[c]);
                out.field(year);
                out.field(std::exp(ln));
                out.endrow();
            }
        }
    }
    {
        csv::Writer out(dir + "/meta.csv");
        for (const char* h : {"country", "region", "latitude", "revenue_weight"})
            out.field(std::string(h));
        out.endrow();
        for (const auto& id : w.meta.countries) {
            const auto& e = w.meta.entries.at(id);
            out.field(id);
            out.field(e.region);
            out.field(e.latitude);
            out.field(e.revenue_weight);
            out.endrow();
        }
    }

    gridops::write_mask(w.mask, dir + "/grids/mask.amsk");
    gridops::write_grid(w.cropland, dir + "/grids/weights/cropland.agrf");
    gridops::write_grid(w.cropland_pasture, dir + "/grids/weights/cropland_pasture.agrf");

    write_grid_dir(w.obs, dir + "/grids/obs");
    {
        fs::create_directories(dir + "/grids/ndvi");
        for (const auto& f : w.ndvi)
            gridops::write_grid(f, dir + "/grids/ndvi/" + grid_filename(f));
    }

    nlohmann::json gcms = nlohmann::json::array();
    for (const auto& g : w.gcms) {
        const std::string base = "grids/gcm/" + g.id;
        write_grid_dir(g.histnat, dir + "/" + base + "/histnat");
        write_grid_dir(g.historical, dir + "/" + base + "/historical");
        write_grid_dir(g.ssp245, dir + "/" + base + "/ssp245");
        gcms.push_back({{"id", g.id},
                        {"downscaled", false},
                        {"histnat_dir", base + "/histnat"},
                        {"historical_dir", base + "/historical"},
                        {"ssp245_dir", base + "/ssp245"}});
        if (w.params.emit_fine_scenarios && !g.fine_histnat.empty()) {
            const std::string fbase = "grids/gcm_fine/" + g.id;
            write_grid_dir(g.fine_histnat, dir + "/" + fbase + "/histnat");
            write_grid_dir(g.fine_historical, dir + "/" + fbase + "/historical");
            write_grid_dir(g.fine_ssp245, dir + "/" + fbase + "/ssp245");
            gcms.push_back({{"id", g.id + "_fine"},
                            {"downscaled", true},
                            {"histnat_dir", fbase + "/histnat"},
                            {"historical_dir", fbase + "/historical"},
                            {"ssp245_dir", fbase + "/ssp245"}});
        }
    }

    nlohmann::json manifest = {
        {"tfp", "tfp.csv"},
        {"meta", "meta.csv"},
        {"obs_dir", "grids/obs"},
        {"ndvi_dir", "grids/ndvi"},
        {"weights",
         {{"cropland", "grids/weights/cropland.agrf"},
          {"cropland_pasture", "grids/weights/cropland_pasture.agrf"}}},
        {"mask", "grids/mask.amsk"},
        {"gcms", gcms},
        {"donors", nlohmann::json::object()},
        {"qmap_training",
         {std::max(1961, w.params.year_lo), std::min(2014, w.params.year_hi)}},
        {"baseline_window",
         {std::max(w.params.scen_year_lo, w.params.year_lo - 11),
          std::min(w.params.scen_year_hi, w.params.year_lo + 11)}},
    };
    if (!w.output.countries.empty()) manifest["output"] = "output.csv";
    std::ofstream mf(dir + "/manifest.json");
    mf << manifest.dump(2) << "\n";

    nlohmann::json truth = {
        {"seed", w.params.seed},
        {"beta", w.true_beta},
        {"trend_c_per_decade", w.params.trend_c_per_decade},
        {"noise_sd", w.params.noise_sd},
        {"n_countries", w.params.n_countries},
        {"greenest_month", w.true_season.greenest_month},
    };
    nlohmann::json alpha = nlohmann::json::object();
    for (std::size_t c = 0; c < w.mask.countries.size(); ++c)
        alpha[w.mask.countries[c]] = w.true_alpha[c];
    truth["alpha"] = alpha;
    nlohmann::json theta = nlohmann::json::object();
    for (const auto& [y, v] : w.true_theta) theta[std::to_string(y)] = v;
    truth["theta"] = theta;
    std::ofstream tf(dir + "/truth.json");
    tf << truth.dump(2) << "\n";
}

std::vector<double> oracle_fe_ols(const econ::Design& d) {
    const std::size_t n = d.n();
    if (n > 2000) throw UsageError("oracle_fe_ols: instance too large for dense dummies");
    const int k = d.ncol;
    const int nc = static_cast<int>(d.country_names.size());
    const int ny = static_cast<int>(d.years.size());
    // Columns: X, intercept, country dummies 1..C-1, year dummies 1..Y-1.
    const int p = k + 1 + (nc - 1) + (ny - 1);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), p);
    Eigen::VectorXd b(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double s = std::sqrt(d.w[i]);
        for (int j = 0; j < k; ++j) A(static_cast<Eigen::Index>(i), j) = s * d.x(i, j);
        A(static_cast<Eigen::Index>(i), k) = s;
        if (d.country[i] > 0) A(static_cast<Eigen::Index>(i), k + d.country[i]) = s;
        if (d.yearid[i] > 0) A(static_cast<Eigen::Index>(i), k + nc + d.yearid[i] - 1) = s;
        b(static_cast<Eigen::Index>(i)) = s * d.y[i];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        // Identify whether the deficiency involves the weather columns.
        const auto perm = qr.colsPermutation().indices();
        for (int j = static_cast<int>(qr.rank()); j < p; ++j) {
            if (perm(j) < k)
                throw NumericError("oracle_fe_ols: singular system (weather column " +
                                   d.colnames[static_cast<std::size_t>(perm(j))] + ")");
        }
        throw NumericError("oracle_fe_ols: singular dummy system");
    }
    const Eigen::VectorXd sol = qr.solve(b);
    std::vector<double> beta(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) beta[static_cast<std::size_t>(j)] = sol(j);
    return beta;
}

PanelWorld make_panel_world(const PanelParams& p) {
    if (p.n_countries < 2) throw UsageError("make_panel_world: need >= 2 countries");
    PanelWorld pw;
    pw.true_beta = p.beta;
    auto beta_of = [&](const char* name) {
        const auto it = p.beta.find(name);
        return it == p.beta.end() ? 0.0 : it->second;
    };

    dataio::RegTable& rt = pw.rt;
    rt.has_precip = true;
    rt.has_cubic = true;
    const auto& regions = dataio::region_tokens();
    double wtot = 0.0;
    std::vector<double> rw(static_cast<std::size_t>(p.n_countries));
    for (int c = 0; c < p.n_countries; ++c) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "c%02d", c + 1);
        rt.countries.push_back(buf);
        rt.region.push_back(regions[static_cast<std::size_t>(c % p.n_regions) % regions.size()]);
        rt.latitude.push_back(-60.0 + 120.0 * c / std::max(1, p.n_countries - 1));
        rw[static_cast<std::size_t>(c)] =
            0.5 + noise_uniform(p.seed, "prevw", static_cast<std::uint64_t>(c), 0);
        wtot += rw[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < p.n_countries; ++c)
        rt.revenue_weight.push_back(rw[static_cast<std::size_t>(c)] / wtot);
    std::vector<double> key(rt.countries.size());
    for (std::size_t i = 0; i < key.size(); ++i) key[i] = std::abs(rt.latitude[i]);
    rt.tercile = dataio::assign_terciles(rt.countries, key);

    for (int c = 0; c < p.n_countries; ++c) {
        const double tbase = p.t_level_base + 0.2 * std::abs(rt.latitude[static_cast<std::size_t>(c)]);
        auto t_level = [&](int y) {
            return tbase + p.t_shock_sd * noise_normal(p.seed, "pt", static_cast<std::uint64_t>(c),
                                                       static_cast<std::uint64_t>(y));
        };
        auto p_level = [&](int y) {
            return std::max(1.0, p.p_level_base +
                                     p.p_shock_sd * noise_normal(p.seed, "pp",
                                                                 static_cast<std::uint64_t>(c),
                                                                 static_cast<std::uint64_t>(y)));
        };
        for (int y = p.year_lo + 1; y <= p.year_hi; ++y) {
            dataio::RegRow r;
            r.country = c;
            r.year = y;
            r.t_level = t_level(y);
            r.p_level = p_level(y) / 1000.0;
            r.dt = r.t_level - t_level(y - 1);
            r.dt2 = r.dt * r.dt;
            r.dt3 = r.dt2 * r.dt;
            r.dp = r.p_level - p_level(y - 1) / 1000.0;
            r.dp2 = r.dp * r.dp;
            r.dp3 = r.dp2 * r.dp;
            const double alpha =
                p.alpha_sd * noise_normal(p.seed, "pa", static_cast<std::uint64_t>(c), 0);
            const double theta =
                p.theta_sd * noise_normal(p.seed, "pth", static_cast<std::uint64_t>(y), 0);
            const double scale =
                p.heteroskedastic
                    ? 0.5 + static_cast<double>(c) / static_cast<double>(p.n_countries)
                    : 1.0;
            const double eps = p.noise_sd * scale *
                               noise_normal(p.seed, "pe", static_cast<std::uint64_t>(c),
                                            static_cast<std::uint64_t>(y));
            r.y = alpha + theta + beta_of("dT") * r.dt + beta_of("dT2") * r.dt2 +
                  beta_of("dT3") * r.dt3 + beta_of("dP") * r.dp + beta_of("dP2") * r.dp2 +
                  beta_of("dP3") * r.dp3 + eps;
            rt.rows.push_back(r);
        }
    }
    return pw;
}

}  // namespace attrib::synth
