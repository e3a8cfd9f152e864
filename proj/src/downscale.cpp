#include "attrib/downscale.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "attrib/csv.hpp"
#include "attrib/errors.hpp"
#include "attrib/logging.hpp"

namespace attrib::downscale {

using gridops::GridField;
using gridops::GridKey;
using gridops::VarTag;

QmapTable fit_quantile_map(const std::map<GridKey, GridField>& model,
                           const std::map<GridKey, GridField>& obs_coarse,
                           VarTag tag, int year_lo, int year_hi) {
    const gridops::GridSpec* spec = nullptr;
    for (const auto& [key, f] : model) {
        if (key.tag == tag) {
            spec = &f.spec;
            break;
        }
    }
    if (!spec) throw DataError("fit_quantile_map: no model fields for " + gridops::tag_name(tag));

    QmapTable q;
    q.spec = *spec;
    q.cells.resize(spec->size());

    for (int month = 1; month <= 12; ++month) {
        // Collect paired fields year by year.
        std::vector<const GridField*> mf, of;
        for (int y = year_lo; y <= year_hi; ++y) {
            const auto mi = model.find({tag, y, month});
            const auto oi = obs_coarse.find({tag, y, month});
            if (mi == model.end() || oi == obs_coarse.end()) continue;
            if (!(mi->second.spec == *spec) || !(oi->second.spec == *spec))
                throw DataError("fit_quantile_map: grid mismatch in training fields");
            mf.push_back(&mi->second);
            of.push_back(&oi->second);
        }
        for (std::size_t k = 0; k < spec->size(); ++k) {
            std::vector<double> mv, ov;
            for (std::size_t j = 0; j < mf.size(); ++j) {
                const double m = mf[j]->values[k];
                const double o = of[j]->values[k];
                if (GridField::missing(m) || GridField::missing(o)) continue;
                mv.push_back(m);
                ov.push_back(o);
            }
            if (mv.size() < 2)
                throw DataError("fit_quantile_map: fewer than 2 paired training values for " +
                                gridops::tag_name(tag) + " month " + std::to_string(month));
            std::sort(mv.begin(), mv.end());
            std::sort(ov.begin(), ov.end());
            auto& e = q.cells[k][static_cast<std::size_t>(month - 1)];
            e.model_q = std::move(mv);
            e.obs_q = std::move(ov);
        }
    }
    return q;
}

namespace {
// Observed empirical quantile at fraction u with plotting positions
// (k+0.5)/n, linear between order statistics, constant beyond the ends.
double obs_quantile(const std::vector<double>& q, double u) {
    const std::size_t n = q.size();
    const double h = u * static_cast<double>(n) - 0.5;
    if (h <= 0.0) return q.front();
    if (h >= static_cast<double>(n - 1)) return q.back();
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    return q[lo] + frac * (q[lo + 1] - q[lo]);
}
}  // namespace

double apply_quantile_map(const QmapEntry& e, double x, MapKind kind) {
    if (e.empty()) throw NumericError("apply_quantile_map: empty table entry");
    const auto& qm = e.model_q;
    const auto& qo = e.obs_q;
    const std::size_t n = qm.size();

    if (qm.front() == qm.back()) {
        // Degenerate table: a constant model series carries no rank
        // information, so everything maps to the observed median.
        return obs_quantile(qo, 0.5);
    }
    if (x < qm.front() || x > qm.back()) {
        const bool above = x > qm.back();
        const double me = above ? qm.back() : qm.front();
        const double oe = above ? qo.back() : qo.front();
        if (kind == MapKind::ratio && me > 1e-9) return x * (oe / me);
        return x + (oe - me);
    }
    // Midpoint rank of x within the model quantiles.
    const auto lo = std::lower_bound(qm.begin(), qm.end(), x);
    const auto hi = std::upper_bound(qm.begin(), qm.end(), x);
    const double below = static_cast<double>(lo - qm.begin());
    const double below_eq = static_cast<double>(hi - qm.begin());
    const double u = (below + below_eq) / (2.0 * static_cast<double>(n));
    return obs_quantile(qo, u);
}

GridField apply_quantile_map(const QmapTable& q, const GridField& f, MapKind kind) {
    if (!(f.spec == q.spec)) throw DataError("apply_quantile_map: grid mismatch");
    GridField out = f;
    const int month = f.sub;
    if (month < 1 || month > 12)
        throw DataError("apply_quantile_map: field has no month stamp");
    for (std::size_t k = 0; k < f.values.size(); ++k) {
        const double v = f.values[k];
        if (GridField::missing(v)) continue;
        out.values[k] =
            apply_quantile_map(q.cells[k][static_cast<std::size_t>(month - 1)], v, kind);
    }
    return out;
}

std::array<GridField, 12> monthly_climatology(const std::map<GridKey, GridField>& fields,
                                              VarTag tag, int year_lo, int year_hi) {
    const gridops::GridSpec* spec = nullptr;
    for (const auto& [key, f] : fields) {
        if (key.tag == tag) {
            spec = &f.spec;
            break;
        }
    }
    if (!spec) throw DataError("monthly_climatology: no fields for " + gridops::tag_name(tag));
    std::array<GridField, 12> out;
    for (int month = 1; month <= 12; ++month) {
        std::vector<double> sum(spec->size(), 0.0);
        std::vector<int> cnt(spec->size(), 0);
        for (int y = year_lo; y <= year_hi; ++y) {
            const auto it = fields.find({tag, y, month});
            if (it == fields.end()) continue;
            if (!(it->second.spec == *spec))
                throw DataError("monthly_climatology: grid mismatch");
            for (std::size_t k = 0; k < spec->size(); ++k) {
                const double v = it->second.values[k];
                if (GridField::missing(v)) continue;
                sum[k] += v;
                cnt[k] += 1;
            }
        }
        GridField f = GridField::make(*spec, tag, 0, month, std::nan(""));
        for (std::size_t k = 0; k < spec->size(); ++k) {
            if (cnt[k] > 0) f.values[k] = sum[k] / cnt[k];
        }
        out[static_cast<std::size_t>(month - 1)] = std::move(f);
    }
    return out;
}

GridField spatial_disaggregate(const GridField& bc_coarse, const GridField& clim_coarse,
                               const GridField& clim_fine, MapKind kind,
                               const DisaggregateOptions& opt, int* cap_hits) {
    if (!(bc_coarse.spec == clim_coarse.spec))
        throw DataError("spatial_disaggregate: coarse grids differ");
    GridField anomaly = bc_coarse;
    int hits = 0;
    for (std::size_t k = 0; k < anomaly.values.size(); ++k) {
        const double f = bc_coarse.values[k];
        const double c = clim_coarse.values[k];
        if (GridField::missing(f) || GridField::missing(c)) {
            anomaly.values[k] = std::nan("");
            continue;
        }
        if (kind == MapKind::additive) {
            anomaly.values[k] = f - c;
        } else {
            const double denom = std::max(c, opt.ratio_floor);
            double r = f / denom;
            if (r > opt.ratio_cap) {
                r = opt.ratio_cap;
                ++hits;
            }
            anomaly.values[k] = r;
        }
    }
    if (hits > 0) {
        log::info("spatial_disaggregate: " + std::to_string(hits) +
                  " ratio anomalies capped at " + csv::format_double(opt.ratio_cap));
    }
    if (cap_hits) *cap_hits += hits;

    const GridField high = gridops::resample_bilinear(anomaly, clim_fine.spec);
    GridField out = clim_fine;
    out.tag = bc_coarse.tag;
    out.year = bc_coarse.year;
    out.sub = bc_coarse.sub;
    for (std::size_t k = 0; k < out.values.size(); ++k) {
        const double a = high.values[k];
        const double c = clim_fine.values[k];
        if (GridField::missing(a) || GridField::missing(c)) {
            out.values[k] = std::nan("");
            continue;
        }
        out.values[k] = kind == MapKind::additive ? a + c : a * c;
    }
    return out;
}

std::map<GridKey, GridField> bcsd_experiment(
    const std::map<GridKey, GridField>& experiment_fields, const QmapTable& qmap,
    const std::array<GridField, 12>& clim_coarse,
    const std::array<GridField, 12>& clim_fine, MapKind kind,
    const DisaggregateOptions& opt, int* cap_hits) {
    std::map<GridKey, GridField> out;
    for (const auto& [key, f] : experiment_fields) {
        const GridField bc = apply_quantile_map(qmap, f, kind);
        const auto& cc = clim_coarse[static_cast<std::size_t>(key.sub - 1)];
        const auto& cf = clim_fine[static_cast<std::size_t>(key.sub - 1)];
        out.emplace(key, spatial_disaggregate(bc, cc, cf, kind, opt, cap_hits));
    }
    return out;
}

namespace {

const std::array<VarTag, 4> SCEN_TAGS = {VarTag::tmean, VarTag::tmin, VarTag::tmax,
                                         VarTag::precip};

// Collects the monthly fields of one scenario into a country-month panel.
season::CountryMonthWeather scenario_weather(
    const std::map<GridKey, GridField>& first,
    const std::map<GridKey, GridField>* second, int splice_year,
    const GridField& weights, const gridops::CountryMask& mask, int year_lo,
    int year_hi) {
    season::CountryMonthWeather cm;
    for (const VarTag tag : SCEN_TAGS) {
        std::vector<GridField> fields;
        for (int y = year_lo; y <= year_hi; ++y) {
            const std::map<GridKey, GridField>& src =
                (second != nullptr && y >= splice_year) ? *second : first;
            for (int m = 1; m <= 12; ++m) {
                const auto it = src.find({tag, y, m});
                if (it != src.end()) fields.push_back(it->second);
            }
        }
        gridops::CountryMonthPanel panel = gridops::zonal_aggregate(fields, weights, mask);
        switch (tag) {
            case VarTag::tmean: cm.tmean = std::move(panel); break;
            case VarTag::tmin: cm.tmin = std::move(panel); break;
            case VarTag::tmax: cm.tmax = std::move(panel); break;
            case VarTag::precip: cm.precip = std::move(panel); break;
            default: break;
        }
    }
    return cm;
}

bool has_any_fields(const std::map<GridKey, GridField>& m) { return !m.empty(); }

}  // namespace

ScenarioSet assemble_scenarios(const std::vector<GcmFields>& gcms,
                               const GridField& weights,
                               const gridops::CountryMask& mask,
                               const season::SeasonMap& smap, Window window,
                               const AssembleOptions& opt) {
    ScenarioSet ss;
    ss.year_lo = opt.year_lo;
    ss.year_hi = opt.year_hi;
    for (const auto& g : gcms) {
        if (!has_any_fields(g.histnat) || !has_any_fields(g.historical) ||
            !has_any_fields(g.ssp245)) {
            log::warn("assemble_scenarios: GCM " + g.id +
                      " is missing an experiment; dropped");
            continue;
        }
        ScenarioTraj traj;
        traj.gcm = g.id;

        // without-ACC covers the baseline window too when inputs allow.
        const auto without_cm = scenario_weather(g.histnat, nullptr, opt.splice_year,
                                                 weights, mask, opt.baseline_lo, opt.year_hi);
        const auto with_cm = scenario_weather(g.historical, &g.ssp245, opt.splice_year,
                                              weights, mask, opt.year_lo, opt.year_hi);
        traj.without_acc = season::seasonal_aggregate(without_cm, smap, window);
        traj.with_acc = season::seasonal_aggregate(with_cm, smap, window);

        // Baseline climatology per country-season over [baseline_lo, baseline_hi],
        // narrowed to the years actually present.
        int used_lo = 0, used_hi = 0;
        for (std::size_t i = 0; i < traj.without_acc.countries.size(); ++i) {
            const std::string& id = traj.without_acc.countries[i];
            dataio::SeasonalValue base;
            double st = 0, sn = 0, sx = 0, sp = 0;
            int ct = 0, cn = 0, cx = 0, cp = 0;
            for (const auto& [year, v] : traj.without_acc.years[i]) {
                if (year < opt.baseline_lo || year > opt.baseline_hi) continue;
                if (used_lo == 0 || year < used_lo) used_lo = year;
                if (year > used_hi) used_hi = year;
                if (!std::isnan(v.tmean)) { st += v.tmean; ++ct; }
                if (!std::isnan(v.tmin)) { sn += v.tmin; ++cn; }
                if (!std::isnan(v.tmax)) { sx += v.tmax; ++cx; }
                if (!std::isnan(v.precip)) { sp += v.precip; ++cp; }
            }
            if (ct == 0)
                throw DataError("assemble_scenarios: no baseline years for country " + id +
                                " in GCM " + g.id);
            if (ct > 0) base.tmean = st / ct;
            if (cn > 0) base.tmin = sn / cn;
            if (cx > 0) base.tmax = sx / cx;
            if (cp > 0) base.precip = sp / cp;
            traj.baseline[id] = base;
        }
        traj.baseline_lo = used_lo;
        traj.baseline_hi = used_hi;
        if (used_lo > opt.baseline_lo) {
            log::info("assemble_scenarios: GCM " + g.id + " baseline narrowed to " +
                      std::to_string(used_lo) + "-" + std::to_string(used_hi));
        }
        ss.members.push_back(std::move(traj));
    }
    if (ss.members.empty()) throw DataError("assemble_scenarios: no usable GCMs");
    return ss;
}

namespace {
void put_value(csv::Writer& w, double v) {
    if (std::isnan(v)) w.field(std::string("NA"));
    else w.field(v);
}
}  // namespace

void write_scenarios(const ScenarioSet& ss, const std::string& path) {
    csv::Writer w(path);
    for (const char* h :
         {"gcm", "scenario", "country", "year", "tmean", "tmin", "tmax", "precip"})
        w.field(std::string(h));
    w.endrow();
    for (const auto& traj : ss.members) {
        for (int pass = 0; pass < 2; ++pass) {
            const auto& panel = pass == 0 ? traj.with_acc : traj.without_acc;
            const std::string label = pass == 0 ? "with" : "without";
            for (std::size_t i = 0; i < panel.countries.size(); ++i) {
                for (const auto& [year, v] : panel.years[i]) {
                    w.field(traj.gcm);
                    w.field(label);
                    w.field(panel.countries[i]);
                    w.field(year);
                    put_value(w, v.tmean);
                    put_value(w, v.tmin);
                    put_value(w, v.tmax);
                    put_value(w, v.precip);
                    w.endrow();
                }
            }
        }
    }
}

void write_baselines(const ScenarioSet& ss, const std::string& path) {
    csv::Writer w(path);
    for (const char* h : {"gcm", "country", "tmean", "tmin", "tmax", "precip"})
        w.field(std::string(h));
    w.endrow();
    for (const auto& traj : ss.members) {
        for (const auto& [id, v] : traj.baseline) {
            w.field(traj.gcm);
            w.field(id);
            put_value(w, v.tmean);
            put_value(w, v.tmin);
            put_value(w, v.tmax);
            put_value(w, v.precip);
            w.endrow();
        }
    }
}

ScenarioSet read_scenarios(const std::string& path, const std::string& baseline_path) {
    const csv::Table t = csv::read_file(path);
    const int c_gcm = t.require("gcm");
    const int c_scen = t.require("scenario");
    const int c_country = t.require("country");
    const int c_year = t.require("year");
    const int cv[4] = {t.require("tmean"), t.require("tmin"), t.require("tmax"),
                       t.require("precip")};

    std::map<std::string, ScenarioTraj> members;
    std::map<std::string, std::set<std::string>> countries;  // per gcm
    for (const auto& row : t.rows)
        countries[row[static_cast<std::size_t>(c_gcm)]].insert(
            row[static_cast<std::size_t>(c_country)]);

    std::size_t lineno = 1;
    for (const auto& row : t.rows) {
        ++lineno;
        const std::string& gcm = row[static_cast<std::size_t>(c_gcm)];
        auto& traj = members[gcm];
        if (traj.gcm.empty()) {
            traj.gcm = gcm;
            traj.with_acc.countries.assign(countries[gcm].begin(), countries[gcm].end());
            traj.with_acc.years.resize(traj.with_acc.countries.size());
            traj.without_acc = traj.with_acc;
        }
        const std::string& scen = row[static_cast<std::size_t>(c_scen)];
        dataio::SeasonalPanel& panel =
            scen == "with" ? traj.with_acc : traj.without_acc;
        if (scen != "with" && scen != "without")
            throw DataError(path + ":" + std::to_string(lineno) + ": bad scenario '" + scen + "'");
        const int ci = panel.country_index(row[static_cast<std::size_t>(c_country)]);
        const int year = csv::parse_int(row[static_cast<std::size_t>(c_year)], path, lineno, "year");
        dataio::SeasonalValue v;
        double* slots[4] = {&v.tmean, &v.tmin, &v.tmax, &v.precip};
        for (int j = 0; j < 4; ++j) {
            const std::string& s = row[static_cast<std::size_t>(cv[j])];
            if (s != "NA") *slots[j] = csv::parse_double(s, path, lineno, "value");
        }
        panel.years[static_cast<std::size_t>(ci)][year] = v;
    }

    const csv::Table bt = csv::read_file(baseline_path);
    const int b_gcm = bt.require("gcm");
    const int b_country = bt.require("country");
    const int bv[4] = {bt.require("tmean"), bt.require("tmin"), bt.require("tmax"),
                       bt.require("precip")};
    lineno = 1;
    for (const auto& row : bt.rows) {
        ++lineno;
        const auto it = members.find(row[static_cast<std::size_t>(b_gcm)]);
        if (it == members.end())
            throw DataError(baseline_path + ": baseline for unknown GCM '" +
                            row[static_cast<std::size_t>(b_gcm)] + "'");
        dataio::SeasonalValue v;
        double* slots[4] = {&v.tmean, &v.tmin, &v.tmax, &v.precip};
        for (int j = 0; j < 4; ++j) {
            const std::string& s = row[static_cast<std::size_t>(bv[j])];
            if (s != "NA")
                *slots[j] = csv::parse_double(s, baseline_path, lineno, "value");
        }
        it->second.baseline[row[static_cast<std::size_t>(b_country)]] = v;
    }

    ScenarioSet ss;
    for (auto& [id, traj] : members) ss.members.push_back(std::move(traj));
    if (ss.members.empty()) throw DataError(path + ": no scenario members");
    return ss;
}

}  // namespace attrib::downscale
