#include "attrib/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "attrib/csv.hpp"
#include "attrib/errors.hpp"
#include "attrib/logging.hpp"

namespace attrib::dataio {

namespace {
constexpr int YEAR_MIN = 1961;
constexpr int YEAR_MAX = 2015;
constexpr double MM_PER_UNIT = 1000.0;  // precip stored in 1,000 mm units
}  // namespace

const std::vector<std::string>& region_tokens() {
    static const std::vector<std::string> tokens = {
        "africa",       "asia",          "europe_central_asia",
        "lac",          "near_east_north_africa", "north_america",
        "oceania",
    };
    return tokens;
}

int IndexPanel::country_index(const std::string& id) const {
    const auto it = std::lower_bound(countries.begin(), countries.end(), id);
    if (it == countries.end() || *it != id) return -1;
    return static_cast<int>(it - countries.begin());
}

std::size_t IndexPanel::n_rows() const {
    std::size_t n = 0;
    for (const auto& m : ln_level) n += m.size();
    return n;
}

int GrowthPanel::country_index(const std::string& id) const {
    const auto it = std::lower_bound(countries.begin(), countries.end(), id);
    if (it == countries.end() || *it != id) return -1;
    return static_cast<int>(it - countries.begin());
}

std::size_t GrowthPanel::n_rows() const {
    std::size_t n = 0;
    for (const auto& m : growth) n += m.size();
    return n;
}

const CountryMeta::Entry& CountryMeta::at(const std::string& id) const {
    const auto it = entries.find(id);
    if (it == entries.end()) throw DataError("country '" + id + "' missing from meta");
    return it->second;
}

double SeasonalValue::get(TVar v) const {
    switch (v) {
        case TVar::tmean: return tmean;
        case TVar::tmin: return tmin;
        case TVar::tmax: return tmax;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

int SeasonalPanel::country_index(const std::string& id) const {
    for (std::size_t i = 0; i < countries.size(); ++i) {
        if (countries[i] == id) return static_cast<int>(i);
    }
    return -1;
}

const SeasonalValue* SeasonalPanel::find(int country, int year) const {
    const auto& m = years[static_cast<std::size_t>(country)];
    const auto it = m.find(year);
    return it == m.end() ? nullptr : &it->second;
}

int RegTable::country_index(const std::string& id) const {
    for (std::size_t i = 0; i < countries.size(); ++i) {
        if (countries[i] == id) return static_cast<int>(i);
    }
    return -1;
}

const RegRow* RegTable::find(int country, int year) const {
    for (const auto& r : rows) {
        if (r.country == country && r.year == year) return &r;
    }
    return nullptr;
}

IndexPanel load_index_panel(const std::string& path, const std::string& index_column) {
    const csv::Table t = csv::read_file(path);
    const int c_country = t.require("country");
    const int c_year = t.require("year");
    const int c_index = t.require(index_column);

    // Two passes: collect the sorted country list, then fill.
    std::set<std::string> ids;
    for (const auto& row : t.rows) ids.insert(row[static_cast<std::size_t>(c_country)]);

    IndexPanel p;
    p.countries.assign(ids.begin(), ids.end());
    p.ln_level.resize(p.countries.size());

    std::size_t lineno = 1;
    for (const auto& row : t.rows) {
        ++lineno;
        const std::string& id = row[static_cast<std::size_t>(c_country)];
        const int year = csv::parse_int(row[static_cast<std::size_t>(c_year)], path, lineno, "year");
        const double index =
            csv::parse_double(row[static_cast<std::size_t>(c_index)], path, lineno, index_column);
        if (year < YEAR_MIN || year > YEAR_MAX) {
            throw DataError(path + ":" + std::to_string(lineno) + ": year " +
                            std::to_string(year) + " outside [" + std::to_string(YEAR_MIN) +
                            ", " + std::to_string(YEAR_MAX) + "]");
        }
        if (!(index > 0.0) || !std::isfinite(index)) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + index_column +
                            " must be positive and finite, got '" +
                            row[static_cast<std::size_t>(c_index)] + "'");
        }
        const int ci = p.country_index(id);
        auto& m = p.ln_level[static_cast<std::size_t>(ci)];
        if (m.count(year)) {
            throw DataError(path + ":" + std::to_string(lineno) + ": duplicate record for (" +
                            id + ", " + std::to_string(year) + ")");
        }
        m[year] = std::log(index);
    }
    log::info("loaded " + path + ": " + std::to_string(p.n_rows()) + " rows, " +
              std::to_string(p.countries.size()) + " countries");
    return p;
}

GrowthPanel first_difference(const IndexPanel& p) {
    GrowthPanel g;
    g.countries = p.countries;
    g.growth.resize(p.countries.size());
    for (std::size_t i = 0; i < p.countries.size(); ++i) {
        const auto& lev = p.ln_level[i];
        for (const auto& [year, ln] : lev) {
            const auto prev = lev.find(year - 1);
            if (prev == lev.end()) continue;  // gap: differencing restarts after it
            g.growth[i][year] = ln - prev->second;
        }
    }
    return g;
}

CountryMeta load_meta(const std::string& path) {
    const csv::Table t = csv::read_file(path);
    const int c_country = t.require("country");
    const int c_region = t.require("region");
    const int c_lat = t.require("latitude");
    const int c_weight = t.require("revenue_weight");

    const auto& tokens = region_tokens();
    CountryMeta m;
    double total = 0.0;
    std::size_t lineno = 1;
    for (const auto& row : t.rows) {
        ++lineno;
        const std::string& id = row[static_cast<std::size_t>(c_country)];
        if (m.entries.count(id))
            throw DataError(path + ":" + std::to_string(lineno) + ": duplicate country '" + id + "'");
        CountryMeta::Entry e;
        e.region = row[static_cast<std::size_t>(c_region)];
        if (std::find(tokens.begin(), tokens.end(), e.region) == tokens.end()) {
            std::ostringstream os;
            os << path << ":" << lineno << ": unknown region '" << e.region << "'; expected one of";
            for (const auto& tok : tokens) os << " " << tok;
            throw DataError(os.str());
        }
        e.latitude = csv::parse_double(row[static_cast<std::size_t>(c_lat)], path, lineno, "latitude");
        if (e.latitude < -90.0 || e.latitude > 90.0)
            throw DataError(path + ":" + std::to_string(lineno) + ": latitude out of range");
        e.revenue_weight =
            csv::parse_double(row[static_cast<std::size_t>(c_weight)], path, lineno, "revenue_weight");
        if (e.revenue_weight < 0.0)
            throw DataError(path + ":" + std::to_string(lineno) + ": revenue_weight must be >= 0");
        total += e.revenue_weight;
        m.countries.push_back(id);
        m.entries.emplace(id, std::move(e));
    }
    if (!(total > 0.0)) throw DataError(path + ": revenue weights sum to zero");
    for (auto& [id, e] : m.entries) e.revenue_weight /= total;
    std::sort(m.countries.begin(), m.countries.end());
    return m;
}

std::vector<int> assign_terciles(const std::vector<std::string>& countries,
                                 const std::vector<double>& key) {
    std::vector<std::size_t> order(countries.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (key[a] != key[b]) return key[a] < key[b];
        return countries[a] < countries[b];
    });
    std::vector<int> tercile(countries.size(), 0);
    const std::size_t n = countries.size();
    for (std::size_t rank = 0; rank < n; ++rank) {
        tercile[order[rank]] = static_cast<int>((3 * rank) / n);
    }
    return tercile;
}

RegTable assemble_panel(const GrowthPanel& g, const SeasonalPanel& w,
                        const CountryMeta& m, const ModelSpec& spec,
                        const AssembleOptions& opt, AssembleReport* report) {
    RegTable rt;
    rt.has_precip = spec.include_precip;
    rt.has_cubic = spec.form == Form::cubic;
    rt.tvar = spec.tvar;
    rt.window = spec.window;
    rt.agg_weights = spec.agg_weights;

    AssembleReport local;
    AssembleReport& rep = report ? *report : local;

    // Countries included: growth countries with weather and meta coverage.
    std::vector<int> growth_to_table(g.countries.size(), -1);
    for (std::size_t gi = 0; gi < g.countries.size(); ++gi) {
        const std::string& id = g.countries[gi];
        if (w.country_index(id) < 0) {
            log::warn("assemble_panel: no weather for country " + id + "; excluded");
            continue;
        }
        const auto& meta = m.at(id);  // throws when meta is missing
        growth_to_table[gi] = static_cast<int>(rt.countries.size());
        rt.countries.push_back(id);
        rt.region.push_back(meta.region);
        rt.latitude.push_back(meta.latitude);
        rt.revenue_weight.push_back(meta.revenue_weight);
    }
    if (rt.countries.empty()) throw DataError("assemble_panel: no countries joinable");

    // Renormalize revenue weights over the included set.
    {
        double total = 0.0;
        for (double v : rt.revenue_weight) total += v;
        if (!(total > 0.0)) throw DataError("assemble_panel: zero revenue weight coverage");
        for (double& v : rt.revenue_weight) v /= total;
    }

    std::size_t candidates = 0;
    for (std::size_t gi = 0; gi < g.countries.size(); ++gi) {
        const int ti = growth_to_table[gi];
        if (ti < 0) continue;
        const int wi = w.country_index(g.countries[gi]);
        for (const auto& [year, dln] : g.growth[gi]) {
            ++candidates;
            const SeasonalValue* now = w.find(wi, year);
            const SeasonalValue* prev = w.find(wi, year - 1);
            const bool need_p = spec.include_precip;
            auto usable = [&](const SeasonalValue* v) {
                if (v == nullptr) return false;
                if (std::isnan(v->get(spec.tvar))) return false;
                if (need_p && std::isnan(v->precip)) return false;
                return true;
            };
            if (!usable(now) || !usable(prev)) {
                rep.dropped.push_back(g.countries[gi] + ":" + std::to_string(year));
                continue;
            }
            RegRow r;
            r.country = ti;
            r.year = year;
            r.y = dln;
            r.t_level = now->get(spec.tvar);
            r.dt = now->get(spec.tvar) - prev->get(spec.tvar);
            r.dt2 = r.dt * r.dt;
            r.dt3 = r.dt2 * r.dt;
            if (spec.include_precip) {
                // Deltas difference the scaled level columns, so recomputing
                // them from stored levels is bit-exact.
                r.p_level = now->precip / MM_PER_UNIT;
                r.dp = r.p_level - prev->precip / MM_PER_UNIT;
                r.dp2 = r.dp * r.dp;
                r.dp3 = r.dp2 * r.dp;
            }
            rt.rows.push_back(r);
            ++rep.joined;
        }
    }

    if (candidates == 0) throw DataError("assemble_panel: growth panel is empty");
    const double coverage = static_cast<double>(rep.joined) / static_cast<double>(candidates);
    if (coverage < opt.min_coverage) {
        std::ostringstream os;
        os << "assemble_panel: weather join coverage " << coverage << " below threshold "
           << opt.min_coverage << "; missing pairs:";
        std::size_t shown = 0;
        for (const auto& p : rep.dropped) {
            os << " " << p;
            if (++shown >= 50) {
                os << " ... (" << rep.dropped.size() << " total)";
                break;
            }
        }
        throw DataError(os.str());
    }
    if (!rep.dropped.empty()) {
        log::warn("assemble_panel: dropped " + std::to_string(rep.dropped.size()) +
                  " rows lacking weather (first: " + rep.dropped.front() + ")");
    }

    std::sort(rt.rows.begin(), rt.rows.end(), [](const RegRow& a, const RegRow& b) {
        if (a.country != b.country) return a.country < b.country;
        return a.year < b.year;
    });

    std::vector<double> key(rt.countries.size());
    for (std::size_t i = 0; i < key.size(); ++i) {
        key[i] = opt.signed_latitude ? rt.latitude[i] : std::abs(rt.latitude[i]);
    }
    rt.tercile = assign_terciles(rt.countries, key);
    return rt;
}

void write_seasonal_panel(const SeasonalPanel& p, const std::string& path) {
    csv::Writer w(path);
    for (const char* h : {"country", "year", "tmean", "tmin", "tmax", "precip"})
        w.field(std::string(h));
    w.endrow();
    auto put = [&](double v) {
        if (std::isnan(v)) w.field(std::string("NA"));
        else w.field(v);
    };
    for (std::size_t i = 0; i < p.countries.size(); ++i) {
        for (const auto& [year, v] : p.years[i]) {
            w.field(p.countries[i]);
            w.field(year);
            put(v.tmean);
            put(v.tmin);
            put(v.tmax);
            put(v.precip);
            w.endrow();
        }
    }
}

SeasonalPanel read_seasonal_panel(const std::string& path) {
    const csv::Table t = csv::read_file(path);
    const int c_country = t.require("country");
    const int c_year = t.require("year");
    const int c[4] = {t.require("tmean"), t.require("tmin"), t.require("tmax"),
                      t.require("precip")};
    SeasonalPanel p;
    std::set<std::string> ids;
    for (const auto& row : t.rows) ids.insert(row[static_cast<std::size_t>(c_country)]);
    p.countries.assign(ids.begin(), ids.end());
    p.years.resize(p.countries.size());
    std::size_t lineno = 1;
    for (const auto& row : t.rows) {
        ++lineno;
        const int ci = p.country_index(row[static_cast<std::size_t>(c_country)]);
        const int year = csv::parse_int(row[static_cast<std::size_t>(c_year)], path, lineno, "year");
        SeasonalValue v;
        double* slots[4] = {&v.tmean, &v.tmin, &v.tmax, &v.precip};
        const char* names[4] = {"tmean", "tmin", "tmax", "precip"};
        for (int k = 0; k < 4; ++k) {
            const std::string& s = row[static_cast<std::size_t>(c[k])];
            if (s == "NA") continue;
            *slots[k] = csv::parse_double(s, path, lineno, names[k]);
        }
        p.years[static_cast<std::size_t>(ci)][year] = v;
    }
    return p;
}

void write_growth(const GrowthPanel& tfp, const GrowthPanel* output,
                  const std::string& path) {
    csv::Writer w(path);
    w.field(std::string("country"));
    w.field(std::string("year"));
    w.field(std::string("dln_tfp"));
    if (output) w.field(std::string("dln_output"));
    w.endrow();
    for (std::size_t i = 0; i < tfp.countries.size(); ++i) {
        const std::string& id = tfp.countries[i];
        const int oi = output ? output->country_index(id) : -1;
        for (const auto& [year, dln] : tfp.growth[i]) {
            w.field(id);
            w.field(year);
            w.field(dln);
            if (output) {
                double v = std::numeric_limits<double>::quiet_NaN();
                if (oi >= 0) {
                    const auto& m = output->growth[static_cast<std::size_t>(oi)];
                    const auto it = m.find(year);
                    if (it != m.end()) v = it->second;
                }
                if (std::isnan(v)) w.field(std::string("NA"));
                else w.field(v);
            }
            w.endrow();
        }
    }
}

GrowthPanel read_growth(const std::string& path, const std::string& column) {
    const csv::Table t = csv::read_file(path);
    const int c_country = t.require("country");
    const int c_year = t.require("year");
    const int c_val = t.require(column);
    GrowthPanel g;
    std::set<std::string> ids;
    for (const auto& row : t.rows) ids.insert(row[static_cast<std::size_t>(c_country)]);
    g.countries.assign(ids.begin(), ids.end());
    g.growth.resize(g.countries.size());
    std::size_t lineno = 1;
    for (const auto& row : t.rows) {
        ++lineno;
        const std::string& s = row[static_cast<std::size_t>(c_val)];
        if (s == "NA") continue;
        const int ci = g.country_index(row[static_cast<std::size_t>(c_country)]);
        const int year = csv::parse_int(row[static_cast<std::size_t>(c_year)], path, lineno, "year");
        const double v = csv::parse_double(s, path, lineno, column);
        if (g.growth[static_cast<std::size_t>(ci)].count(year))
            throw DataError(path + ":" + std::to_string(lineno) + ": duplicate growth row");
        g.growth[static_cast<std::size_t>(ci)][year] = v;
    }
    return g;
}

}  // namespace attrib::dataio
