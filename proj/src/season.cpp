#include "attrib/season.hpp"

#include <algorithm>
#include <cmath>

#include "attrib/csv.hpp"
#include "attrib/errors.hpp"
#include "attrib/logging.hpp"

namespace attrib::season {

using gridops::GridField;

int month_of_bin(int bin) {
    static const int month_end_day[12] = {31, 59, 90, 120, 151, 181,
                                          212, 243, 273, 304, 334, 365};
    const double day = (bin - 0.5) * (365.0 / 24.0);
    for (int m = 0; m < 12; ++m) {
        if (day <= month_end_day[m]) return m + 1;
    }
    return 12;
}

NdviClim ndvi_climatology(const std::vector<GridField>& series) {
    if (series.empty()) throw DataError("ndvi_climatology: no input fields");
    const gridops::GridSpec spec = series.front().spec;
    const std::size_t ncell = spec.size();

    std::array<std::vector<double>, 24> sum;
    std::array<std::vector<int>, 24> count;
    for (int b = 0; b < 24; ++b) {
        sum[b].assign(ncell, 0.0);
        count[b].assign(ncell, 0);
    }
    for (const auto& f : series) {
        if (!(f.spec == spec)) throw DataError("ndvi_climatology: grid mismatch");
        if (f.sub < 1 || f.sub > 24)
            throw DataError("ndvi_climatology: biweekly bin out of range");
        auto& s = sum[f.sub - 1];
        auto& c = count[f.sub - 1];
        for (std::size_t k = 0; k < ncell; ++k) {
            const double v = f.values[k];
            if (GridField::missing(v)) continue;
            s[k] += v;
            c[k] += 1;
        }
    }

    // Raw multi-year means, then the circular 7-bin box smoother.
    std::array<std::vector<double>, 24> raw;
    for (int b = 0; b < 24; ++b) {
        raw[b].assign(ncell, std::nan(""));
        for (std::size_t k = 0; k < ncell; ++k) {
            if (count[b][k] > 0) raw[b][k] = sum[b][k] / count[b][k];
        }
    }
    NdviClim clim;
    clim.spec = spec;
    for (int b = 0; b < 24; ++b) clim.bins[b].assign(ncell, std::nan(""));
    for (std::size_t k = 0; k < ncell; ++k) {
        for (int b = 0; b < 24; ++b) {
            double s = 0.0;
            int n = 0;
            for (int off = -3; off <= 3; ++off) {
                const int bb = ((b + off) % 24 + 24) % 24;
                const double v = raw[bb][k];
                if (std::isnan(v)) continue;
                s += v;
                ++n;
            }
            if (n > 0) clim.bins[b][k] = s / n;
        }
    }
    return clim;
}

GridField greenest_month_cell(const NdviClim& clim) {
    GridField out = GridField::make(clim.spec, gridops::VarTag::ndvi, 0, 0, std::nan(""));
    const std::size_t ncell = clim.spec.size();
    for (std::size_t k = 0; k < ncell; ++k) {
        int best_bin = -1;
        double best = 0.0;
        for (int b = 0; b < 24; ++b) {
            const double v = clim.bins[b][k];
            if (std::isnan(v)) continue;
            if (best_bin < 0 || v > best) {
                best_bin = b;
                best = v;
            }
        }
        if (best_bin >= 0) out.values[k] = month_of_bin(best_bin + 1);
    }
    return out;
}

SeasonMap country_green_month(const GridField& cell_months,
                              const GridField& weights,
                              const gridops::CountryMask& mask,
                              const std::map<std::string, std::string>& donors) {
    mask.validate();
    if (!(cell_months.spec == mask.spec) || !(weights.spec == mask.spec))
        throw DataError("country_green_month: grid mismatch");

    const std::size_t ncountry = mask.countries.size();
    // tally[c][m]: weighted and unweighted frequency of month m+1.
    std::vector<std::array<double, 12>> wtally(ncountry), atally(ncountry);
    for (auto& a : wtally) a.fill(0.0);
    for (auto& a : atally) a.fill(0.0);

    for (int r = 0; r < mask.spec.nlat; ++r) {
        const double area = gridops::cell_area_weight(mask.spec.lat(r));
        for (int c = 0; c < mask.spec.nlon; ++c) {
            const std::size_t k = static_cast<std::size_t>(r) * mask.spec.nlon + c;
            const std::int32_t id = mask.cell[k];
            if (id < 0) continue;
            const double mv = cell_months.values[k];
            if (GridField::missing(mv)) continue;
            const int month = static_cast<int>(mv);
            if (month < 1 || month > 12)
                throw DataError("country_green_month: month value out of range");
            const double w = weights.values[k];
            const double wv = GridField::missing(w) ? 0.0 : w;
            wtally[static_cast<std::size_t>(id)][month - 1] += wv * area;
            atally[static_cast<std::size_t>(id)][month - 1] += area;
        }
    }

    SeasonMap out;
    std::vector<std::string> uncovered;
    for (std::size_t i = 0; i < ncountry; ++i) {
        double wtotal = 0.0, atotal = 0.0;
        for (int m = 0; m < 12; ++m) {
            wtotal += wtally[i][m];
            atotal += atally[i][m];
        }
        if (atotal <= 0.0) {
            uncovered.push_back(mask.countries[i]);
            continue;
        }
        const auto& tally = (wtotal > 0.0) ? wtally[i] : atally[i];
        if (wtotal <= 0.0) {
            log::info("country_green_month: country " + mask.countries[i] +
                      " has zero weight; using unweighted frequencies");
        }
        int best = 0;
        for (int m = 1; m < 12; ++m) {
            if (tally[m] > tally[best]) best = m;  // ties keep the earlier month
        }
        out.greenest_month[mask.countries[i]] = best + 1;
    }

    for (const auto& id : uncovered) {
        const auto it = donors.find(id);
        if (it == donors.end())
            throw DataError("country_green_month: no NDVI coverage for '" + id +
                            "' and no donor configured");
        const auto donor = out.greenest_month.find(it->second);
        if (donor == out.greenest_month.end())
            throw DataError("country_green_month: donor '" + it->second + "' for '" + id +
                            "' has no greenest month");
        out.greenest_month[id] = donor->second;
        log::info("country_green_month: " + id + " takes donor " + it->second +
                  " month " + std::to_string(donor->second));
    }
    return out;
}

namespace {
struct MonthRef {
    int year;
    int month;
};

std::vector<MonthRef> window_months(int label_year, int center_month, Window window) {
    std::vector<MonthRef> out;
    if (window == Window::calendar) {
        for (int m = 1; m <= 12; ++m) out.push_back({label_year, m});
        return out;
    }
    for (int off = -2; off <= 2; ++off) {
        int m = center_month + off;
        int y = label_year;
        if (m < 1) {
            m += 12;
            y -= 1;
        } else if (m > 12) {
            m -= 12;
            y += 1;
        }
        out.push_back({y, m});
    }
    return out;
}

bool window_value(const gridops::CountryMonthPanel& cm, int country,
                  const std::vector<MonthRef>& months, bool is_sum, double* out) {
    double acc = 0.0;
    for (const auto& mr : months) {
        double v;
        if (!cm.get(country, mr.year, mr.month, &v)) return false;
        acc += v;
    }
    *out = is_sum ? acc : acc / static_cast<double>(months.size());
    return true;
}

// Year span covered by a country-month panel.
bool year_span(const gridops::CountryMonthPanel& cm, int country, int* lo, int* hi) {
    const auto& m = cm.values[static_cast<std::size_t>(country)];
    if (m.empty()) return false;
    int mn = INT32_MAX, mx = INT32_MIN;
    for (const auto& [key, v] : m) {
        const int y = key >= 0 ? key / 12 : (key - 11) / 12;
        mn = std::min(mn, y);
        mx = std::max(mx, y);
    }
    *lo = mn;
    *hi = mx;
    return true;
}
}  // namespace

dataio::SeasonalPanel seasonal_aggregate(const CountryMonthWeather& cm,
                                         const SeasonMap& s, Window window) {
    const auto& countries = cm.tmean.countries;
    dataio::SeasonalPanel out;
    out.countries = countries;
    out.years.resize(countries.size());

    std::size_t dropped = 0;
    for (std::size_t i = 0; i < countries.size(); ++i) {
        int center = 7;
        if (window == Window::green) {
            const auto it = s.greenest_month.find(countries[i]);
            if (it == s.greenest_month.end())
                throw DataError("seasonal_aggregate: no greenest month for '" + countries[i] + "'");
            center = it->second;
            if (center < 1 || center > 12)
                throw DataError("seasonal_aggregate: greenest month out of range for '" +
                                countries[i] + "'");
        }
        int ylo, yhi;
        if (!year_span(cm.tmean, static_cast<int>(i), &ylo, &yhi)) continue;
        for (int y = ylo; y <= yhi; ++y) {
            const auto months = window_months(y, center, window);
            dataio::SeasonalValue v;
            bool any = false;
            double x;
            const int ci = static_cast<int>(i);
            if (window_value(cm.tmean, ci, months, false, &x)) { v.tmean = x; any = true; }
            if (window_value(cm.tmin, ci, months, false, &x)) { v.tmin = x; any = true; }
            if (window_value(cm.tmax, ci, months, false, &x)) { v.tmax = x; any = true; }
            if (window_value(cm.precip, ci, months, true, &x)) { v.precip = x; any = true; }
            if (any) {
                out.years[i][y] = v;
            } else {
                ++dropped;
            }
        }
    }
    if (dropped > 0) {
        log::info("seasonal_aggregate: " + std::to_string(dropped) +
                  " country-years dropped (incomplete window at series edges)");
    }
    return out;
}

void write_season_map(const SeasonMap& s, const std::string& path) {
    csv::Writer w(path);
    w.field(std::string("country"));
    w.field(std::string("greenest_month"));
    w.endrow();
    for (const auto& [id, m] : s.greenest_month) {
        w.field(id);
        w.field(m);
        w.endrow();
    }
}

SeasonMap read_season_map(const std::string& path) {
    const csv::Table t = csv::read_file(path);
    const int c_country = t.require("country");
    const int c_month = t.require("greenest_month");
    SeasonMap s;
    std::size_t lineno = 1;
    for (const auto& row : t.rows) {
        ++lineno;
        const int m =
            csv::parse_int(row[static_cast<std::size_t>(c_month)], path, lineno, "greenest_month");
        if (m < 1 || m > 12)
            throw DataError(path + ":" + std::to_string(lineno) + ": month out of range");
        s.greenest_month[row[static_cast<std::size_t>(c_country)]] = m;
    }
    return s;
}

}  // namespace attrib::season
