#include "attrib/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "attrib/errors.hpp"
#include "attrib/logging.hpp"
#include "attrib/parallel.hpp"
#include "attrib/rng.hpp"
#include "attrib/stats.hpp"

namespace attrib::counterfactual {

const std::array<const char*, N_TERMS> TERM_NAMES = {"dT", "dT2", "dT3",
                                                     "dP", "dP2", "dP3"};

namespace {
constexpr double MM_PER_UNIT = 1000.0;

std::array<double, N_TERMS> anomaly_terms(const dataio::SeasonalValue& v,
                                          const dataio::SeasonalValue& base, TVar tvar,
                                          bool include_precip, bool* ok) {
    std::array<double, N_TERMS> out{};
    *ok = true;
    const double t = v.get(tvar);
    const double tb = base.get(tvar);
    if (std::isnan(t) || std::isnan(tb)) {
        *ok = false;
        return out;
    }
    const double dt = t - tb;
    out[0] = dt;
    out[1] = dt * dt;
    out[2] = dt * dt * dt;
    if (include_precip) {
        if (std::isnan(v.precip) || std::isnan(base.precip)) {
            *ok = false;
            return out;
        }
        const double dp = (v.precip - base.precip) / MM_PER_UNIT;
        out[3] = dp;
        out[4] = dp * dp;
        out[5] = dp * dp * dp;
    }
    return out;
}
}  // namespace

AnomalyTable scenario_anomalies(const downscale::ScenarioTraj& traj,
                                const std::vector<std::string>& countries, TVar tvar,
                                bool include_precip, int year_lo, int year_hi) {
    AnomalyTable at;
    at.gcm = traj.gcm;
    at.countries = countries;
    for (int y = year_lo; y <= year_hi; ++y) at.years.push_back(y);
    const std::size_t ny = at.years.size();
    at.with_acc.assign(countries.size(), std::vector<std::array<double, N_TERMS>>(ny));
    at.without_acc.assign(countries.size(), std::vector<std::array<double, N_TERMS>>(ny));

    for (std::size_t c = 0; c < countries.size(); ++c) {
        const auto bit = traj.baseline.find(countries[c]);
        if (bit == traj.baseline.end())
            throw DataError("scenario_anomalies: no baseline for country '" + countries[c] +
                            "' in GCM " + traj.gcm);
        const dataio::SeasonalValue& base = bit->second;
        const int wi = traj.with_acc.country_index(countries[c]);
        const int oi = traj.without_acc.country_index(countries[c]);
        if (wi < 0 || oi < 0)
            throw DataError("scenario_anomalies: country '" + countries[c] +
                            "' missing from scenario trajectories of GCM " + traj.gcm);
        for (std::size_t yi = 0; yi < ny; ++yi) {
            const int year = at.years[yi];
            bool ok = false;
            if (const auto* v = traj.with_acc.find(wi, year)) {
                at.with_acc[c][yi] = anomaly_terms(*v, base, tvar, include_precip, &ok);
            }
            if (!ok) {
                at.with_acc[c][yi] = {};
                ++at.missing_with;
            }
            ok = false;
            if (const auto* v = traj.without_acc.find(oi, year)) {
                at.without_acc[c][yi] = anomaly_terms(*v, base, tvar, include_precip, &ok);
            }
            if (!ok) {
                at.without_acc[c][yi] = {};
                ++at.missing_without;
            }
        }
    }
    if (at.missing_with + at.missing_without > 0) {
        log::warn("scenario_anomalies: GCM " + traj.gcm + " lacks coverage for " +
                  std::to_string(at.missing_with) + "+" + std::to_string(at.missing_without) +
                  " country-years; treated as zero anomalies");
    }
    return at;
}

std::vector<double> cumulative_impact(const std::array<double, N_TERMS>& beta,
                                      const std::vector<std::array<double, N_TERMS>>& anomalies) {
    std::vector<double> path(anomalies.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < anomalies.size(); ++i) {
        double step = 0.0;
        for (int t = 0; t < N_TERMS; ++t) step += beta[static_cast<std::size_t>(t)] * anomalies[i][static_cast<std::size_t>(t)];
        acc += step;
        path[i] = acc;
    }
    return path;
}

namespace {
// Column index of each anomaly term for each country under the spec's
// heterogeneity; -1 when the term is absent from the model.
std::vector<std::array<int, N_TERMS>> term_columns(const std::vector<std::string>& colnames,
                                                   const dataio::RegTable& rt,
                                                   const std::vector<int>& country_ids,
                                                   const ModelSpec& spec) {
    auto col_of = [&](const std::string& name) {
        for (std::size_t i = 0; i < colnames.size(); ++i) {
            if (colnames[i] == name) return static_cast<int>(i);
        }
        return -1;
    };
    std::vector<std::array<int, N_TERMS>> out(country_ids.size());
    for (std::size_t c = 0; c < country_ids.size(); ++c) {
        const int tercile = rt.tercile[static_cast<std::size_t>(country_ids[c])];
        for (int t = 0; t < N_TERMS; ++t) {
            const std::string base = TERM_NAMES[static_cast<std::size_t>(t)];
            const std::string name =
                spec.hetero == Hetero::lat3 ? "g" + std::to_string(tercile) + ":" + base : base;
            out[c][static_cast<std::size_t>(t)] = col_of(name);
        }
    }
    return out;
}
}  // namespace

ImpactEnsemble ensemble_impacts(const inference::BootstrapEnsemble& be,
                                const downscale::ScenarioSet& ss,
                                const dataio::RegTable& rt, const ModelSpec& spec,
                                int n, std::uint64_t seed, int workers) {
    if (be.draws.empty()) throw DataError("ensemble_impacts: empty bootstrap ensemble");
    if (ss.members.empty()) throw DataError("ensemble_impacts: empty scenario set");
    if (n < 1) throw UsageError("ensemble_impacts: n must be >= 1");

    ImpactEnsemble ie;
    ie.seed = seed;
    ie.countries = rt.countries;
    for (const auto& m : ss.members) ie.gcms.push_back(m.gcm);

    std::vector<int> country_ids(rt.countries.size());
    for (std::size_t i = 0; i < country_ids.size(); ++i) country_ids[i] = static_cast<int>(i);

    // Cumulative with-minus-without anomaly power sums per (gcm, country).
    std::vector<AnomalyTable> tables;
    tables.reserve(ss.members.size());
    for (const auto& m : ss.members)
        tables.push_back(
            scenario_anomalies(m, rt.countries, spec.tvar, spec.include_precip));
    ie.years = tables.front().years;
    const std::size_t ny = ie.years.size();
    const std::size_t nc = rt.countries.size();
    const std::size_t ng = ss.members.size();

    // cumdiff[g][c][term][year]
    std::vector<std::vector<std::array<std::vector<double>, N_TERMS>>> cumdiff(ng);
    for (std::size_t g = 0; g < ng; ++g) {
        cumdiff[g].resize(nc);
        for (std::size_t c = 0; c < nc; ++c) {
            for (int t = 0; t < N_TERMS; ++t) {
                auto& v = cumdiff[g][c][static_cast<std::size_t>(t)];
                v.assign(ny, 0.0);
                double with_acc = 0.0, without_acc = 0.0;
                for (std::size_t y = 0; y < ny; ++y) {
                    with_acc += tables[g].with_acc[c][y][static_cast<std::size_t>(t)];
                    without_acc += tables[g].without_acc[c][y][static_cast<std::size_t>(t)];
                    v[y] = with_acc - without_acc;
                }
            }
        }
    }

    const auto cols = term_columns(be.colnames, rt, country_ids, spec);

    // Region index space.
    std::map<std::string, int> rmap;
    for (std::size_t c = 0; c < nc; ++c) {
        const std::string& reg = rt.region[c];
        if (!rmap.count(reg)) {
            rmap[reg] = static_cast<int>(ie.regions.size());
            ie.regions.push_back(reg);
        }
    }
    std::vector<int> region_of(nc);
    std::vector<double> region_weight(ie.regions.size(), 0.0);
    for (std::size_t c = 0; c < nc; ++c) {
        region_of[c] = rmap[rt.region[c]];
        region_weight[static_cast<std::size_t>(region_of[c])] += rt.revenue_weight[c];
    }
    for (std::size_t r = 0; r < region_weight.size(); ++r) {
        if (!(region_weight[r] > 0.0))
            throw DataError("ensemble_impacts: zero total revenue weight in region " +
                            ie.regions[r]);
    }

    // Draw the (bootstrap, gcm) pairs up front; substream per member.
    ie.pairs.resize(static_cast<std::size_t>(n));
    const std::size_t nb = be.draws.size();
    for (int i = 0; i < n; ++i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        ie.pairs[static_cast<std::size_t>(i)] = {
            static_cast<int>(rng.uniform_below(nb)),
            static_cast<int>(rng.uniform_below(ng))};
    }

    ie.global.assign(static_cast<std::size_t>(n), std::vector<double>(ny, 0.0));
    ie.regional.assign(ie.regions.size(),
                       std::vector<std::vector<double>>(static_cast<std::size_t>(n),
                                                        std::vector<double>(ny, 0.0)));
    ie.country_mean.assign(nc, std::vector<double>(ny, 0.0));

    // Impact path of one country for one (draw, gcm) pair.
    auto country_path = [&](const std::vector<double>& beta, int gcm, std::size_t c,
                            std::vector<double>& path) {
        std::array<double, N_TERMS> bterms{};
        for (int t = 0; t < N_TERMS; ++t) {
            const int col = cols[c][static_cast<std::size_t>(t)];
            bterms[static_cast<std::size_t>(t)] =
                col >= 0 ? beta[static_cast<std::size_t>(col)] : 0.0;
        }
        for (std::size_t y = 0; y < ny; ++y) {
            double v = 0.0;
            for (int t = 0; t < N_TERMS; ++t)
                v += bterms[static_cast<std::size_t>(t)] *
                     cumdiff[static_cast<std::size_t>(gcm)][c][static_cast<std::size_t>(t)][y];
            path[y] = v;
        }
    };

    parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
        const auto [draw, gcm] = ie.pairs[i];
        const auto& beta = be.draws[static_cast<std::size_t>(draw)];
        std::vector<double> path(ny);
        for (std::size_t c = 0; c < nc; ++c) {
            country_path(beta, gcm, c, path);
            const double w = rt.revenue_weight[c];
            const double wr = w / region_weight[static_cast<std::size_t>(region_of[c])];
            for (std::size_t y = 0; y < ny; ++y) {
                ie.global[i][y] += w * path[y];
                ie.regional[static_cast<std::size_t>(region_of[c])][i][y] += wr * path[y];
            }
        }
    });

    // Sequential second pass keeps the country means independent of the
    // worker count (fixed accumulation order).
    {
        std::vector<double> path(ny);
        for (int i = 0; i < n; ++i) {
            const auto [draw, gcm] = ie.pairs[static_cast<std::size_t>(i)];
            const auto& beta = be.draws[static_cast<std::size_t>(draw)];
            for (std::size_t c = 0; c < nc; ++c) {
                country_path(beta, gcm, c, path);
                for (std::size_t y = 0; y < ny; ++y) ie.country_mean[c][y] += path[y];
            }
        }
        for (std::size_t c = 0; c < nc; ++c) {
            for (std::size_t y = 0; y < ny; ++y)
                ie.country_mean[c][y] /= static_cast<double>(n);
        }
    }

    ie.mean_path.assign(ny, 0.0);
    ie.ci90_lo.assign(ny, 0.0);
    ie.ci90_hi.assign(ny, 0.0);
    std::vector<double> tmp(static_cast<std::size_t>(n));
    for (std::size_t y = 0; y < ny; ++y) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            tmp[static_cast<std::size_t>(i)] = ie.global[static_cast<std::size_t>(i)][y];
            s += tmp[static_cast<std::size_t>(i)];
        }
        ie.mean_path[y] = s / static_cast<double>(n);
        std::sort(tmp.begin(), tmp.end());
        ie.ci90_lo[y] = stats::quantile_sorted(tmp, 0.05);
        ie.ci90_hi[y] = stats::quantile_sorted(tmp, 0.95);
    }
    ie.terminal_mean = ie.mean_path.back();
    for (int i = 0; i < n; ++i) tmp[static_cast<std::size_t>(i)] = ie.global[static_cast<std::size_t>(i)].back();
    std::sort(tmp.begin(), tmp.end());
    ie.terminal_ci90 = {stats::quantile_sorted(tmp, 0.05), stats::quantile_sorted(tmp, 0.95)};
    ie.terminal_ci95 = {stats::quantile_sorted(tmp, 0.025), stats::quantile_sorted(tmp, 0.975)};
    return ie;
}

std::vector<double> aggregate_paths(const std::vector<std::vector<double>>& paths,
                                    const std::vector<double>& weights) {
    if (paths.empty()) throw DataError("aggregate_paths: no paths");
    if (paths.size() != weights.size())
        throw UsageError("aggregate_paths: weight count mismatch");
    double wtot = 0.0;
    for (double w : weights) wtot += w;
    if (!(wtot > 0.0)) throw DataError("aggregate_paths: zero total weight");
    std::vector<double> out(paths.front().size(), 0.0);
    for (std::size_t c = 0; c < paths.size(); ++c) {
        for (std::size_t y = 0; y < out.size(); ++y) out[y] += weights[c] / wtot * paths[c][y];
    }
    return out;
}

std::map<std::string, LevelPaths> project_and_level(const dataio::GrowthPanel& growth,
                                                    const ImpactEnsemble& ie,
                                                    const dataio::RegTable& rt) {
    const std::size_t ny = ie.years.size();
    const std::size_t nc = ie.countries.size();
    const int year_hi = ie.years.back();

    // Per-country cumulative observed+projected log growth.
    std::vector<std::vector<double>> cum(nc, std::vector<double>(ny, 0.0));
    int projection_start = year_hi + 1;
    for (std::size_t c = 0; c < nc; ++c) {
        const int gi = growth.country_index(ie.countries[c]);
        if (gi < 0)
            throw DataError("project_and_level: no growth data for country " + ie.countries[c]);
        const auto& g = growth.growth[static_cast<std::size_t>(gi)];
        int last_obs = 0;
        for (const auto& [year, v] : g) last_obs = std::max(last_obs, year);
        if (last_obs < year_hi) projection_start = std::min(projection_start, last_obs + 1);

        // Projection rate: mean growth over the last (up to) 10 observed years.
        double rate = 0.0;
        {
            double s = 0.0;
            int cnt = 0;
            for (int y = last_obs - 9; y <= last_obs; ++y) {
                const auto it = g.find(y);
                if (it != g.end()) {
                    s += it->second;
                    ++cnt;
                }
            }
            if (cnt > 0) rate = s / cnt;
            if (cnt < 10 && last_obs < year_hi) {
                log::info("project_and_level: " + ie.countries[c] + " projection uses " +
                          std::to_string(cnt) + " years of history");
            }
        }
        double acc = 0.0;
        for (std::size_t yi = 0; yi < ny; ++yi) {
            const int year = ie.years[yi];
            const auto it = g.find(year);
            if (it != g.end()) acc += it->second;
            else if (year > last_obs) acc += rate;
            // years before a late-start country's first record contribute zero growth
            cum[c][yi] = acc;
        }
    }

    // Weighted aggregate cumulative log paths, globally and per region.
    std::map<std::string, std::vector<double>> agg_cum;
    std::map<std::string, std::vector<std::size_t>> region_members;
    for (std::size_t c = 0; c < nc; ++c) {
        const int ci = rt.country_index(ie.countries[c]);
        if (ci < 0) throw DataError("project_and_level: country missing from table");
        region_members[rt.region[static_cast<std::size_t>(ci)]].push_back(c);
    }
    {
        std::vector<double> w(nc);
        for (std::size_t c = 0; c < nc; ++c)
            w[c] = rt.revenue_weight[static_cast<std::size_t>(rt.country_index(ie.countries[c]))];
        agg_cum["global"] = aggregate_paths(cum, w);
        for (const auto& [region, members] : region_members) {
            std::vector<std::vector<double>> sub;
            std::vector<double> subw;
            for (const auto c : members) {
                sub.push_back(cum[c]);
                subw.push_back(w[c]);
            }
            agg_cum[region] = aggregate_paths(sub, subw);
        }
    }

    std::map<std::string, LevelPaths> out;
    const std::size_t n = ie.global.size();
    for (const auto& [name, cumlog] : agg_cum) {
        LevelPaths lp;
        lp.years = ie.years;
        lp.projection_start = projection_start;
        const double base = cumlog.front();
        lp.observed.resize(ny);
        for (std::size_t y = 0; y < ny; ++y)
            lp.observed[y] = 100.0 * std::exp(cumlog[y] - base);

        const std::vector<std::vector<double>>* impact = nullptr;
        if (name == "global") {
            impact = &ie.global;
        } else {
            for (std::size_t r = 0; r < ie.regions.size(); ++r) {
                if (ie.regions[r] == name) {
                    impact = &ie.regional[r];
                    break;
                }
            }
        }
        if (!impact) throw NumericError("project_and_level: no impact paths for " + name);
        lp.counterfactual.assign(n, std::vector<double>(ny, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t y = 0; y < ny; ++y) {
                lp.counterfactual[i][y] =
                    100.0 * std::exp(cumlog[y] - (*impact)[i][y] - base);
            }
        }
        lp.cf_mean.assign(ny, 0.0);
        lp.cf_q05.assign(ny, 0.0);
        lp.cf_q95.assign(ny, 0.0);
        std::vector<double> tmp(n);
        for (std::size_t y = 0; y < ny; ++y) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                tmp[i] = lp.counterfactual[i][y];
                s += tmp[i];
            }
            lp.cf_mean[y] = s / static_cast<double>(n);
            std::sort(tmp.begin(), tmp.end());
            lp.cf_q05[y] = stats::quantile_sorted(tmp, 0.05);
            lp.cf_q95[y] = stats::quantile_sorted(tmp, 0.95);
        }
        out.emplace(name, std::move(lp));
    }
    return out;
}

namespace {
// First year the path reaches the target level, linearly interpolated.
double crossing_year(const std::vector<int>& years, const std::vector<double>& path,
                     double target, bool* monotone) {
    *monotone = true;
    for (std::size_t y = 0; y < path.size(); ++y) {
        if (path[y] >= target) {
            if (y == 0) return years.front();
            for (std::size_t j = 1; j <= y; ++j) {
                if (path[j] < path[j - 1]) *monotone = false;
            }
            const double lo = path[y - 1];
            const double hi = path[y];
            const double frac = hi > lo ? (target - lo) / (hi - lo) : 1.0;
            return static_cast<double>(years[y - 1]) + frac;
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}
}  // namespace

YearsLostResult years_lost(const LevelPaths& lp) {
    YearsLostResult res;
    const double target = lp.observed.back();
    const double final_year = lp.years.back();

    bool monotone = true;
    int nonmono = 0;
    {
        const double y = crossing_year(lp.years, lp.cf_mean, target, &monotone);
        res.mean_estimate = std::isnan(y) ? std::numeric_limits<double>::infinity()
                                          : final_year - y;
        if (!monotone) ++nonmono;
    }
    res.per_member.reserve(lp.counterfactual.size());
    for (const auto& path : lp.counterfactual) {
        const double y = crossing_year(lp.years, path, target, &monotone);
        if (!monotone) ++nonmono;
        if (std::isnan(y)) {
            ++res.no_crossing;
            res.per_member.push_back(std::numeric_limits<double>::infinity());
        } else {
            res.per_member.push_back(final_year - y);
        }
    }
    if (nonmono > 0) {
        log::info("years_lost: " + std::to_string(nonmono) +
                  " paths non-monotone near the crossing; earliest crossing taken");
    }
    if (!res.per_member.empty()) {
        std::vector<double> v = res.per_member;
        std::sort(v.begin(), v.end());
        res.ci90 = {stats::quantile_sorted(v, 0.05), stats::quantile_sorted(v, 0.95)};
    }
    return res;
}

}  // namespace attrib::counterfactual
