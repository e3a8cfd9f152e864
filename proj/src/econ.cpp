#include "attrib/econ.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "attrib/errors.hpp"
#include "attrib/logging.hpp"
#include "attrib/rng.hpp"
#include "attrib/stats.hpp"

namespace attrib::econ {

namespace {

constexpr double DEMEAN_TOL = 1e-10;
constexpr int DEMEAN_MAX_ITER = 20000;
constexpr double RANK_TOL = 1e-10;

std::vector<std::string> base_columns(const ModelSpec& spec) {
    std::vector<std::string> cols = {"dT", "dT2"};
    if (spec.form == Form::cubic) cols.push_back("dT3");
    if (spec.include_precip) {
        cols.push_back("dP");
        cols.push_back("dP2");
        if (spec.form == Form::cubic) cols.push_back("dP3");
    }
    return cols;
}

double base_value(const dataio::RegRow& r, const std::string& name) {
    if (name == "dT") return r.dt;
    if (name == "dT2") return r.dt2;
    if (name == "dT3") return r.dt3;
    if (name == "dP") return r.dp;
    if (name == "dP2") return r.dp2;
    if (name == "dP3") return r.dp3;
    throw NumericError("unknown design column '" + name + "'");
}

// Countries excluded by the coldest10/hottest10 restrictions: ranked by
// unweighted sample-mean seasonal T, ties broken by country id.
std::set<int> tail_countries(const dataio::RegTable& rt, bool coldest) {
    std::vector<double> sum(rt.countries.size(), 0.0);
    std::vector<int> cnt(rt.countries.size(), 0);
    for (const auto& r : rt.rows) {
        sum[static_cast<std::size_t>(r.country)] += r.t_level;
        cnt[static_cast<std::size_t>(r.country)] += 1;
    }
    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < rt.countries.size(); ++i) {
        if (cnt[i] > 0) present.push_back(i);
    }
    std::sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) {
        const double ma = sum[a] / cnt[a];
        const double mb = sum[b] / cnt[b];
        if (ma != mb) return coldest ? ma < mb : ma > mb;
        return rt.countries[a] < rt.countries[b];
    });
    const std::size_t k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(0.10 * static_cast<double>(present.size()))));
    std::set<int> out;
    for (std::size_t i = 0; i < std::min(k, present.size()); ++i)
        out.insert(static_cast<int>(present[i]));
    return out;
}

struct FitCore {
    std::vector<double> X;  // row-major
    std::vector<double> y;
    std::vector<double> w;
    std::vector<int> country;
    std::vector<int> yearid;
    int ncol = 0;
    int n_countries = 0;
    int n_years = 0;
};

// Alternating weighted demeaning of every column in place. Returns the
// number of full sweeps; final_delta receives the last sweep's largest
// absolute group-mean adjustment relative to the column scale.
int demean_two_way(std::vector<std::vector<double>>& cols, const FitCore& core,
                   double* final_delta) {
    const std::size_t n = core.y.size();
    std::vector<double> wc(static_cast<std::size_t>(core.n_countries), 0.0);
    std::vector<double> wy(static_cast<std::size_t>(core.n_years), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        wc[static_cast<std::size_t>(core.country[i])] += core.w[i];
        wy[static_cast<std::size_t>(core.yearid[i])] += core.w[i];
    }
    std::vector<double> scale(cols.size(), 1.0);
    for (std::size_t c = 0; c < cols.size(); ++c) {
        double mx = 0.0;
        for (double v : cols[c]) mx = std::max(mx, std::fabs(v));
        scale[c] = 1.0 + mx;
    }
    std::vector<double> acc;
    int iter = 0;
    double delta = 0.0;
    for (; iter < DEMEAN_MAX_ITER; ++iter) {
        delta = 0.0;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            auto& col = cols[c];
            acc.assign(static_cast<std::size_t>(core.n_countries), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                acc[static_cast<std::size_t>(core.country[i])] += core.w[i] * col[i];
            for (int g = 0; g < core.n_countries; ++g) {
                if (wc[static_cast<std::size_t>(g)] > 0.0)
                    acc[static_cast<std::size_t>(g)] /= wc[static_cast<std::size_t>(g)];
                delta = std::max(delta, std::fabs(acc[static_cast<std::size_t>(g)]) / scale[c]);
            }
            for (std::size_t i = 0; i < n; ++i)
                col[i] -= acc[static_cast<std::size_t>(core.country[i])];

            acc.assign(static_cast<std::size_t>(core.n_years), 0.0);
            for (std::size_t i = 0; i < n; ++i)
                acc[static_cast<std::size_t>(core.yearid[i])] += core.w[i] * col[i];
            for (int g = 0; g < core.n_years; ++g) {
                if (wy[static_cast<std::size_t>(g)] > 0.0)
                    acc[static_cast<std::size_t>(g)] /= wy[static_cast<std::size_t>(g)];
                delta = std::max(delta, std::fabs(acc[static_cast<std::size_t>(g)]) / scale[c]);
            }
            for (std::size_t i = 0; i < n; ++i)
                col[i] -= acc[static_cast<std::size_t>(core.yearid[i])];
        }
        if (delta <= DEMEAN_TOL) {
            ++iter;
            break;
        }
    }
    if (final_delta) *final_delta = delta;
    return iter;
}

FitResult fit_impl(const FitCore& core, const std::vector<std::string>& colnames,
                   const std::vector<std::string>& country_names,
                   const std::vector<int>& years, int ngroups, bool drop_collinear) {
    const std::size_t n = core.y.size();
    if (n == 0) throw NumericError("fit_twoway_fe: empty design");
    const int k = core.ncol;

    // Demean y and every X column together.
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(k) + 1);
    cols[0].assign(core.y.begin(), core.y.end());
    for (int c = 0; c < k; ++c) {
        auto& col = cols[static_cast<std::size_t>(c) + 1];
        col.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            col[i] = core.X[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)];
    }
    FitResult fr;
    fr.demean_iterations = demean_two_way(cols, core, &fr.demean_delta);
    if (fr.demean_delta > DEMEAN_TOL) {
        throw NumericError("fit_twoway_fe: demeaning did not converge (delta=" +
                           std::to_string(fr.demean_delta) + ")");
    }

    fr.colnames = colnames;
    fr.country_names = country_names;
    fr.years = years;
    fr.n = n;
    fr.ngroups = ngroups;
    fr.beta.assign(static_cast<std::size_t>(k), 0.0);

    std::vector<int> kept;
    if (k > 0) {
        Eigen::MatrixXd A(static_cast<Eigen::Index>(n), k);
        Eigen::VectorXd b(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const double s = std::sqrt(core.w[i]);
            b(static_cast<Eigen::Index>(i)) = s * cols[0][i];
            for (int c = 0; c < k; ++c)
                A(static_cast<Eigen::Index>(i), c) = s * cols[static_cast<std::size_t>(c) + 1][i];
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
        qr.setThreshold(RANK_TOL);
        const int rank = static_cast<int>(qr.rank());
        if (rank < k) {
            const auto perm = qr.colsPermutation().indices();
            std::vector<int> dropped;
            for (int j = rank; j < k; ++j) dropped.push_back(perm(j));
            std::sort(dropped.begin(), dropped.end());
            if (!drop_collinear) {
                std::ostringstream os;
                os << "fit_twoway_fe: rank deficiency after absorption; collinear columns:";
                for (int j : dropped) os << " " << colnames[static_cast<std::size_t>(j)];
                throw NumericError(os.str());
            }
            fr.dropped_columns = dropped;
            std::set<int> drop_set(dropped.begin(), dropped.end());
            for (int j = 0; j < k; ++j)
                if (!drop_set.count(j)) kept.push_back(j);
            Eigen::MatrixXd Ak(static_cast<Eigen::Index>(n), static_cast<int>(kept.size()));
            for (std::size_t j = 0; j < kept.size(); ++j)
                Ak.col(static_cast<Eigen::Index>(j)) = A.col(kept[j]);
            const Eigen::VectorXd bk = Ak.householderQr().solve(b);
            for (std::size_t j = 0; j < kept.size(); ++j)
                fr.beta[static_cast<std::size_t>(kept[j])] = bk(static_cast<Eigen::Index>(j));
        } else {
            const Eigen::VectorXd beta = qr.solve(b);
            for (int j = 0; j < k; ++j) fr.beta[static_cast<std::size_t>(j)] = beta(j);
        }
    }

    // Recover absorbed effects from r = y - X beta by backfitting.
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
        double xb = 0.0;
        for (int c = 0; c < k; ++c)
            xb += core.X[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)] *
                  fr.beta[static_cast<std::size_t>(c)];
        r[i] = core.y[i] - xb;
    }
    double wtot = 0.0;
    for (std::size_t i = 0; i < n; ++i) wtot += core.w[i];
    if (!(wtot > 0.0)) throw NumericError("fit_twoway_fe: zero total weight");

    std::vector<double> wc(static_cast<std::size_t>(core.n_countries), 0.0);
    std::vector<double> wy(static_cast<std::size_t>(core.n_years), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        wc[static_cast<std::size_t>(core.country[i])] += core.w[i];
        wy[static_cast<std::size_t>(core.yearid[i])] += core.w[i];
    }
    fr.alpha.assign(static_cast<std::size_t>(core.n_countries), 0.0);
    fr.theta.assign(static_cast<std::size_t>(core.n_years), 0.0);
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += core.w[i] * r[i];
    mu /= wtot;

    std::vector<double> acc;
    for (int iter = 0; iter < DEMEAN_MAX_ITER; ++iter) {
        double delta = 0.0;
        // country effects given year effects
        acc.assign(static_cast<std::size_t>(core.n_countries), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            acc[static_cast<std::size_t>(core.country[i])] +=
                core.w[i] * (r[i] - mu - fr.theta[static_cast<std::size_t>(core.yearid[i])]);
        for (int g = 0; g < core.n_countries; ++g) {
            const double next = wc[static_cast<std::size_t>(g)] > 0.0
                                    ? acc[static_cast<std::size_t>(g)] / wc[static_cast<std::size_t>(g)]
                                    : 0.0;
            delta = std::max(delta, std::fabs(next - fr.alpha[static_cast<std::size_t>(g)]));
            fr.alpha[static_cast<std::size_t>(g)] = next;
        }
        double shift = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            shift += core.w[i] * fr.alpha[static_cast<std::size_t>(core.country[i])];
        shift /= wtot;
        for (auto& a : fr.alpha) a -= shift;
        mu += shift;

        // year effects given country effects
        acc.assign(static_cast<std::size_t>(core.n_years), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            acc[static_cast<std::size_t>(core.yearid[i])] +=
                core.w[i] * (r[i] - mu - fr.alpha[static_cast<std::size_t>(core.country[i])]);
        for (int g = 0; g < core.n_years; ++g) {
            const double next = wy[static_cast<std::size_t>(g)] > 0.0
                                    ? acc[static_cast<std::size_t>(g)] / wy[static_cast<std::size_t>(g)]
                                    : 0.0;
            delta = std::max(delta, std::fabs(next - fr.theta[static_cast<std::size_t>(g)]));
            fr.theta[static_cast<std::size_t>(g)] = next;
        }
        shift = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            shift += core.w[i] * fr.theta[static_cast<std::size_t>(core.yearid[i])];
        shift /= wtot;
        for (auto& t : fr.theta) t -= shift;
        mu += shift;

        if (delta <= 1e-12) break;
    }
    fr.mu = mu;

    fr.residuals.resize(n);
    double sse = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        fr.residuals[i] = r[i] - mu - fr.alpha[static_cast<std::size_t>(core.country[i])] -
                          fr.theta[static_cast<std::size_t>(core.yearid[i])];
        sse += core.w[i] * fr.residuals[i] * fr.residuals[i];
        syy += core.w[i] * cols[0][i] * cols[0][i];
    }
    fr.within_r2 = (syy > 0.0) ? 1.0 - sse / syy : 0.0;
    return fr;
}

FitCore core_from_design(const Design& d) {
    FitCore core;
    core.X = d.X;
    core.y = d.y;
    core.w = d.w;
    core.country = d.country;
    core.yearid = d.yearid;
    core.ncol = d.ncol;
    core.n_countries = static_cast<int>(d.country_names.size());
    core.n_years = static_cast<int>(d.years.size());
    return core;
}

}  // namespace

double FitResult::coef(const std::string& name) const {
    for (std::size_t i = 0; i < colnames.size(); ++i) {
        if (colnames[i] == name) return beta[i];
    }
    return 0.0;
}

bool FitResult::has(const std::string& name) const {
    return std::find(colnames.begin(), colnames.end(), name) != colnames.end();
}

Design build_design(const dataio::RegTable& rt, const ModelSpec& spec) {
    if (rt.has_precip == false && spec.include_precip)
        throw DataError("build_design: spec includes precip but table has none");
    if (rt.has_cubic == false && spec.form == Form::cubic)
        throw DataError("build_design: spec is cubic but table lacks cubes");

    std::set<int> excluded;
    if (spec.restriction.kind == Restriction::Kind::drop_country) {
        const int ci = rt.country_index(spec.restriction.country);
        if (ci < 0) {
            log::warn("build_design: drop country '" + spec.restriction.country +
                      "' not in panel; restriction is a no-op");
        } else {
            excluded.insert(ci);
        }
    } else if (spec.restriction.kind == Restriction::Kind::coldest10) {
        excluded = tail_countries(rt, true);
    } else if (spec.restriction.kind == Restriction::Kind::hottest10) {
        excluded = tail_countries(rt, false);
    }

    std::vector<const dataio::RegRow*> rows;
    for (const auto& r : rt.rows) {
        if (excluded.count(r.country)) continue;
        if (spec.restriction.kind == Restriction::Kind::years &&
            (r.year < spec.restriction.year_lo || r.year > spec.restriction.year_hi))
            continue;
        rows.push_back(&r);
    }
    if (rows.empty()) throw DataError("build_design: empty design after restriction");

    Design d;
    d.ngroups = spec.hetero == Hetero::lat3 ? 3 : 1;

    // Compact id spaces over the included rows.
    std::vector<int> cmap(rt.countries.size(), -1);
    std::set<int> years_present;
    for (const auto* r : rows) years_present.insert(r->year);
    d.years.assign(years_present.begin(), years_present.end());
    std::map<int, int> ymap;
    for (std::size_t i = 0; i < d.years.size(); ++i) ymap[d.years[i]] = static_cast<int>(i);

    std::map<std::string, int> rmap;
    const auto bases = base_columns(spec);
    for (int g = 0; g < d.ngroups; ++g) {
        for (const auto& b : bases) {
            d.colnames.push_back(d.ngroups == 1 ? b : "g" + std::to_string(g) + ":" + b);
        }
    }
    d.ncol = static_cast<int>(d.colnames.size());

    double wsum = 0.0;
    for (const auto* r : rows) {
        int ci = cmap[static_cast<std::size_t>(r->country)];
        if (ci < 0) {
            ci = static_cast<int>(d.country_names.size());
            cmap[static_cast<std::size_t>(r->country)] = ci;
            d.country_names.push_back(rt.countries[static_cast<std::size_t>(r->country)]);
            const std::string& reg = rt.region[static_cast<std::size_t>(r->country)];
            if (!rmap.count(reg)) {
                rmap[reg] = static_cast<int>(d.region_names.size());
                d.region_names.push_back(reg);
            }
        }
        const int group = d.ngroups == 1 ? 0 : rt.tercile[static_cast<std::size_t>(r->country)];
        d.country.push_back(ci);
        d.yearid.push_back(ymap[r->year]);
        d.region.push_back(rmap[rt.region[static_cast<std::size_t>(r->country)]]);
        d.group.push_back(group);
        d.y.push_back(r->y);
        d.t_exposure.push_back(r->t_level);
        d.p_exposure.push_back(r->p_level);
        const double w = spec.reg_weights == RegWeights::equal
                             ? 1.0
                             : rt.revenue_weight[static_cast<std::size_t>(r->country)];
        d.w.push_back(w);
        wsum += w;
        for (int g = 0; g < d.ngroups; ++g) {
            for (const auto& b : bases) {
                d.X.push_back(g == group ? base_value(*r, b) : 0.0);
            }
        }
    }
    if (!(wsum > 0.0)) throw DataError("build_design: zero total weight");
    const double scale = static_cast<double>(d.w.size()) / wsum;  // weights to mean 1
    for (double& w : d.w) w *= scale;
    return d;
}

FitResult fit_twoway_fe(const Design& d, bool drop_collinear) {
    return fit_impl(core_from_design(d), d.colnames, d.country_names, d.years, d.ngroups,
                    drop_collinear);
}

FitResult refit_rows(const Design& d, const std::vector<std::uint32_t>& rows,
                     bool drop_collinear) {
    FitCore core;
    const std::size_t k = static_cast<std::size_t>(d.ncol);
    core.ncol = d.ncol;
    core.n_countries = static_cast<int>(d.country_names.size());
    core.n_years = static_cast<int>(d.years.size());
    core.X.reserve(rows.size() * k);
    core.y.reserve(rows.size());
    for (const auto ri : rows) {
        const std::size_t i = ri;
        core.y.push_back(d.y[i]);
        core.w.push_back(d.w[i]);
        core.country.push_back(d.country[i]);
        core.yearid.push_back(d.yearid[i]);
        core.X.insert(core.X.end(), d.X.begin() + static_cast<std::ptrdiff_t>(i * k),
                      d.X.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
    }
    return fit_impl(core, d.colnames, d.country_names, d.years, d.ngroups, drop_collinear);
}

std::vector<std::vector<std::uint32_t>> year_region_blocks(const Design& d) {
    std::map<std::pair<int, int>, std::vector<std::uint32_t>> blocks;
    for (std::size_t i = 0; i < d.n(); ++i) {
        blocks[{d.years[static_cast<std::size_t>(d.yearid[i])], d.region[i]}].push_back(
            static_cast<std::uint32_t>(i));
    }
    std::vector<std::vector<std::uint32_t>> out;
    out.reserve(blocks.size());
    for (auto& [key, rows] : blocks) out.push_back(std::move(rows));
    return out;
}

Curve response_curve(const FitResult& fr, int group, char variable,
                     const std::vector<double>& grid,
                     const std::vector<double>& exposure_x,
                     const std::vector<double>& exposure_w) {
    const std::string base = variable == 'T' ? "dT" : "dP";
    auto name = [&](const std::string& b) {
        return fr.ngroups == 1 ? b : "g" + std::to_string(group) + ":" + b;
    };
    const double b1 = fr.coef(name(base));
    const double b2 = fr.coef(name(base + "2"));
    const double b3 = fr.coef(name(base + "3"));
    auto f = [&](double x) { return b1 * x + b2 * x * x + b3 * x * x * x; };
    auto fp = [&](double x) { return b1 + 2.0 * b2 * x + 3.0 * b3 * x * x; };

    Curve c;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < exposure_x.size(); ++i) {
        const double w = i < exposure_w.size() ? exposure_w[i] : 1.0;
        num += w * f(exposure_x[i]);
        den += w;
    }
    c.shift = den > 0.0 ? num / den : 0.0;
    c.x = grid;
    c.value.reserve(grid.size());
    c.marginal.reserve(grid.size());
    for (double x : grid) {
        c.value.push_back(f(x) - c.shift);
        c.marginal.push_back(fp(x));
    }
    return c;
}

namespace {

// Shared bootstrap loop over a custom design: resamples year-region blocks,
// refits, returns the coefficient draws. Rank-deficient draws are redrawn up
// to 10x the requested count in total.
std::vector<std::vector<double>> block_draws(const Design& d, int B, std::uint64_t seed,
                                             int* redraws_out) {
    const auto blocks = year_region_blocks(d);
    const std::size_t nb = blocks.size();
    std::vector<std::vector<double>> draws(static_cast<std::size_t>(B));
    int redraws = 0;
    const int cap = 10 * B;
    for (int b = 0; b < B; ++b) {
        CounterRng rng(seed, static_cast<std::uint64_t>(b));
        while (true) {
            std::vector<std::uint32_t> rows;
            for (std::size_t j = 0; j < nb; ++j) {
                const auto& blk = blocks[rng.uniform_below(nb)];
                rows.insert(rows.end(), blk.begin(), blk.end());
            }
            try {
                draws[static_cast<std::size_t>(b)] = refit_rows(d, rows, false).beta;
                break;
            } catch (const NumericError&) {
                if (++redraws > cap)
                    throw NumericError("block bootstrap: redraw cap exceeded (" +
                                       std::to_string(cap) + ")");
            }
        }
    }
    if (redraws_out) *redraws_out = redraws;
    return draws;
}

Design lag_design(const dataio::RegTable& rt, const ModelSpec& spec, int lags) {
    // Row lookup by (country, year).
    std::map<std::pair<int, int>, const dataio::RegRow*> index;
    for (const auto& r : rt.rows) index[{r.country, r.year}] = &r;

    const auto bases = base_columns(spec);
    Design d;
    d.ngroups = 1;
    for (int l = 0; l <= lags; ++l) {
        for (const auto& b : bases) d.colnames.push_back(b + ":l" + std::to_string(l));
    }
    d.ncol = static_cast<int>(d.colnames.size());

    std::vector<int> cmap(rt.countries.size(), -1);
    std::set<int> years_present;
    std::vector<const dataio::RegRow*> anchor;
    std::vector<std::vector<const dataio::RegRow*>> history;
    for (const auto& r : rt.rows) {
        std::vector<const dataio::RegRow*> h;
        bool ok = true;
        for (int l = 0; l <= lags; ++l) {
            const auto it = index.find({r.country, r.year - l});
            if (it == index.end()) {
                ok = false;
                break;
            }
            h.push_back(it->second);
        }
        if (!ok) continue;
        anchor.push_back(&r);
        history.push_back(std::move(h));
        years_present.insert(r.year);
    }
    if (anchor.empty())
        throw DataError("cumulative_lag_test: no rows have " + std::to_string(lags) +
                        " years of history");

    d.years.assign(years_present.begin(), years_present.end());
    std::map<int, int> ymap;
    for (std::size_t i = 0; i < d.years.size(); ++i) ymap[d.years[i]] = static_cast<int>(i);
    std::map<std::string, int> rmap;

    double wsum = 0.0;
    for (std::size_t a = 0; a < anchor.size(); ++a) {
        const auto* r = anchor[a];
        int ci = cmap[static_cast<std::size_t>(r->country)];
        if (ci < 0) {
            ci = static_cast<int>(d.country_names.size());
            cmap[static_cast<std::size_t>(r->country)] = ci;
            d.country_names.push_back(rt.countries[static_cast<std::size_t>(r->country)]);
        }
        const std::string& reg = rt.region[static_cast<std::size_t>(r->country)];
        if (!rmap.count(reg)) {
            rmap[reg] = static_cast<int>(d.region_names.size());
            d.region_names.push_back(reg);
        }
        d.country.push_back(ci);
        d.yearid.push_back(ymap[r->year]);
        d.region.push_back(rmap[reg]);
        d.group.push_back(0);
        d.y.push_back(r->y);
        d.t_exposure.push_back(r->t_level);
        d.p_exposure.push_back(r->p_level);
        const double w = spec.reg_weights == RegWeights::equal
                             ? 1.0
                             : rt.revenue_weight[static_cast<std::size_t>(r->country)];
        d.w.push_back(w);
        wsum += w;
        for (int l = 0; l <= lags; ++l) {
            for (const auto& b : bases) d.X.push_back(base_value(*history[a][static_cast<std::size_t>(l)], b));
        }
    }
    const double scale = static_cast<double>(d.w.size()) / wsum;
    for (double& w : d.w) w *= scale;
    return d;
}

}  // namespace

LagTestResult cumulative_lag_test(const dataio::RegTable& rt, const ModelSpec& spec,
                                  int lags, int bootstrap_b, std::uint64_t seed,
                                  int /*workers*/) {
    if (lags < 0) throw UsageError("cumulative_lag_test: lags must be >= 0");
    const Design d = lag_design(rt, spec, lags);
    const auto bases = base_columns(spec);
    const int nf = static_cast<int>(bases.size());

    const FitResult fit = fit_twoway_fe(d);
    LagTestResult res;
    res.lags = lags;
    res.families = bases;
    res.n_rows = static_cast<int>(d.n());
    res.lag_sums.assign(static_cast<std::size_t>(nf), 0.0);
    auto sums_of = [&](const std::vector<double>& beta) {
        std::vector<double> s(static_cast<std::size_t>(nf), 0.0);
        for (int l = 0; l <= lags; ++l) {
            for (int f = 0; f < nf; ++f)
                s[static_cast<std::size_t>(f)] +=
                    beta[static_cast<std::size_t>(l * nf + f)];
        }
        return s;
    };
    res.lag_sums = sums_of(fit.beta);

    const auto draws = block_draws(d, bootstrap_b, seed, nullptr);
    Eigen::MatrixXd S(bootstrap_b, nf);
    for (int b = 0; b < bootstrap_b; ++b) {
        const auto s = sums_of(draws[static_cast<std::size_t>(b)]);
        for (int f = 0; f < nf; ++f) S(b, f) = s[static_cast<std::size_t>(f)];
    }
    const Eigen::RowVectorXd mean = S.colwise().mean();
    const Eigen::MatrixXd centered = S.rowwise() - mean;
    Eigen::MatrixXd V = centered.transpose() * centered /
                        static_cast<double>(bootstrap_b - 1);
    Eigen::VectorXd s(nf);
    for (int f = 0; f < nf; ++f) s(f) = res.lag_sums[static_cast<std::size_t>(f)];
    const Eigen::VectorXd Vinv_s = V.ldlt().solve(s);
    res.wald = s.dot(Vinv_s);
    if (!std::isfinite(res.wald) || res.wald < 0.0)
        throw NumericError("cumulative_lag_test: singular bootstrap covariance");
    res.p_value = stats::chi2_sf(res.wald, nf);
    return res;
}

SlopeChangeResult slope_change_test(const dataio::RegTable& rt, const ModelSpec& spec,
                                    int split_year, int bootstrap_b, std::uint64_t seed,
                                    int /*workers*/) {
    bool early = false, late = false;
    for (const auto& r : rt.rows) {
        if (r.year < split_year) early = true;
        else late = true;
    }
    if (!early || !late)
        throw DataError("slope_change_test: a period is empty at split " +
                        std::to_string(split_year));

    // Linear temperature with a period interaction; precip terms as in spec.
    Design d;
    d.ngroups = 1;
    d.colnames = {"dT", "dT:late"};
    if (spec.include_precip) {
        d.colnames.push_back("dP");
        d.colnames.push_back("dP2");
    }
    d.ncol = static_cast<int>(d.colnames.size());

    std::vector<int> cmap(rt.countries.size(), -1);
    std::set<int> years_present;
    for (const auto& r : rt.rows) years_present.insert(r.year);
    d.years.assign(years_present.begin(), years_present.end());
    std::map<int, int> ymap;
    for (std::size_t i = 0; i < d.years.size(); ++i) ymap[d.years[i]] = static_cast<int>(i);
    std::map<std::string, int> rmap;

    double wsum = 0.0;
    for (const auto& r : rt.rows) {
        int ci = cmap[static_cast<std::size_t>(r.country)];
        if (ci < 0) {
            ci = static_cast<int>(d.country_names.size());
            cmap[static_cast<std::size_t>(r.country)] = ci;
            d.country_names.push_back(rt.countries[static_cast<std::size_t>(r.country)]);
        }
        const std::string& reg = rt.region[static_cast<std::size_t>(r.country)];
        if (!rmap.count(reg)) {
            rmap[reg] = static_cast<int>(d.region_names.size());
            d.region_names.push_back(reg);
        }
        d.country.push_back(ci);
        d.yearid.push_back(ymap[r.year]);
        d.region.push_back(rmap[reg]);
        d.group.push_back(0);
        d.y.push_back(r.y);
        d.t_exposure.push_back(r.t_level);
        d.p_exposure.push_back(r.p_level);
        const double w = spec.reg_weights == RegWeights::equal
                             ? 1.0
                             : rt.revenue_weight[static_cast<std::size_t>(r.country)];
        d.w.push_back(w);
        wsum += w;
        d.X.push_back(r.dt);
        d.X.push_back(r.year >= split_year ? r.dt : 0.0);
        if (spec.include_precip) {
            d.X.push_back(r.dp);
            d.X.push_back(r.dp2);
        }
    }
    const double scale = static_cast<double>(d.w.size()) / wsum;
    for (double& w : d.w) w *= scale;

    const FitResult fit = fit_twoway_fe(d);
    SlopeChangeResult res;
    res.split_year = split_year;
    res.base_slope = fit.coef("dT");
    res.interaction = fit.coef("dT:late");

    const auto draws = block_draws(d, bootstrap_b, seed, nullptr);
    res.draws.reserve(draws.size());
    double below = 0.0;
    for (const auto& beta : draws) {
        const double g = beta[1];
        res.draws.push_back(g);
        if (g < 0.0) below += 1.0;
        else if (g == 0.0) below += 0.5;
    }
    const double frac = below / static_cast<double>(draws.size());
    res.p_value = 2.0 * std::min(frac, 1.0 - frac);
    return res;
}

}  // namespace attrib::econ
