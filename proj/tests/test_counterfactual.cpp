#include <doctest.h>

#include <cmath>

#include "attrib/counterfactual.hpp"
#include "attrib/errors.hpp"
#include "attrib/synth.hpp"

using namespace attrib;
namespace cf = attrib::counterfactual;

namespace {
// Minimal one-country scenario trajectory with prescribed seasonal T paths.
downscale::ScenarioTraj make_traj(const std::vector<double>& t_with,
                                  const std::vector<double>& t_without, double t_base,
                                  double p_base, int year0 = 1962) {
    downscale::ScenarioTraj traj;
    traj.gcm = "g1";
    traj.with_acc.countries = {"aa"};
    traj.with_acc.years.resize(1);
    traj.without_acc = traj.with_acc;
    for (std::size_t i = 0; i < t_with.size(); ++i) {
        dataio::SeasonalValue v;
        v.tmean = t_with[i];
        v.precip = p_base;
        traj.with_acc.years[0][year0 + static_cast<int>(i)] = v;
        v.tmean = t_without[i];
        traj.without_acc.years[0][year0 + static_cast<int>(i)] = v;
    }
    dataio::SeasonalValue base;
    base.tmean = t_base;
    base.precip = p_base;
    traj.baseline["aa"] = base;
    return traj;
}
}  // namespace

TEST_CASE("scenario anomalies: self, constant offset, forcing-free") {
    // Scenario equal to the baseline: all anomalies zero.
    const auto self = make_traj({15.0, 15.0}, {15.0, 15.0}, 15.0, 500.0);
    const auto at = cf::scenario_anomalies(self, {"aa"}, TVar::tmean, true, 1962, 1963);
    for (int y = 0; y < 2; ++y) {
        CHECK(at.with_acc[0][static_cast<std::size_t>(y)][0] == 0.0);
        CHECK(at.without_acc[0][static_cast<std::size_t>(y)][0] == 0.0);
    }

    // Constant +0.5 offset: dT = 0.5, dT^2 = 0.25 every year.
    const auto off = make_traj({15.5, 15.5}, {15.0, 15.0}, 15.0, 500.0);
    const auto at2 = cf::scenario_anomalies(off, {"aa"}, TVar::tmean, true, 1962, 1963);
    CHECK(at2.with_acc[0][0][0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(at2.with_acc[0][0][1] == doctest::Approx(0.25).epsilon(1e-12));

    // with == without: identical anomaly tables.
    const auto same = make_traj({16.0, 14.0}, {16.0, 14.0}, 15.0, 500.0);
    const auto at3 = cf::scenario_anomalies(same, {"aa"}, TVar::tmean, true, 1962, 1963);
    for (int y = 0; y < 2; ++y) {
        for (int t = 0; t < cf::N_TERMS; ++t) {
            CHECK(at3.with_acc[0][static_cast<std::size_t>(y)][static_cast<std::size_t>(t)] ==
                  at3.without_acc[0][static_cast<std::size_t>(y)][static_cast<std::size_t>(t)]);
        }
    }
}

TEST_CASE("cumulative impact running sums") {
    std::array<double, cf::N_TERMS> beta{};
    beta[0] = -0.1;  // dT only
    std::vector<std::array<double, cf::N_TERMS>> anoms(2);
    anoms[0][0] = 0.1;
    anoms[1][0] = 0.2;
    const auto path = cf::cumulative_impact(beta, anoms);
    CHECK(path[0] == doctest::Approx(-0.01).epsilon(1e-12));
    CHECK(path[1] == doctest::Approx(-0.03).epsilon(1e-12));

    // All-zero anomalies.
    std::vector<std::array<double, cf::N_TERMS>> zero(3);
    for (double v : cf::cumulative_impact(beta, zero)) CHECK(v == 0.0);

    // Squared-term arithmetic.
    std::array<double, cf::N_TERMS> b2{};
    b2[1] = -0.01;
    std::vector<std::array<double, cf::N_TERMS>> ones(2);
    ones[0][1] = 1.0;
    ones[1][1] = 1.0;
    const auto p2 = cf::cumulative_impact(b2, ones);
    CHECK(p2[0] == doctest::Approx(-0.01).epsilon(1e-12));
    CHECK(p2[1] == doctest::Approx(-0.02).epsilon(1e-12));
}

TEST_CASE("impact is antisymmetric under scenario swap and additive in beta") {
    const auto traj = make_traj({15.2, 15.7, 16.1}, {15.0, 15.1, 14.9}, 15.0, 500.0);
    const auto at = cf::scenario_anomalies(traj, {"aa"}, TVar::tmean, true, 1962, 1964);
    std::array<double, cf::N_TERMS> b1{};
    b1[0] = -0.05;
    b1[1] = -0.004;
    std::array<double, cf::N_TERMS> b2{};
    b2[0] = 0.01;
    b2[1] = 0.002;

    const auto with_path = cf::cumulative_impact(b1, at.with_acc[0]);
    const auto without_path = cf::cumulative_impact(b1, at.without_acc[0]);
    // Swapping scenarios flips the ACC difference exactly.
    for (std::size_t y = 0; y < with_path.size(); ++y) {
        const double acc = with_path[y] - without_path[y];
        const double swapped = without_path[y] - with_path[y];
        CHECK(acc == -swapped);
    }

    // Additivity in beta.
    std::array<double, cf::N_TERMS> b12{};
    for (int t = 0; t < cf::N_TERMS; ++t)
        b12[static_cast<std::size_t>(t)] =
            b1[static_cast<std::size_t>(t)] + b2[static_cast<std::size_t>(t)];
    const auto p1 = cf::cumulative_impact(b1, at.with_acc[0]);
    const auto p2 = cf::cumulative_impact(b2, at.with_acc[0]);
    const auto p12 = cf::cumulative_impact(b12, at.with_acc[0]);
    for (std::size_t y = 0; y < p12.size(); ++y)
        CHECK(p12[y] == doctest::Approx(p1[y] + p2[y]).epsilon(1e-12));
}

TEST_CASE("aggregate_paths is the weighted mean") {
    const std::vector<std::vector<double>> paths = {{-0.1, -0.1}, {-0.3, -0.3}};
    const auto agg = cf::aggregate_paths(paths, {0.5, 0.5});
    CHECK(agg[0] == doctest::Approx(-0.2).epsilon(1e-12));
    CHECK_THROWS_AS(cf::aggregate_paths(paths, {0.0, 0.0}), DataError);
}

namespace {
// Full in-memory world small enough for fast ensemble checks.
struct EnsembleFixture {
    synth::World world;
    dataio::RegTable rt;
    inference::BootstrapEnsemble be;
    downscale::ScenarioSet ss;

    explicit EnsembleFixture(double trend, std::uint64_t seed) {
        synth::WorldParams p;
        p.n_countries = 6;
        p.fine_nlat = 6;
        p.fine_nlon = 12;
        p.coarse_nlat = 3;
        p.coarse_nlon = 6;
        p.year_lo = 1961;
        p.year_hi = 2015;
        p.noise_sd = 0.004;
        p.n_gcms = 2;
        p.trend_c_per_decade = trend;
        p.seed = seed;
        world = synth::generate_world(p);

        // Scenario set straight from the bias-free fine fields.
        std::vector<downscale::GcmFields> gcms;
        for (const auto& g : world.gcms) {
            downscale::GcmFields gf;
            gf.id = g.id;
            gf.histnat = g.fine_histnat;
            gf.historical = g.fine_historical;
            gf.ssp245 = g.fine_ssp245;
            gcms.push_back(std::move(gf));
        }
        downscale::AssembleOptions opt;
        opt.baseline_lo = p.scen_year_lo;
        ss = downscale::assemble_scenarios(gcms, world.cropland, world.mask,
                                           world.true_season, Window::green, opt);

        const dataio::GrowthPanel growth = dataio::first_difference(world.tfp);
        rt = dataio::assemble_panel(growth, world.obs_seasonal, world.meta,
                                    ModelSpec::baseline());
        const econ::Design d = econ::build_design(rt, ModelSpec::baseline());
        be = inference::block_bootstrap(d, 24, 5, 1);
    }
};
}  // namespace

TEST_CASE("forcing-free world: ensemble impacts are exactly zero") {
    EnsembleFixture fx(0.0, 31);
    const auto ie = counterfactual::ensemble_impacts(fx.be, fx.ss, fx.rt,
                                                     ModelSpec::baseline(), 100, 9, 2);
    for (const auto& path : ie.global) {
        for (double v : path) CHECK(v == 0.0);
    }
    CHECK(ie.terminal_mean == 0.0);
}

TEST_CASE("warming world: negative impacts, bounded regional aggregates, levels") {
    EnsembleFixture fx(0.3, 32);
    const auto ie = counterfactual::ensemble_impacts(fx.be, fx.ss, fx.rt,
                                                     ModelSpec::baseline(), 120, 10, 2);
    CHECK(ie.terminal_mean < 0.0);

    // Regional aggregate stays within the member-country envelope: check the
    // global path against per-country means (weighted mean property).
    for (std::size_t y = 0; y < ie.years.size(); ++y) {
        double lo = 1e300, hi = -1e300;
        for (std::size_t c = 0; c < ie.countries.size(); ++c) {
            lo = std::min(lo, ie.country_mean[c][y]);
            hi = std::max(hi, ie.country_mean[c][y]);
        }
        double mean_of_global = 0.0;
        for (std::size_t i = 0; i < ie.global.size(); ++i) mean_of_global += ie.global[i][y];
        mean_of_global /= static_cast<double>(ie.global.size());
        CHECK(mean_of_global >= lo - 1e-9);
        CHECK(mean_of_global <= hi + 1e-9);
    }

    // Level consistency: exp path ratio recovers the impact within 1e-10.
    const dataio::GrowthPanel growth = dataio::first_difference(fx.world.tfp);
    const auto levels = counterfactual::project_and_level(growth, ie, fx.rt);
    const auto& lp = levels.at("global");
    for (std::size_t i = 0; i < std::min<std::size_t>(10, lp.counterfactual.size()); ++i) {
        for (std::size_t y = 0; y < lp.years.size(); ++y) {
            const double recovered = -std::log(lp.counterfactual[i][y] / lp.observed[y]);
            CHECK(recovered == doctest::Approx(ie.global[i][y]).epsilon(1e-10));
        }
    }

    // Determinism across worker counts.
    const auto ie2 = counterfactual::ensemble_impacts(fx.be, fx.ss, fx.rt,
                                                      ModelSpec::baseline(), 120, 10, 1);
    CHECK(ie2.global == ie.global);
    CHECK(ie2.country_mean == ie.country_mean);
}

TEST_CASE("project_and_level: zero impact reproduces observed; constant case closed form") {
    // Hand-built growth panel and impact ensemble: one country, constant
    // growth g, constant impact delta per year.
    const double g = 0.02, delta = -0.003;
    dataio::GrowthPanel growth;
    growth.countries = {"aa"};
    growth.growth.resize(1);
    for (int y = 1962; y <= 2015; ++y) growth.growth[0][y] = g;

    dataio::RegTable rt;
    rt.countries = {"aa"};
    rt.region = {"africa"};
    rt.latitude = {10.0};
    rt.revenue_weight = {1.0};
    rt.tercile = {0};

    counterfactual::ImpactEnsemble ie;
    for (int y = 1962; y <= 2020; ++y) ie.years.push_back(y);
    ie.countries = {"aa"};
    ie.regions = {"africa"};
    ie.gcms = {"g"};
    ie.pairs = {{0, 0}};
    std::vector<double> path;
    for (std::size_t y = 0; y < ie.years.size(); ++y)
        path.push_back(delta * static_cast<double>(y + 1));
    ie.global = {path};
    ie.regional = {{path}};
    ie.country_mean = {path};

    const auto levels = counterfactual::project_and_level(growth, ie, rt);
    const auto& lp = levels.at("global");
    CHECK(lp.observed.front() == doctest::Approx(100.0).epsilon(1e-12));
    // (2016-2020 projected at the 10-year mean growth = g exactly.)
    for (std::size_t y = 0; y < lp.years.size(); ++y) {
        const double want = 100.0 * std::exp(g * static_cast<double>(y));
        CHECK(lp.observed[y] == doctest::Approx(want).epsilon(1e-10));
        const double ratio = lp.counterfactual[0][y] / lp.observed[y];
        CHECK(ratio == doctest::Approx(std::exp(-path[y])).epsilon(1e-10));
    }

    // Zero impact: counterfactual equals observed exactly.
    counterfactual::ImpactEnsemble zero = ie;
    zero.global = {std::vector<double>(ie.years.size(), 0.0)};
    zero.regional = {{std::vector<double>(ie.years.size(), 0.0)}};
    const auto lz = counterfactual::project_and_level(growth, zero, rt);
    for (std::size_t y = 0; y < lz.at("global").years.size(); ++y)
        CHECK(lz.at("global").counterfactual[0][y] == lz.at("global").observed[y]);
}

TEST_CASE("years_lost: zero impact, constant-growth closed form, no crossing") {
    counterfactual::LevelPaths lp;
    for (int y = 1962; y <= 2020; ++y) lp.years.push_back(y);
    const double g = 0.02;
    lp.observed.resize(lp.years.size());
    for (std::size_t y = 0; y < lp.years.size(); ++y)
        lp.observed[y] = 100.0 * std::exp(g * static_cast<double>(y));

    // Zero impact: years lost = 0.
    lp.counterfactual = {lp.observed};
    lp.cf_mean = lp.observed;
    auto res = counterfactual::years_lost(lp);
    CHECK(res.mean_estimate == doctest::Approx(0.0).epsilon(1e-9));

    // Constant -0.18 log-point impact: 0.18 / 0.02 = 9 years.
    std::vector<double> cf(lp.years.size());
    for (std::size_t y = 0; y < cf.size(); ++y) cf[y] = lp.observed[y] * std::exp(0.18);
    lp.counterfactual = {cf};
    lp.cf_mean = cf;
    res = counterfactual::years_lost(lp);
    CHECK(res.mean_estimate == doctest::Approx(9.0).epsilon(1e-6));
    CHECK(res.per_member[0] == doctest::Approx(9.0).epsilon(1e-6));

    // No crossing within the horizon.
    std::vector<double> low(lp.years.size());
    for (std::size_t y = 0; y < low.size(); ++y) low[y] = lp.observed[y] * 0.5;
    lp.counterfactual = {low};
    lp.cf_mean = low;
    res = counterfactual::years_lost(lp);
    CHECK(res.no_crossing == 1);
    CHECK(std::isinf(res.per_member[0]));
}
