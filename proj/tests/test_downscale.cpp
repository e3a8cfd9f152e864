#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "attrib/downscale.hpp"
#include "attrib/errors.hpp"
#include "attrib/logging.hpp"
#include "attrib/rng.hpp"

using namespace attrib;
using downscale::MapKind;
using downscale::QmapEntry;
using gridops::GridField;
using gridops::GridKey;
using gridops::GridSpec;
using gridops::VarTag;

namespace {
QmapEntry entry(std::vector<double> m, std::vector<double> o) {
    QmapEntry e;
    e.model_q = std::move(m);
    e.obs_q = std::move(o);
    std::sort(e.model_q.begin(), e.model_q.end());
    std::sort(e.obs_q.begin(), e.obs_q.end());
    return e;
}
}  // namespace

TEST_CASE("quantile map on the worked example") {
    const QmapEntry e = entry({1, 2, 3}, {10, 20, 30});
    CHECK(downscale::apply_quantile_map(e, 2.0, MapKind::additive) ==
          doctest::Approx(20.0).epsilon(1e-12));
    CHECK(downscale::apply_quantile_map(e, 1.5, MapKind::additive) ==
          doctest::Approx(15.0).epsilon(1e-12));
    // Above the training max: constant offset for T, constant ratio for P.
    CHECK(downscale::apply_quantile_map(e, 3.5, MapKind::additive) ==
          doctest::Approx(3.5 + 27.0).epsilon(1e-12));
    CHECK(downscale::apply_quantile_map(e, 4.5, MapKind::ratio) ==
          doctest::Approx(45.0).epsilon(1e-12));
    // Training endpoints map to the observed endpoints.
    CHECK(downscale::apply_quantile_map(e, 1.0, MapKind::additive) == 10.0);
    CHECK(downscale::apply_quantile_map(e, 3.0, MapKind::additive) == 30.0);
}

TEST_CASE("degenerate (constant-model) table maps everything to the obs median") {
    const QmapEntry e = entry({2, 2, 2}, {10, 20, 30});
    for (const double x : {-5.0, 2.0, 100.0}) {
        CHECK(downscale::apply_quantile_map(e, x, MapKind::additive) ==
              doctest::Approx(20.0).epsilon(1e-12));
    }
}

TEST_CASE("identical model and obs distributions give the identity on training values") {
    CounterRng rng(4, 0);
    std::vector<double> v(41);
    for (auto& x : v) x = 10.0 * rng.normal();
    QmapEntry e = entry(v, v);
    for (double x : v) {
        CHECK(downscale::apply_quantile_map(e, x, MapKind::additive) ==
              doctest::Approx(x).epsilon(1e-12));
    }
}

TEST_CASE("training round trip reproduces the observed distribution") {
    CounterRng rng(9, 1);
    std::vector<double> model(54), obs(54);
    for (auto& x : model) x = 15.0 + 3.0 * rng.normal();
    for (auto& x : obs) x = 12.0 + 2.0 * rng.normal();
    const QmapEntry e = entry(model, obs);
    std::vector<double> mapped;
    for (double x : model) mapped.push_back(downscale::apply_quantile_map(e, x, MapKind::additive));
    std::sort(mapped.begin(), mapped.end());
    std::vector<double> sorted_obs = obs;
    std::sort(sorted_obs.begin(), sorted_obs.end());
    for (std::size_t i = 0; i < mapped.size(); ++i) {
        CHECK(mapped[i] == doctest::Approx(sorted_obs[i]).epsilon(1e-9));
    }
}

TEST_CASE("quantile map is nondecreasing, including across tie runs") {
    const QmapEntry tied = entry({1, 2, 2, 3}, {5, 10, 20, 40});
    CounterRng rng(11, 0);
    for (int i = 0; i < 5000; ++i) {
        double a = -1.0 + 6.0 * rng.uniform01();
        double b = -1.0 + 6.0 * rng.uniform01();
        if (a > b) std::swap(a, b);
        const double fa = downscale::apply_quantile_map(tied, a, MapKind::additive);
        const double fb = downscale::apply_quantile_map(tied, b, MapKind::additive);
        CHECK(fa <= fb + 1e-12);
    }
}

TEST_CASE("fit_quantile_map collects paired sorted training values per cell-month") {
    const GridSpec spec{0.0, 0.0, 1.0, 1.0, 1, 1};
    std::map<GridKey, GridField> model, obs;
    const std::vector<double> mv = {3.0, 1.0, 2.0};
    const std::vector<double> ov = {30.0, 10.0, 20.0};
    for (int i = 0; i < 3; ++i) {
        GridField fm = GridField::make(spec, VarTag::tmean, 2000 + i, 1, mv[static_cast<std::size_t>(i)]);
        GridField fo = GridField::make(spec, VarTag::tmean, 2000 + i, 1, ov[static_cast<std::size_t>(i)]);
        model.emplace(GridKey{VarTag::tmean, 2000 + i, 1}, std::move(fm));
        obs.emplace(GridKey{VarTag::tmean, 2000 + i, 1}, std::move(fo));
    }
    // Other months have no data: restrict to month 1 via a copy table. Fit
    // requires every month, so replicate the series across months.
    for (int m = 2; m <= 12; ++m) {
        for (int i = 0; i < 3; ++i) {
            model.emplace(GridKey{VarTag::tmean, 2000 + i, m},
                          GridField::make(spec, VarTag::tmean, 2000 + i, m, mv[static_cast<std::size_t>(i)]));
            obs.emplace(GridKey{VarTag::tmean, 2000 + i, m},
                        GridField::make(spec, VarTag::tmean, 2000 + i, m, ov[static_cast<std::size_t>(i)]));
        }
    }
    const downscale::QmapTable q =
        downscale::fit_quantile_map(model, obs, VarTag::tmean, 2000, 2002);
    const QmapEntry& e = q.cells[0][0];
    CHECK(e.model_q == std::vector<double>({1.0, 2.0, 3.0}));
    CHECK(e.obs_q == std::vector<double>({10.0, 20.0, 30.0}));

    // Fewer than 2 paired values is an error.
    std::map<GridKey, GridField> tiny;
    tiny.emplace(GridKey{VarTag::tmean, 2000, 1},
                 GridField::make(spec, VarTag::tmean, 2000, 1, 1.0));
    CHECK_THROWS_AS(downscale::fit_quantile_map(tiny, tiny, VarTag::tmean, 2000, 2000),
                    DataError);
}

TEST_CASE("spatial disaggregation identities") {
    const GridSpec coarse{10.0, 10.0, 20.0, 20.0, 2, 2};
    const GridSpec fine{5.0, 5.0, 10.0, 10.0, 4, 4};
    CounterRng rng(17, 0);

    GridField clim_coarse = GridField::make(coarse, VarTag::precip, 0, 1);
    for (auto& v : clim_coarse.values) v = 20.0 + 100.0 * rng.uniform01();
    GridField clim_fine = GridField::make(fine, VarTag::precip, 0, 1);
    for (auto& v : clim_fine.values) v = 20.0 + 100.0 * rng.uniform01();

    // bc == clim_coarse -> output == clim_fine exactly, both kinds.
    for (const MapKind kind : {MapKind::additive, MapKind::ratio}) {
        const GridField out =
            downscale::spatial_disaggregate(clim_coarse, clim_coarse, clim_fine, kind);
        for (std::size_t k = 0; k < out.values.size(); ++k)
            CHECK(out.values[k] == clim_fine.values[k]);
    }

    // Constant +2 anomaly shifts the fine climatology by exactly +2.
    GridField bumped = clim_coarse;
    for (auto& v : bumped.values) v += 2.0;
    const GridField add =
        downscale::spatial_disaggregate(bumped, clim_coarse, clim_fine, MapKind::additive);
    for (std::size_t k = 0; k < add.values.size(); ++k)
        CHECK(add.values[k] == doctest::Approx(clim_fine.values[k] + 2.0).epsilon(1e-12));
}

TEST_CASE("ratio disaggregation: worked value, nonnegativity, cap logging") {
    const GridSpec one{0.0, 0.0, 1.0, 1.0, 1, 1};
    GridField f = GridField::make(one, VarTag::precip, 2000, 1, 120.0);
    GridField cc = GridField::make(one, VarTag::precip, 0, 1, 100.0);
    GridField cf = GridField::make(one, VarTag::precip, 0, 1, 80.0);
    const GridField out = downscale::spatial_disaggregate(f, cc, cf, MapKind::ratio);
    CHECK(out.values[0] == doctest::Approx(96.0).epsilon(1e-12));

    // Dry climatology: the ratio is floored/capped and the cap is counted.
    GridField wet = GridField::make(one, VarTag::precip, 2000, 1, 3.0);
    GridField dry = GridField::make(one, VarTag::precip, 0, 1, 0.001);
    int hits = 0;
    const GridField capped =
        downscale::spatial_disaggregate(wet, dry, cf, MapKind::ratio, {}, &hits);
    CHECK(hits == 1);
    CHECK(capped.values[0] == doctest::Approx(5.0 * 80.0).epsilon(1e-12));

    // Random nonnegative fields stay nonnegative.
    CounterRng rng(23, 0);
    const GridSpec coarse{10.0, 10.0, 20.0, 20.0, 2, 2};
    const GridSpec fine{5.0, 5.0, 10.0, 10.0, 4, 4};
    for (int rep = 0; rep < 200; ++rep) {
        GridField bc = GridField::make(coarse, VarTag::precip, 2000, 1);
        GridField ccr = GridField::make(coarse, VarTag::precip, 0, 1);
        GridField cfr = GridField::make(fine, VarTag::precip, 0, 1);
        for (auto& v : bc.values) v = 200.0 * rng.uniform01();
        for (auto& v : ccr.values) v = 150.0 * rng.uniform01();  // may dip below the floor
        for (auto& v : cfr.values) v = 150.0 * rng.uniform01();
        const GridField out2 =
            downscale::spatial_disaggregate(bc, ccr, cfr, MapKind::ratio);
        for (double v : out2.values) CHECK(v >= 0.0);
    }
}

namespace {
// One-cell world; monthly value = base + year/1000 + month/100, so seasonal
// values are analytic.
std::map<GridKey, GridField> flat_fields(const GridSpec& spec, double base, int ylo,
                                         int yhi) {
    std::map<GridKey, GridField> out;
    for (const VarTag tag : {VarTag::tmean, VarTag::tmin, VarTag::tmax, VarTag::precip}) {
        for (int y = ylo; y <= yhi; ++y) {
            for (int m = 1; m <= 12; ++m) {
                out.emplace(GridKey{tag, y, m},
                            GridField::make(spec, tag, y, m, base + m / 100.0));
            }
        }
    }
    return out;
}
}  // namespace

TEST_CASE("assemble_scenarios: splice, forcing-free identity, dropped members") {
    const GridSpec spec{0.0, 0.0, 1.0, 1.0, 1, 1};
    gridops::CountryMask mask;
    mask.spec = spec;
    mask.countries = {"aa"};
    mask.cell = {0};
    const GridField w = GridField::make(spec, VarTag::weight, 0, 0, 1.0);
    season::SeasonMap smap;
    smap.greenest_month["aa"] = 1;  // wrapping window exercises the splice

    downscale::GcmFields g;
    g.id = "g1";
    g.histnat = flat_fields(spec, 10.0, 1950, 2020);
    g.historical = flat_fields(spec, 10.0, 1961, 2014);
    g.ssp245 = flat_fields(spec, 10.0, 2015, 2020);

    downscale::AssembleOptions opt;
    const downscale::ScenarioSet ss =
        downscale::assemble_scenarios({g}, w, mask, smap, Window::green, opt);
    REQUIRE(ss.members.size() == 1);

    // Forcing-free: with and without trajectories coincide where both exist.
    const auto& traj = ss.members[0];
    for (const auto& [year, v] : traj.with_acc.years[static_cast<std::size_t>(
             traj.with_acc.country_index("aa"))]) {
        const auto* wo = traj.without_acc.find(traj.without_acc.country_index("aa"), year);
        REQUIRE(wo != nullptr);
        CHECK(v.tmean == doctest::Approx(wo->tmean).epsilon(1e-12));
        CHECK(v.precip == doctest::Approx(wo->precip).epsilon(1e-12));
    }

    // Season 2015 of a January-centered country mixes Nov-Dec 2014
    // (historical) with Jan-Mar 2015 (ssp245).
    const auto* v2015 = traj.with_acc.find(traj.with_acc.country_index("aa"), 2015);
    REQUIRE(v2015 != nullptr);
    const double want = (10.11 + 10.12 + 10.01 + 10.02 + 10.03) / 5.0;
    CHECK(v2015->tmean == doctest::Approx(want).epsilon(1e-12));

    // Baseline climatology over 1950-1972 hist-nat seasons.
    CHECK(traj.baseline_lo >= 1950);
    CHECK(traj.baseline_hi <= 1972);
    const double base_want = (10.11 + 10.12 + 10.01 + 10.02 + 10.03) / 5.0;
    CHECK(traj.baseline.at("aa").tmean == doctest::Approx(base_want).epsilon(1e-12));

    // A GCM missing an experiment is dropped with a warning.
    downscale::GcmFields broken;
    broken.id = "g2";
    broken.histnat = flat_fields(spec, 10.0, 1950, 2020);
    log::Capture cap;
    const downscale::ScenarioSet ss2 =
        downscale::assemble_scenarios({g, broken}, w, mask, smap, Window::green, opt);
    CHECK(ss2.members.size() == 1);
    CHECK(cap.contains("missing an experiment"));
}

TEST_CASE("scenario CSV round trip") {
    const GridSpec spec{0.0, 0.0, 1.0, 1.0, 1, 1};
    gridops::CountryMask mask;
    mask.spec = spec;
    mask.countries = {"aa"};
    mask.cell = {0};
    const GridField w = GridField::make(spec, VarTag::weight, 0, 0, 1.0);
    season::SeasonMap smap;
    smap.greenest_month["aa"] = 6;

    downscale::GcmFields g;
    g.id = "g1";
    g.histnat = flat_fields(spec, 8.0, 1950, 2020);
    g.historical = flat_fields(spec, 9.0, 1961, 2014);
    g.ssp245 = flat_fields(spec, 9.5, 2015, 2020);
    const downscale::ScenarioSet ss =
        downscale::assemble_scenarios({g}, w, mask, smap, Window::green, {});

    const std::string dir = std::filesystem::temp_directory_path().string();
    const std::string spath = dir + "/attrib_test_scen.csv";
    const std::string bpath = dir + "/attrib_test_base.csv";
    downscale::write_scenarios(ss, spath);
    downscale::write_baselines(ss, bpath);
    const downscale::ScenarioSet rs = downscale::read_scenarios(spath, bpath);
    REQUIRE(rs.members.size() == 1);
    CHECK(rs.members[0].gcm == "g1");
    CHECK(rs.members[0].baseline.at("aa").tmean ==
          doctest::Approx(ss.members[0].baseline.at("aa").tmean).epsilon(1e-11));
    const auto* a = ss.members[0].with_acc.find(0, 2000);
    const auto* b = rs.members[0].with_acc.find(rs.members[0].with_acc.country_index("aa"), 2000);
    REQUIRE(a != nullptr);
    REQUIRE(b != nullptr);
    CHECK(b->tmean == doctest::Approx(a->tmean).epsilon(1e-11));
    std::filesystem::remove(spath);
    std::filesystem::remove(bpath);
}
