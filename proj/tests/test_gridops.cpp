#include <doctest.h>

#include <cmath>

#include "attrib/errors.hpp"
#include "attrib/gridops.hpp"
#include "attrib/logging.hpp"
#include "attrib/rng.hpp"

using namespace attrib;
using gridops::GridField;
using gridops::GridSpec;

namespace {
GridField random_field(const GridSpec& spec, std::uint64_t seed, double lo, double hi) {
    GridField f = GridField::make(spec, gridops::VarTag::tmean, 2000, 1);
    CounterRng rng(seed, 0);
    for (auto& v : f.values) v = lo + (hi - lo) * rng.uniform01();
    return f;
}

gridops::CountryMask one_country_mask(const GridSpec& spec) {
    gridops::CountryMask m;
    m.spec = spec;
    m.countries = {"aa"};
    m.cell.assign(spec.size(), 0);
    return m;
}
}  // namespace

TEST_CASE("bilinear resample preserves constants exactly") {
    const GridSpec src{-50.0, -170.0, 10.0, 10.0, 11, 35};
    const GridSpec dst{-48.7, -168.3, 7.3, 6.1, 13, 40};
    GridField f = GridField::make(src, gridops::VarTag::tmean, 2000, 1, 3.25);
    const GridField out = gridops::resample_bilinear(f, dst);
    for (double v : out.values) CHECK(v == 3.25);
}

TEST_CASE("bilinear resample interpolates a lon gradient to 0.5") {
    const GridSpec src{0.0, 0.0, 10.0, 10.0, 2, 2};
    GridField f = GridField::make(src, gridops::VarTag::tmean, 2000, 1);
    f.at(0, 0) = 0.0;
    f.at(0, 1) = 1.0;
    f.at(1, 0) = 0.0;
    f.at(1, 1) = 1.0;
    const GridSpec dst{5.0, 5.0, 10.0, 10.0, 1, 1};
    const GridField out = gridops::resample_bilinear(f, dst);
    CHECK(out.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("identity resample is bit-exact") {
    const GridSpec spec{-40.0, -120.0, 5.0, 5.0, 17, 49};
    const GridField f = random_field(spec, 7, -20.0, 35.0);
    const GridField out = gridops::resample_bilinear(f, spec);
    for (std::size_t k = 0; k < f.values.size(); ++k) CHECK(out.values[k] == f.values[k]);
}

TEST_CASE("bilinear renormalizes around missing neighbors") {
    const GridSpec src{0.0, 0.0, 10.0, 10.0, 2, 2};
    GridField f = GridField::make(src, gridops::VarTag::tmean, 2000, 1, 4.0);
    f.at(0, 0) = std::nan("");
    const GridSpec dst{5.0, 5.0, 10.0, 10.0, 1, 1};
    const GridField out = gridops::resample_bilinear(f, dst);
    CHECK(out.at(0, 0) == doctest::Approx(4.0).epsilon(1e-12));

    for (auto& v : f.values) v = std::nan("");
    const GridField out2 = gridops::resample_bilinear(f, dst);
    CHECK(GridField::missing(out2.at(0, 0)));
}

TEST_CASE("resample with no overlap errors") {
    const GridSpec src{0.0, 0.0, 1.0, 1.0, 5, 5};
    const GridSpec dst{50.0, 90.0, 1.0, 1.0, 3, 3};
    const GridField f = GridField::make(src, gridops::VarTag::tmean, 2000, 1, 1.0);
    CHECK_THROWS_AS(gridops::resample_bilinear(f, dst), DataError);
}

TEST_CASE("coarsen: constant, equal-latitude mean, cosine weighting") {
    const GridSpec src{0.0, 0.0, 10.0, 10.0, 2, 2};
    GridField c = GridField::make(src, gridops::VarTag::tmean, 2000, 1, 2.5);
    const GridSpec one{5.0, 5.0, 60.0, 60.0, 1, 1};
    CHECK(gridops::coarsen_area_weighted(c, one).at(0, 0) == doctest::Approx(2.5).epsilon(1e-12));

    // Two cells at the same latitude, values 2 and 4 -> 3.
    const GridSpec row{0.0, 0.0, 10.0, 10.0, 1, 2};
    GridField f = GridField::make(row, gridops::VarTag::tmean, 2000, 1);
    f.at(0, 0) = 2.0;
    f.at(0, 1) = 4.0;
    const GridSpec rowdst{0.0, 5.0, 10.0, 30.0, 1, 1};
    CHECK(gridops::coarsen_area_weighted(f, rowdst).at(0, 0) == doctest::Approx(3.0).epsilon(1e-12));

    // 2 at lat 0 and 4 at lat 60: (2*1 + 4*0.5) / 1.5 = 8/3.
    const GridSpec col{0.0, 0.0, 60.0, 10.0, 2, 1};
    GridField g = GridField::make(col, gridops::VarTag::tmean, 2000, 1);
    g.at(0, 0) = 2.0;
    g.at(1, 0) = 4.0;
    const GridSpec coldst{30.0, 0.0, 120.0, 10.0, 1, 1};
    CHECK(gridops::coarsen_area_weighted(g, coldst).at(0, 0) ==
          doctest::Approx(8.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("coarsen leaves uncovered destination cells missing with a warning") {
    const GridSpec src{0.0, 0.0, 10.0, 10.0, 1, 1};
    const GridSpec dst{0.0, 0.0, 1.0, 1.0, 3, 3};
    const GridField f = GridField::make(src, gridops::VarTag::tmean, 2000, 1, 1.0);
    log::Capture cap;
    const GridField out = gridops::coarsen_area_weighted(f, dst);
    CHECK(GridField::missing(out.at(2, 2)));
    CHECK(cap.contains("cover no source center"));
}

TEST_CASE("zonal aggregate: weighted means, degenerate weights, fallback") {
    const GridSpec spec{0.0, 0.0, 10.0, 10.0, 1, 2};  // same latitude, equal area
    gridops::CountryMask mask = one_country_mask(spec);
    GridField f = GridField::make(spec, gridops::VarTag::tmean, 2001, 6);
    f.at(0, 0) = 10.0;
    f.at(0, 1) = 20.0;

    GridField w = GridField::make(spec, gridops::VarTag::weight, 0, 0, 0.5);
    auto out = gridops::zonal_aggregate({f}, w, mask);
    double v = 0.0;
    REQUIRE(out.get(0, 2001, 6, &v));
    CHECK(v == doctest::Approx(15.0).epsilon(1e-12));

    // Weight 1 on one cell, 0 elsewhere -> that cell's value exactly.
    w.at(0, 0) = 1.0;
    w.at(0, 1) = 0.0;
    out = gridops::zonal_aggregate({f}, w, mask);
    REQUIRE(out.get(0, 2001, 6, &v));
    CHECK(v == 10.0);

    // All-zero weights -> unweighted area mean, logged.
    w.at(0, 0) = 0.0;
    log::Capture cap;
    out = gridops::zonal_aggregate({f}, w, mask);
    REQUIRE(out.get(0, 2001, 6, &v));
    CHECK(v == doctest::Approx(15.0).epsilon(1e-12));
    CHECK(cap.contains("zero total weight"));
}

TEST_CASE("zonal aggregate reports absent countries and respects bounds") {
    const GridSpec spec{-40.0, -60.0, 10.0, 10.0, 6, 8};
    gridops::CountryMask mask;
    mask.spec = spec;
    mask.countries = {"aa", "ghost"};
    mask.cell.assign(spec.size(), 0);

    const GridField f = random_field(spec, 3, -5.0, 30.0);
    GridField w = GridField::make(spec, gridops::VarTag::weight, 0, 0, 0.0);
    CounterRng rng(12, 0);
    for (auto& x : w.values) x = rng.uniform01();

    gridops::ZonalReport report;
    const auto out = gridops::zonal_aggregate({f}, w, mask, &report);
    REQUIRE(report.absent_countries.size() == 1);
    CHECK(report.absent_countries[0] == "ghost");

    double v = 0.0;
    REQUIRE(out.get(0, 2000, 1, &v));
    double lo = 1e300, hi = -1e300;
    for (double x : f.values) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    CHECK(v >= lo);
    CHECK(v <= hi);
}

TEST_CASE("coarsen-then-zonal equals direct zonal under lon-only coarsening") {
    const GridSpec fine{-30.0, -170.0, 15.0, 10.0, 5, 32};
    const GridSpec coarse{-30.0, -165.0, 15.0, 20.0, 5, 16};
    const GridField f = random_field(fine, 21, 0.0, 10.0);

    gridops::CountryMask mfine = one_country_mask(fine);
    gridops::CountryMask mcoarse = one_country_mask(coarse);
    const GridField wf = GridField::make(fine, gridops::VarTag::weight, 0, 0, 1.0);
    const GridField wc = GridField::make(coarse, gridops::VarTag::weight, 0, 0, 1.0);

    double direct = 0.0, via = 0.0;
    gridops::zonal_aggregate({f}, wf, mfine).get(0, 2000, 1, &direct);
    const GridField fc = gridops::coarsen_area_weighted(f, coarse);
    gridops::zonal_aggregate({fc}, wc, mcoarse).get(0, 2000, 1, &via);
    CHECK(via == doctest::Approx(direct).epsilon(1e-9));
}
