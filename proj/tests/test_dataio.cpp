#include <doctest.h>

#include <cmath>
#include <fstream>

#include "attrib/dataio.hpp"
#include "attrib/errors.hpp"
#include "attrib/logging.hpp"
#include "attrib/rng.hpp"
#include "test_util.hpp"

using namespace attrib;

namespace {
std::string write_csv(const testutil::TempDir& tmp, const std::string& name,
                      const std::string& body) {
    const std::string path = tmp.file(name);
    std::ofstream f(path);
    f << body;
    return path;
}

dataio::SeasonalPanel make_weather(const std::vector<std::string>& countries, int ylo,
                                   int yhi, std::uint64_t seed) {
    dataio::SeasonalPanel p;
    p.countries = countries;
    p.years.resize(countries.size());
    for (std::size_t c = 0; c < countries.size(); ++c) {
        CounterRng rng(seed, c);
        for (int y = ylo; y <= yhi; ++y) {
            dataio::SeasonalValue v;
            v.tmean = 15.0 + 2.0 * rng.normal();
            v.tmin = v.tmean - 5.0;
            v.tmax = v.tmean + 5.0;
            v.precip = std::max(1.0, 600.0 + 100.0 * rng.normal());
            p.years[c][y] = v;
        }
    }
    return p;
}

std::string meta_csv_body(const std::vector<std::string>& countries) {
    std::string s = "country,region,latitude,revenue_weight\n";
    const auto& tokens = dataio::region_tokens();
    for (std::size_t i = 0; i < countries.size(); ++i) {
        s += countries[i] + "," + tokens[i % tokens.size()] + "," +
             std::to_string(-50.0 + 20.0 * static_cast<double>(i)) + ",1.0\n";
    }
    return s;
}
}  // namespace

TEST_CASE("load_tfp_panel: logs, bounds, duplicates, domain errors") {
    testutil::TempDir tmp("tfp");
    const std::string path = write_csv(tmp, "tfp.csv",
                                       "country,year,tfp_index\n"
                                       "aa,2000,1.0\n"
                                       "aa,2001,1.0\n");
    const dataio::IndexPanel p = dataio::load_tfp_panel(path);
    CHECK(p.ln_level[0].at(2000) == 0.0);
    CHECK(p.ln_level[0].at(2001) == 0.0);

    const std::string zero = write_csv(tmp, "zero.csv",
                                       "country,year,tfp_index\naa,2000,0.0\n");
    CHECK_THROWS_AS(dataio::load_tfp_panel(zero), DataError);

    const std::string dup = write_csv(tmp, "dup.csv",
                                      "country,year,tfp_index\naa,2000,1\naa,2000,2\n");
    CHECK_THROWS_WITH_AS(dataio::load_tfp_panel(dup), doctest::Contains("duplicate"),
                         DataError);

    const std::string oob = write_csv(tmp, "oob.csv",
                                      "country,year,tfp_index\naa,1900,1\n");
    CHECK_THROWS_AS(dataio::load_tfp_panel(oob), DataError);

    const std::string bad = write_csv(tmp, "bad.csv",
                                      "country,year,tfp_index\naa,2000,huh\n");
    CHECK_THROWS_WITH_AS(dataio::load_tfp_panel(bad), doctest::Contains(":2"), DataError);
}

TEST_CASE("unbalanced panel: row counts follow the late-start rule") {
    testutil::TempDir tmp("unbal");
    // 3 countries over 1961-1965; cc starts 1964 (late-start country).
    std::string body = "country,year,tfp_index\n";
    for (int y = 1961; y <= 1965; ++y) {
        body += "aa," + std::to_string(y) + ",1.1\n";
        body += "bb," + std::to_string(y) + ",1.2\n";
        if (y >= 1964) body += "cc," + std::to_string(y) + ",1.3\n";
    }
    const dataio::IndexPanel p = dataio::load_tfp_panel(write_csv(tmp, "t.csv", body));
    CHECK(p.n_rows() == 5 + 5 + 2);
    const dataio::GrowthPanel g = dataio::first_difference(p);
    CHECK(g.n_rows() == 4 + 4 + 1);  // one growth row lost per contiguous run
}

TEST_CASE("first_difference: arithmetic, gaps, constants") {
    dataio::IndexPanel p;
    p.countries = {"aa", "bb", "cc"};
    p.ln_level.resize(3);
    p.ln_level[0][2000] = std::log(1.0);
    p.ln_level[0][2001] = std::log(1.1);
    p.ln_level[1][2000] = 0.3;
    p.ln_level[1][2002] = 0.4;  // gap
    p.ln_level[2][2000] = 0.7;
    p.ln_level[2][2001] = 0.7;

    const dataio::GrowthPanel g = dataio::first_difference(p);
    CHECK(g.growth[0].at(2001) == doctest::Approx(0.0953101798043).epsilon(1e-10));
    CHECK(g.growth[1].empty());
    CHECK(g.growth[2].at(2001) == 0.0);
}

TEST_CASE("level round trip: exp of cumulative growth reproduces the index") {
    dataio::IndexPanel p;
    p.countries = {"aa"};
    p.ln_level.resize(1);
    CounterRng rng(5, 0);
    double ln = 0.2;
    for (int y = 1961; y <= 2015; ++y) {
        p.ln_level[0][y] = ln;
        ln += 0.02 * rng.normal();
    }
    const dataio::GrowthPanel g = dataio::first_difference(p);
    double acc = p.ln_level[0].at(1961);
    for (int y = 1962; y <= 2015; ++y) {
        acc += g.growth[0].at(y);
        CHECK(std::exp(acc) == doctest::Approx(std::exp(p.ln_level[0].at(y))).epsilon(1e-12));
    }
}

TEST_CASE("load_meta validates regions and normalizes weights") {
    testutil::TempDir tmp("meta");
    const std::string ok = write_csv(tmp, "meta.csv",
                                     "country,region,latitude,revenue_weight\n"
                                     "aa,africa,10,2\n"
                                     "bb,lac,-20,6\n");
    const dataio::CountryMeta m = dataio::load_meta(ok);
    CHECK(m.at("aa").revenue_weight == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(m.at("bb").revenue_weight == doctest::Approx(0.75).epsilon(1e-12));

    const std::string bad = write_csv(tmp, "bad.csv",
                                      "country,region,latitude,revenue_weight\n"
                                      "aa,atlantis,0,1\n");
    CHECK_THROWS_WITH_AS(dataio::load_meta(bad), doctest::Contains("atlantis"), DataError);
}

TEST_CASE("assemble_panel joins and differences exactly") {
    testutil::TempDir tmp("asm");
    dataio::GrowthPanel g;
    g.countries = {"aa", "bb"};
    g.growth.resize(2);
    for (int y = 2001; y <= 2003; ++y) {
        g.growth[0][y] = 0.01;
        g.growth[1][y] = 0.02;
    }
    const dataio::SeasonalPanel w = make_weather({"aa", "bb"}, 2000, 2003, 9);
    const dataio::CountryMeta m =
        dataio::load_meta(write_csv(tmp, "meta.csv", meta_csv_body({"aa", "bb"})));

    const ModelSpec spec = ModelSpec::baseline();
    const dataio::RegTable rt = dataio::assemble_panel(g, w, m, spec);
    CHECK(rt.rows.size() == 6);

    // Delta columns equal exact differences of the level columns; squares are
    // exact products.
    for (const auto& r : rt.rows) {
        const auto* now = w.find(w.country_index(rt.countries[r.country]), r.year);
        const auto* prev = w.find(w.country_index(rt.countries[r.country]), r.year - 1);
        REQUIRE(now != nullptr);
        REQUIRE(prev != nullptr);
        CHECK(r.dt == now->tmean - prev->tmean);
        CHECK(r.t_level == now->tmean);
        CHECK(r.dt2 == r.dt * r.dt);
        CHECK(r.dp == now->precip / 1000.0 - prev->precip / 1000.0);
        CHECK(r.dp2 == r.dp * r.dp);
    }

    // Revenue weights renormalized over included countries.
    double total = 0.0;
    for (double v : rt.revenue_weight) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("assemble_panel drops the dependent rows of a missing weather year") {
    testutil::TempDir tmp("asm2");
    dataio::GrowthPanel g;
    g.countries = {"aa"};
    g.growth.resize(1);
    for (int y = 2001; y <= 2004; ++y) g.growth[0][y] = 0.01;
    dataio::SeasonalPanel w = make_weather({"aa"}, 2000, 2004, 10);
    w.years[0].erase(2002);  // kills the 2002 delta and the 2003 delta

    const dataio::CountryMeta m =
        dataio::load_meta(write_csv(tmp, "meta.csv", meta_csv_body({"aa"})));
    dataio::AssembleOptions opt;
    opt.min_coverage = 0.0;
    dataio::AssembleReport report;
    const dataio::RegTable rt =
        dataio::assemble_panel(g, w, m, ModelSpec::baseline(), opt, &report);
    CHECK(rt.rows.size() == 2);  // 2001 and 2004 survive
    REQUIRE(report.dropped.size() == 2);
    CHECK(report.dropped[0] == "aa:2002");
    CHECK(report.dropped[1] == "aa:2003");

    // Low coverage becomes a hard error listing the missing pairs.
    opt.min_coverage = 0.9;
    CHECK_THROWS_WITH_AS(dataio::assemble_panel(g, w, m, ModelSpec::baseline(), opt),
                         doctest::Contains("aa:2002"), DataError);
}

TEST_CASE("assemble_panel with precipitation excluded has no P columns") {
    testutil::TempDir tmp("asm3");
    dataio::GrowthPanel g;
    g.countries = {"aa"};
    g.growth.resize(1);
    g.growth[0][2001] = 0.01;
    const dataio::SeasonalPanel w = make_weather({"aa"}, 2000, 2001, 11);
    const dataio::CountryMeta m =
        dataio::load_meta(write_csv(tmp, "meta.csv", meta_csv_body({"aa"})));
    ModelSpec spec = ModelSpec::baseline();
    spec.include_precip = false;
    const dataio::RegTable rt = dataio::assemble_panel(g, w, m, spec);
    CHECK_FALSE(rt.has_precip);
    CHECK(rt.rows[0].dp == 0.0);
    CHECK(rt.rows[0].p_level == 0.0);
}

TEST_CASE("tercile assignment splits equally with deterministic ties") {
    const std::vector<std::string> countries = {"a", "b", "c", "d", "e", "f"};
    const std::vector<double> lat = {5.0, 10.0, 20.0, 30.0, 40.0, 50.0};
    const auto t = dataio::assign_terciles(countries, lat);
    CHECK(t == std::vector<int>({0, 0, 1, 1, 2, 2}));

    // All-equal keys: ties broken by country id order.
    const std::vector<double> flat(6, 1.0);
    const auto t2 = dataio::assign_terciles(countries, flat);
    CHECK(t2 == std::vector<int>({0, 0, 1, 1, 2, 2}));
}

TEST_CASE("seasonal panel CSV round trip") {
    testutil::TempDir tmp("seas");
    dataio::SeasonalPanel p = make_weather({"aa", "bb"}, 2000, 2002, 13);
    p.years[0][2001].tmin = std::numeric_limits<double>::quiet_NaN();  // NA cell
    dataio::write_seasonal_panel(p, tmp.file("s.csv"));
    const dataio::SeasonalPanel q = dataio::read_seasonal_panel(tmp.file("s.csv"));
    CHECK(q.countries == p.countries);
    for (std::size_t c = 0; c < p.countries.size(); ++c) {
        for (const auto& [y, v] : p.years[c]) {
            const auto* r = q.find(static_cast<int>(c), y);
            REQUIRE(r != nullptr);
            if (std::isnan(v.tmin)) CHECK(std::isnan(r->tmin));
            CHECK(r->tmean == doctest::Approx(v.tmean).epsilon(1e-11));
            CHECK(r->precip == doctest::Approx(v.precip).epsilon(1e-11));
        }
    }
}
