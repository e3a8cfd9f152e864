#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attrib/dataio.hpp"
#include "attrib/modelspec.hpp"

namespace attrib::econ {

// Design matrix with the fixed-effect id spaces and block metadata attached.
// Columns follow FitResult order; under lat3 each base regressor appears once
// per latitude-tercile group ("g0:dT", "g1:dT", ...).
struct Design {
    std::vector<double> X;  // row-major n x ncol
    std::vector<double> y;
    std::vector<double> w;  // regression weights, mean 1
    std::vector<int> country;  // compact id per row
    std::vector<int> yearid;   // compact id per row
    std::vector<int> region;   // compact region id per row (bootstrap blocks)
    std::vector<int> group;    // heterogeneity group per row (0 when pooled)
    std::vector<std::string> colnames;
    std::vector<std::string> country_names;
    std::vector<int> years;          // yearid -> calendar year
    std::vector<std::string> region_names;
    std::vector<double> t_exposure;  // per row: seasonal T level
    std::vector<double> p_exposure;  // per row: seasonal P level (1,000 mm)
    int ncol = 0;
    int ngroups = 1;

    std::size_t n() const { return y.size(); }
    double x(std::size_t r, int c) const { return X[r * static_cast<std::size_t>(ncol) + c]; }
};

struct FitResult {
    std::vector<std::string> colnames;
    std::vector<double> beta;
    double mu = 0.0;                  // absorbed grand mean
    std::vector<double> alpha;        // per country id, weighted mean zero
    std::vector<double> theta;        // per year id, weighted mean zero
    std::vector<std::string> country_names;
    std::vector<int> years;
    std::vector<double> residuals;    // per design row
    std::size_t n = 0;
    int ngroups = 1;
    double within_r2 = 0.0;
    int demean_iterations = 0;
    double demean_delta = 0.0;
    std::vector<int> dropped_columns;  // collinear columns zeroed (if allowed)

    double coef(const std::string& name) const;  // 0 when the column is absent
    bool has(const std::string& name) const;
};

Design build_design(const dataio::RegTable& rt, const ModelSpec& spec);

// Weighted two-way fixed-effects regression. Country and year effects are
// absorbed by alternating weighted demeaning iterated to 1e-10 relative
// change; equals explicit-dummy weighted OLS. Rank deficiency after
// absorption throws NumericError naming the collinear columns unless
// drop_collinear is set, in which case those columns get beta = 0.
FitResult fit_twoway_fe(const Design& d, bool drop_collinear = false);

// Refit on a row subset (bootstrap draws, CV folds). Rows may repeat.
FitResult refit_rows(const Design& d, const std::vector<std::uint32_t>& rows,
                     bool drop_collinear = false);

// Rows grouped into the year-by-region blocks used by the cluster bootstrap,
// ordered by (year, region) for determinism.
std::vector<std::vector<std::uint32_t>> year_region_blocks(const Design& d);

struct Curve {
    std::vector<double> x;
    std::vector<double> value;     // centered response f(x) - shift
    std::vector<double> marginal;  // f'(x)
    double shift = 0.0;            // exposure-weighted mean of f
};

// Response curve for one variable ('T' or 'P', model units) and group,
// shifted so the exposure-weighted curve value is zero at the observed
// exposures.
Curve response_curve(const FitResult& fr, int group, char variable,
                     const std::vector<double>& grid,
                     const std::vector<double>& exposure_x,
                     const std::vector<double>& exposure_w);

struct LagTestResult {
    int lags = 0;
    std::vector<std::string> families;  // base regressor names
    std::vector<double> lag_sums;       // sum of lag coefficients per family
    double wald = 0.0;
    double p_value = 0.0;
    int n_rows = 0;
};

// Wald test that the summed lag-0..L coefficients are jointly zero, with the
// covariance of the sums taken from a year-region block bootstrap.
LagTestResult cumulative_lag_test(const dataio::RegTable& rt, const ModelSpec& spec,
                                  int lags, int bootstrap_b, std::uint64_t seed,
                                  int workers = 1);

struct SlopeChangeResult {
    double base_slope = 0.0;     // dT coefficient, first period
    double interaction = 0.0;    // added slope in the later period
    double p_value = 0.0;        // two-sided bootstrap percentile-of-zero
    int split_year = 0;
    std::vector<double> draws;   // bootstrap interaction draws
};

// Linear-temperature model with a period interaction; p-value for the
// interaction from the year-region block bootstrap distribution.
SlopeChangeResult slope_change_test(const dataio::RegTable& rt, const ModelSpec& spec,
                                    int split_year, int bootstrap_b, std::uint64_t seed,
                                    int workers = 1);

}  // namespace attrib::econ
