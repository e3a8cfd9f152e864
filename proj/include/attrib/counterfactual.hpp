#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "attrib/dataio.hpp"
#include "attrib/downscale.hpp"
#include "attrib/inference.hpp"
#include "attrib/modelspec.hpp"

namespace attrib::counterfactual {

// Term order used for anomaly powers and coefficient lookups.
// dT, dT2, dT3, dP, dP2, dP3 (precip terms in 1,000 mm units).
constexpr int N_TERMS = 6;
extern const std::array<const char*, N_TERMS> TERM_NAMES;

// Seasonal anomalies of one GCM against its own without-ACC baseline
// climatology, with powers, for both scenarios.
struct AnomalyTable {
    std::string gcm;
    std::vector<std::string> countries;
    std::vector<int> years;  // 1962..2020
    // [country][year_index][term]; zero-filled where seasonal coverage ends
    std::vector<std::vector<std::array<double, N_TERMS>>> with_acc;
    std::vector<std::vector<std::array<double, N_TERMS>>> without_acc;
    int missing_with = 0;     // country-years lacking coverage (warned)
    int missing_without = 0;
};

AnomalyTable scenario_anomalies(const downscale::ScenarioTraj& traj,
                                const std::vector<std::string>& countries, TVar tvar,
                                bool include_precip, int year_lo = 1962,
                                int year_hi = 2020);

// Running sum of beta-weighted anomaly powers: the cumulative impact path of
// one scenario for one country.
std::vector<double> cumulative_impact(const std::array<double, N_TERMS>& beta,
                                      const std::vector<std::array<double, N_TERMS>>& anomalies);

struct ImpactEnsemble {
    std::vector<int> years;
    std::vector<std::string> countries;
    std::vector<std::string> regions;
    std::vector<std::string> gcms;
    std::vector<std::pair<int, int>> pairs;             // (bootstrap draw, gcm)
    std::vector<std::vector<double>> global;            // member x year, log points
    std::vector<std::vector<std::vector<double>>> regional;  // region x member x year
    std::vector<std::vector<double>> country_mean;      // ensemble mean per country
    std::vector<double> mean_path, ci90_lo, ci90_hi;    // global summaries
    double terminal_mean = 0.0;
    std::pair<double, double> terminal_ci90{0.0, 0.0};
    std::pair<double, double> terminal_ci95{0.0, 0.0};
    std::uint64_t seed = 0;
};

// Joins n random (bootstrap draw, GCM) pairs, computes per-country ACC
// impact paths (with minus without), and aggregates globally and by region
// with the fixed revenue weights.
ImpactEnsemble ensemble_impacts(const inference::BootstrapEnsemble& be,
                                const downscale::ScenarioSet& ss,
                                const dataio::RegTable& rt, const ModelSpec& spec,
                                int n, std::uint64_t seed, int workers = 1);

struct LevelPaths {
    std::vector<int> years;               // 1962..2020
    std::vector<double> observed;         // observed+projected level, 100 at 1962
    std::vector<std::vector<double>> counterfactual;  // member x year
    std::vector<double> cf_mean, cf_q05, cf_q95;
    int projection_start = 0;             // first projected year
};

// Observed levels extended by the 10-year-mean growth projection, and the
// counterfactual level path per ensemble member via
// L = exp(sum dln_observed - (I_with - I_without)), normalized to 100 in the
// first impact year.
std::map<std::string, LevelPaths> project_and_level(const dataio::GrowthPanel& growth,
                                                    const ImpactEnsemble& ie,
                                                    const dataio::RegTable& rt);

// Revenue-weighted mean of country paths (log points), weights renormalized
// over the given subset.
std::vector<double> aggregate_paths(const std::vector<std::vector<double>>& paths,
                                    const std::vector<double>& weights);

struct YearsLostResult {
    double mean_estimate = 0.0;           // from the ensemble-mean path
    std::vector<double> per_member;       // +inf when no crossing
    std::pair<double, double> ci90{0.0, 0.0};
    int no_crossing = 0;
};

// Years of growth lost: 2020 observed level vs the year the counterfactual
// path first reaches it (linear interpolation between bracketing years).
YearsLostResult years_lost(const LevelPaths& lp);

}  // namespace attrib::counterfactual
