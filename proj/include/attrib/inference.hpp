#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attrib/dataio.hpp"
#include "attrib/econ.hpp"
#include "attrib/modelspec.hpp"

namespace attrib::inference {

struct BootstrapEnsemble {
    std::vector<std::string> colnames;
    std::vector<std::vector<double>> draws;  // B x ncol
    std::uint64_t seed = 0;
    int n_blocks = 0;
    int redraws = 0;

    // Percentile CI endpoints as order statistics with linear interpolation:
    // level 0.90 -> [5th, 95th].
    std::pair<double, double> percentile_ci(int col, double level) const;
};

// Year-by-region block bootstrap: each draw samples n_blocks blocks with
// replacement and refits. Rank-deficient draws are redrawn (hard cap 10*B).
// Same seed gives bit-identical ensembles regardless of worker count.
BootstrapEnsemble block_bootstrap(const econ::Design& d, int B, std::uint64_t seed,
                                  int workers = 1);

enum class PlaceboMode { year, country };

struct PlaceboDistribution {
    std::vector<std::string> colnames;
    std::vector<double> sample;               // sample-fit coefficients
    std::vector<std::vector<double>> draws;   // R x ncol
    std::vector<double> percentile;           // of sample within draws, 0..100
    PlaceboMode mode = PlaceboMode::year;
    std::uint64_t seed = 0;
};

// Reshuffle test: per replicate one random permutation of year (or country)
// labels is applied to the weather side, the model is refit, and the sample
// estimate's percentile within the resulting distribution is reported.
// The identity permutation is excluded.
PlaceboDistribution placebo_test(const dataio::RegTable& rt, const ModelSpec& spec,
                                 PlaceboMode mode, int R, std::uint64_t seed,
                                 int workers = 1);

// Test hook: refit with an explicit label permutation (identity reproduces
// the sample estimate exactly).
std::vector<double> placebo_replicate(const dataio::RegTable& rt, const ModelSpec& spec,
                                      PlaceboMode mode,
                                      const std::vector<std::size_t>& perm);

struct CvResult {
    double mse_full = 0.0;
    double mse_noweather = 0.0;
    double reduction = 0.0;  // (mse0 - mse) / mse0
    int k = 0;
};

// k-fold cross-validation with whole years sampled together. Held-out rows
// are predicted with the training fixed effects (held-out year effect = the
// training weighted mean of theta, which is zero under the normalization);
// the comparison model drops the weather columns.
CvResult kfold_cv(const dataio::RegTable& rt, const ModelSpec& spec, int k,
                  std::uint64_t seed, int workers = 1);

}  // namespace attrib::inference
