#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attrib/modelspec.hpp"
#include "attrib/pipeline.hpp"

namespace attrib::sweep {

// The full Cartesian product over the seven model dimensions (192 specs),
// followed by the 8 data restrictions applied to the baseline configuration.
// Deterministic ordering; the baseline appears exactly once.
std::vector<ModelSpec> enumerate_models(
    const std::vector<std::string>& drop_countries = {"China", "USA", "India", "Brazil"});

struct SweepConfig {
    int B = 500;
    int n_ensemble = 2000;
    int cv_k = 10;
    std::uint64_t seed = 1;
    int workers = 1;
    std::vector<std::string> drop_countries = {"China", "USA", "India", "Brazil"};
    double max_failure_frac = 0.10;
};

struct SweepRow {
    ModelSpec spec;
    bool baseline = false;
    std::string status = "ok";  // or "error: ..."
    std::size_t n_obs = 0;
    double impact2020 = 0.0;
    double ci90_lo = 0.0, ci90_hi = 0.0;
    double ci95_lo = 0.0, ci95_hi = 0.0;
    double cv_reduction = 0.0;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    double summary_mean = 0.0;  // over the unrestricted specs
    double summary_sd = 0.0;
    int n_failed = 0;
};

// Runs every spec through the shared pipeline, one derived seed per spec.
// Per-spec failures are isolated in the row status; more than
// max_failure_frac failures aborts.
SweepReport run_sweep(const pipeline::Bundle& bundle, const std::vector<ModelSpec>& specs,
                      const SweepConfig& cfg);

void write_sweep_csv(const SweepReport& report, const std::string& path);

}  // namespace attrib::sweep
