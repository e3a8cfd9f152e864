#include "attrib/sweep.hpp"

#include <cmath>

#include "attrib/csv.hpp"
#include "attrib/errors.hpp"
#include "attrib/logging.hpp"
#include "attrib/parallel.hpp"

namespace attrib::sweep {

std::vector<ModelSpec> enumerate_models(const std::vector<std::string>& drop_countries) {
    std::vector<ModelSpec> out;
    for (const TVar tvar : {TVar::tmean, TVar::tmin, TVar::tmax}) {
        for (const bool precip : {true, false}) {
            for (const Form form : {Form::quadratic, Form::cubic}) {
                for (const RegWeights rw : {RegWeights::equal, RegWeights::revenue}) {
                    for (const AggWeights aw :
                         {AggWeights::cropland, AggWeights::cropland_pasture}) {
                        for (const Window win : {Window::green, Window::calendar}) {
                            for (const Hetero het : {Hetero::pooled, Hetero::lat3}) {
                                ModelSpec s;
                                s.tvar = tvar;
                                s.include_precip = precip;
                                s.form = form;
                                s.reg_weights = rw;
                                s.agg_weights = aw;
                                s.window = win;
                                s.hetero = het;
                                out.push_back(s);
                            }
                        }
                    }
                }
            }
        }
    }
    for (const auto& c : drop_countries) {
        ModelSpec s = ModelSpec::baseline();
        s.restriction = Restriction::drop(c);
        out.push_back(s);
    }
    {
        ModelSpec s = ModelSpec::baseline();
        s.restriction = Restriction::coldest();
        out.push_back(s);
        s.restriction = Restriction::hottest();
        out.push_back(s);
        s.restriction = Restriction::years(1962, 1988);
        out.push_back(s);
        s.restriction = Restriction::years(1989, 2015);
        out.push_back(s);
    }
    return out;
}

SweepReport run_sweep(const pipeline::Bundle& bundle, const std::vector<ModelSpec>& specs,
                      const SweepConfig& cfg) {
    SweepReport report;
    report.rows.resize(specs.size());

    parallel_for(specs.size(), cfg.workers, [&](std::size_t i) {
        SweepRow& row = report.rows[i];
        row.spec = specs[i];
        row.baseline = specs[i] == ModelSpec::baseline();
        pipeline::SpecRunConfig rc;
        rc.B = cfg.B;
        rc.n_ensemble = cfg.n_ensemble;
        rc.cv_k = cfg.cv_k;
        rc.seed = pipeline::spec_seed(cfg.seed, specs[i]);
        rc.workers = 1;  // parallelism lives at the spec level
        try {
            const pipeline::SpecOutcome out = pipeline::run_spec_pipeline(bundle, specs[i], rc);
            row.n_obs = out.n_obs;
            if (!out.has_impacts)
                throw DataError("no scenarios prepared for this spec variant");
            row.impact2020 = out.impacts.terminal_mean;
            row.ci90_lo = out.impacts.terminal_ci90.first;
            row.ci90_hi = out.impacts.terminal_ci90.second;
            row.ci95_lo = out.impacts.terminal_ci95.first;
            row.ci95_hi = out.impacts.terminal_ci95.second;
            row.cv_reduction = out.cv.reduction;
        } catch (const std::exception& e) {
            row.status = std::string("error: ") + e.what();
        }
    });

    int failed = 0;
    double sum = 0.0, sum2 = 0.0;
    int n_unrestricted = 0;
    for (const auto& row : report.rows) {
        if (row.status != "ok") {
            ++failed;
            log::warn("sweep: spec " + row.spec.key() + " failed: " + row.status);
            continue;
        }
        if (row.spec.restriction.kind == Restriction::Kind::none) {
            sum += row.impact2020;
            sum2 += row.impact2020 * row.impact2020;
            ++n_unrestricted;
        }
    }
    report.n_failed = failed;
    if (n_unrestricted > 0) {
        report.summary_mean = sum / n_unrestricted;
        const double var =
            n_unrestricted > 1
                ? (sum2 - sum * sum / n_unrestricted) / (n_unrestricted - 1)
                : 0.0;
        report.summary_sd = var > 0.0 ? std::sqrt(var) : 0.0;
    }
    if (static_cast<double>(failed) >
        cfg.max_failure_frac * static_cast<double>(specs.size())) {
        throw NumericError("sweep: " + std::to_string(failed) + " of " +
                           std::to_string(specs.size()) + " specs failed");
    }
    return report;
}

void write_sweep_csv(const SweepReport& report, const std::string& path) {
    csv::Writer w(path);
    for (const char* h :
         {"spec_id", "tvar", "precip", "form", "reg_weights", "agg_weights", "window",
          "hetero", "restriction", "dependent", "baseline", "status", "n_obs",
          "impact2020_mean", "ci90_lo", "ci90_hi", "ci95_lo", "ci95_hi", "cv_reduction"})
        w.field(std::string(h));
    w.endrow();
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const SweepRow& r = report.rows[i];
        w.field(static_cast<long long>(i));
        w.field(std::string(tvar_token(r.spec.tvar)));
        w.field(std::string(r.spec.include_precip ? "precip" : "noprecip"));
        w.field(std::string(form_token(r.spec.form)));
        w.field(std::string(reg_weights_token(r.spec.reg_weights)));
        w.field(std::string(agg_weights_token(r.spec.agg_weights)));
        w.field(std::string(window_token(r.spec.window)));
        w.field(std::string(hetero_token(r.spec.hetero)));
        w.field(r.spec.restriction.token());
        w.field(std::string(dependent_token(r.spec.dependent)));
        w.field(std::string(r.baseline ? "1" : "0"));
        w.field(r.status);
        w.field(static_cast<long long>(r.n_obs));
        w.field(r.impact2020);
        w.field(r.ci90_lo);
        w.field(r.ci90_hi);
        w.field(r.ci95_lo);
        w.field(r.ci95_hi);
        w.field(r.cv_reduction);
        w.endrow();
    }
}

}  // namespace attrib::sweep
