#include "attrib/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>

#include "attrib/errors.hpp"
#include "attrib/logging.hpp"
#include "attrib/parallel.hpp"
#include "attrib/rng.hpp"
#include "attrib/stats.hpp"

namespace attrib::inference {

std::pair<double, double> BootstrapEnsemble::percentile_ci(int col, double level) const {
    std::vector<double> v;
    v.reserve(draws.size());
    for (const auto& d : draws) v.push_back(d[static_cast<std::size_t>(col)]);
    std::sort(v.begin(), v.end());
    const double tail = 0.5 * (1.0 - level);
    return {stats::quantile_sorted(v, tail), stats::quantile_sorted(v, 1.0 - tail)};
}

BootstrapEnsemble block_bootstrap(const econ::Design& d, int B, std::uint64_t seed,
                                  int workers) {
    if (B < 1) throw UsageError("block_bootstrap: B must be >= 1");
    const auto blocks = econ::year_region_blocks(d);
    for (const auto& blk : blocks) {
        if (blk.empty()) throw DataError("block_bootstrap: empty block");
    }
    const std::size_t nb = blocks.size();

    BootstrapEnsemble be;
    be.colnames = d.colnames;
    be.seed = seed;
    be.n_blocks = static_cast<int>(nb);
    be.draws.resize(static_cast<std::size_t>(B));

    std::atomic<int> redraws{0};
    const int cap = 10 * B;
    parallel_for(static_cast<std::size_t>(B), workers, [&](std::size_t b) {
        CounterRng rng(seed, static_cast<std::uint64_t>(b));
        while (true) {
            std::vector<std::uint32_t> rows;
            for (std::size_t j = 0; j < nb; ++j) {
                const auto& blk = blocks[rng.uniform_below(nb)];
                rows.insert(rows.end(), blk.begin(), blk.end());
            }
            try {
                be.draws[b] = econ::refit_rows(d, rows, false).beta;
                return;
            } catch (const NumericError&) {
                if (redraws.fetch_add(1) + 1 > cap)
                    throw NumericError("block_bootstrap: redraw cap " + std::to_string(cap) +
                                       " exceeded");
            }
        }
    });
    be.redraws = redraws.load();
    if (be.redraws > 0)
        log::info("block_bootstrap: " + std::to_string(be.redraws) + " rank-deficient redraws");
    return be;
}

namespace {

// Weather columns of a RegRow (everything the placebo reshuffles).
void copy_weather(const dataio::RegRow& from, dataio::RegRow* to) {
    to->t_level = from.t_level;
    to->p_level = from.p_level;
    to->dt = from.dt;
    to->dt2 = from.dt2;
    to->dt3 = from.dt3;
    to->dp = from.dp;
    to->dp2 = from.dp2;
    to->dp3 = from.dp3;
}

dataio::RegTable permuted_table(const dataio::RegTable& rt, PlaceboMode mode,
                                const std::vector<int>& labels,
                                const std::vector<std::size_t>& perm) {
    // labels: sorted distinct years (or country ids); perm: permutation of
    // label indices. Weather for label L comes from label perm[L].
    std::map<std::pair<int, int>, const dataio::RegRow*> index;
    for (const auto& r : rt.rows) index[{r.country, r.year}] = &r;

    std::map<int, int> label_pos;
    for (std::size_t i = 0; i < labels.size(); ++i) label_pos[labels[i]] = static_cast<int>(i);

    dataio::RegTable out = rt;
    out.rows.clear();
    for (const auto& r : rt.rows) {
        const int own = mode == PlaceboMode::year ? r.year : r.country;
        const int src_label = labels[perm[static_cast<std::size_t>(label_pos.at(own))]];
        const auto key = mode == PlaceboMode::year ? std::make_pair(r.country, src_label)
                                                   : std::make_pair(src_label, r.year);
        const auto it = index.find(key);
        if (it == index.end()) continue;  // unbalanced panel: no donor row
        dataio::RegRow nr = r;
        copy_weather(*it->second, &nr);
        out.rows.push_back(nr);
    }
    if (out.rows.empty()) throw DataError("placebo: permutation left no joinable rows");
    return out;
}

std::vector<int> placebo_labels(const dataio::RegTable& rt, PlaceboMode mode) {
    std::set<int> s;
    for (const auto& r : rt.rows) s.insert(mode == PlaceboMode::year ? r.year : r.country);
    return {s.begin(), s.end()};
}

}  // namespace

std::vector<double> placebo_replicate(const dataio::RegTable& rt, const ModelSpec& spec,
                                      PlaceboMode mode,
                                      const std::vector<std::size_t>& perm) {
    const auto labels = placebo_labels(rt, mode);
    if (perm.size() != labels.size())
        throw UsageError("placebo_replicate: permutation size mismatch");
    const auto table = permuted_table(rt, mode, labels, perm);
    return fit_twoway_fe(econ::build_design(table, spec)).beta;
}

PlaceboDistribution placebo_test(const dataio::RegTable& rt, const ModelSpec& spec,
                                 PlaceboMode mode, int R, std::uint64_t seed,
                                 int workers) {
    if (R < 1) throw UsageError("placebo_test: R must be >= 1");
    const auto labels = placebo_labels(rt, mode);
    if (labels.size() < 3)
        throw DataError("placebo_test: need at least 3 distinct labels to permute");

    PlaceboDistribution pd;
    pd.mode = mode;
    pd.seed = seed;
    const econ::FitResult sample = fit_twoway_fe(econ::build_design(rt, spec));
    pd.colnames = sample.colnames;
    pd.sample = sample.beta;
    pd.draws.resize(static_cast<std::size_t>(R));

    std::atomic<int> failures{0};
    const int cap = 10 * R;
    parallel_for(static_cast<std::size_t>(R), workers, [&](std::size_t rep) {
        CounterRng rng(seed, rep + 1000003);  // offset: distinct from bootstrap streams
        std::vector<std::size_t> perm;
        while (true) {
            rng.permutation(labels.size(), perm);
            bool identity = true;
            for (std::size_t i = 0; i < perm.size(); ++i) {
                if (perm[i] != i) {
                    identity = false;
                    break;
                }
            }
            if (identity) continue;
            try {
                const auto table = permuted_table(rt, mode, labels, perm);
                pd.draws[rep] = fit_twoway_fe(econ::build_design(table, spec)).beta;
                return;
            } catch (const NumericError&) {
                if (failures.fetch_add(1) + 1 > cap)
                    throw NumericError("placebo_test: redraw cap exceeded");
            }
        }
    });

    const std::size_t k = pd.sample.size();
    pd.percentile.assign(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        double below = 0.0;
        for (const auto& dr : pd.draws) {
            if (dr[c] < pd.sample[c]) below += 1.0;
            else if (dr[c] == pd.sample[c]) below += 0.5;
        }
        pd.percentile[c] = 100.0 * below / static_cast<double>(R);
    }
    return pd;
}

CvResult kfold_cv(const dataio::RegTable& rt, const ModelSpec& spec, int k,
                  std::uint64_t seed, int workers) {
    const econ::Design d = econ::build_design(rt, spec);
    const int nyears = static_cast<int>(d.years.size());
    if (k < 2) throw UsageError("kfold_cv: k must be >= 2");
    if (k > nyears)
        throw UsageError("kfold_cv: k=" + std::to_string(k) + " exceeds " +
                         std::to_string(nyears) + " years");

    // Shuffle year ids, deal them round-robin into folds.
    CounterRng rng(seed, 424243);
    std::vector<std::size_t> order;
    rng.permutation(static_cast<std::size_t>(nyears), order);
    std::vector<int> fold_of_year(static_cast<std::size_t>(nyears));
    for (std::size_t i = 0; i < order.size(); ++i)
        fold_of_year[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));

    // Weather-free variant of the design for the comparison model.
    econ::Design d0 = d;
    d0.ncol = 0;
    d0.colnames.clear();
    d0.X.clear();

    std::vector<double> se_full(static_cast<std::size_t>(k), 0.0);
    std::vector<double> se_null(static_cast<std::size_t>(k), 0.0);
    std::vector<double> wsum(static_cast<std::size_t>(k), 0.0);

    parallel_for(static_cast<std::size_t>(k), workers, [&](std::size_t fold) {
        std::vector<std::uint32_t> train;
        std::vector<std::uint32_t> test;
        for (std::size_t i = 0; i < d.n(); ++i) {
            if (fold_of_year[static_cast<std::size_t>(d.yearid[i])] == static_cast<int>(fold))
                test.push_back(static_cast<std::uint32_t>(i));
            else
                train.push_back(static_cast<std::uint32_t>(i));
        }
        if (train.empty() || test.empty()) return;
        const econ::FitResult full = econ::refit_rows(d, train, /*drop_collinear=*/true);
        const econ::FitResult null = econ::refit_rows(d0, train, /*drop_collinear=*/true);

        auto predict = [&](const econ::FitResult& fr, std::size_t i, bool with_x) {
            double yhat = fr.mu + fr.alpha[static_cast<std::size_t>(d.country[i])];
            // Held-out year: theta contribution is its training mean, zero by
            // the normalization.
            if (with_x) {
                for (int c = 0; c < d.ncol; ++c)
                    yhat += d.x(i, c) * fr.beta[static_cast<std::size_t>(c)];
            }
            return yhat;
        };
        for (const auto i : test) {
            const double ef = d.y[i] - predict(full, i, true);
            const double en = d.y[i] - predict(null, i, false);
            se_full[fold] += d.w[i] * ef * ef;
            se_null[fold] += d.w[i] * en * en;
            wsum[fold] += d.w[i];
        }
    });

    double sf = 0.0, sn = 0.0, sw = 0.0;
    for (int f = 0; f < k; ++f) {
        sf += se_full[static_cast<std::size_t>(f)];
        sn += se_null[static_cast<std::size_t>(f)];
        sw += wsum[static_cast<std::size_t>(f)];
    }
    if (!(sw > 0.0)) throw NumericError("kfold_cv: no held-out observations");
    CvResult res;
    res.k = k;
    res.mse_full = sf / sw;
    res.mse_noweather = sn / sw;
    res.reduction = res.mse_noweather > 0.0
                        ? (res.mse_noweather - res.mse_full) / res.mse_noweather
                        : 0.0;
    return res;
}

}  // namespace attrib::inference
