#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "trialineq/error.hpp"
#include "trialineq/metrics.hpp"
#include "trialineq/panel.hpp"
#include "trialineq/rng.hpp"
#include "trialineq/stats.hpp"

namespace trialineq {

/// Country-level PBR after aggregating participants and DALYs across all
/// diseases and years. Shares are over the countries in the list, so they sum
/// to one.
struct NationalPbr {
    CountryCode country;
    double participants_total = 0;
    double dalys_total = 0;
    double pbr = 0;
    double participant_share = 0;
    double daly_share = 0;
};

/// National-level aggregation over countries with positive participants and
/// DALYs (matching the valid-data rule of the intervention analysis).
inline std::vector<NationalPbr> national_pbr(const Panel& panel, YearRange period = YearRange::all()) {
    std::map<CountryCode, Totals> by_country;
    for (const auto& c : panel.cells())
        if (period.contains(c.year)) by_country[c.country] += c;

    double global_p = 0, global_b = 0;
    std::vector<NationalPbr> out;
    for (const auto& [country, tot] : by_country) {
        if (!(tot.participants > 0) || !(tot.dalys > 0)) continue;
        NationalPbr n;
        n.country = country;
        n.participants_total = tot.participants;
        n.dalys_total = tot.dalys;
        out.push_back(n);
        global_p += tot.participants;
        global_b += tot.dalys;
    }
    if (out.size() < 2) throw NumericError("national_pbr: need >= 2 countries with positive data");
    for (auto& n : out) {
        n.participant_share = n.participants_total / global_p;
        n.daly_share = n.dalys_total / global_b;
        n.pbr = n.participant_share / n.daly_share;
    }
    return out;
}

inline double median_pbr(const std::vector<NationalPbr>& national) {
    std::vector<double> v;
    v.reserve(national.size());
    for (const auto& n : national) v.push_back(n.pbr);
    return stats::median(std::move(v));
}

// ---------------------------------------------------------------------------
// Alignment scenarios

enum class Scenario : std::uint8_t { Full, Targeted };

/// How the countries to adjust are picked: absolute log-deviation from the
/// median (the intervention rule) or participation volume (mirrors the
/// removal-style sensitivity analysis).
enum class AdjustmentRanking : std::uint8_t { LogDeviation, ParticipantVolume };

struct ScenarioStep {
    double fraction = 0;
    std::size_t countries_adjusted = 0;
    double gini = 0;
    double pct_reduction = 0;
    double ci_low = 0;
    double ci_high = 0;
};

struct ScenarioResult {
    Scenario scenario = Scenario::Full;
    double baseline_gini = 0;
    double baseline_median = 0;
    std::vector<ScenarioStep> steps; // first entry is the baseline (fraction 0)
    double efficiency = 0;           // final reduction per 1% of countries adjusted
    double p_value = 1;              // paired test, baseline vs final adjusted Gini
    // bootstrap replicates, paired across scenarios via shared resample streams
    std::vector<double> replicate_baseline_gini;
    std::vector<double> replicate_final_gini;
    std::vector<double> replicate_efficiency;
};

inline std::vector<double> default_steps(Scenario s) {
    return s == Scenario::Full ? std::vector<double>{0.25, 0.5, 0.75, 1.0}
                               : std::vector<double>{0.1, 0.2, 0.3, 0.4};
}

namespace detail {

struct NationalView {
    std::vector<double> pbr;
    std::vector<double> participants;
    std::vector<std::uint32_t> country; // packed codes, for deterministic ties
};

// countries ordered most-adjustable first under the chosen ranking
inline std::vector<std::size_t> adjustment_order(const NationalView& v, double median,
                                                 AdjustmentRanking ranking) {
    std::vector<double> score(v.pbr.size());
    for (std::size_t i = 0; i < v.pbr.size(); ++i) {
        if (ranking == AdjustmentRanking::ParticipantVolume) {
            score[i] = v.participants[i];
        } else {
            score[i] = v.pbr[i] > 0 ? std::abs(std::log(v.pbr[i] / median))
                                    : std::numeric_limits<double>::infinity();
        }
    }
    std::vector<std::size_t> order(v.pbr.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b]) return score[a] > score[b];
        return v.country[a] < v.country[b];
    });
    return order;
}

inline std::size_t step_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(fraction * static_cast<double>(n) + 1e-9);
}

// Gini after replacing the top-k ranked PBRs with the vector's own baseline
// median. Returns {baseline_gini, adjusted_gini}.
inline std::pair<double, double> run_adjustment(const NationalView& v, double fraction,
                                                AdjustmentRanking ranking) {
    const double med = stats::median(v.pbr);
    const double g_base = gini(v.pbr);
    const auto order = adjustment_order(v, med, ranking);
    const std::size_t k = step_count(fraction, v.pbr.size());
    std::vector<double> adjusted = v.pbr;
    for (std::size_t i = 0; i < k; ++i) adjusted[order[i]] = med;
    return {g_base, gini(adjusted)};
}

inline double reduction_pct(double g_base, double g_adj) {
    if (g_base == 0) return 0.0; // already-equal fixed point
    return 100.0 * (g_base - g_adj) / g_base;
}

} // namespace detail

/// Runs one alignment scenario: at each step the top-k countries ranked by
/// deviation are snapped to the baseline median and the Gini is recomputed.
/// Bootstrap resamples countries with replacement (paired between scenarios:
/// replicate i of Full and Targeted share the same resample stream) and the
/// whole procedure reruns per resample.
inline ScenarioResult simulate(Scenario scenario, const std::vector<NationalPbr>& national,
                               std::vector<double> steps = {}, std::size_t bootstrap_iters = 200,
                               std::uint64_t seed = 42, unsigned threads = 1,
                               AdjustmentRanking ranking = AdjustmentRanking::LogDeviation) {
    if (national.size() < 2) throw NumericError("simulate: need >= 2 countries");
    if (steps.empty()) steps = default_steps(scenario);
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (!(steps[i] > 0 && steps[i] <= 1.0)) throw ConfigError("simulate: steps must lie in (0, 1]");
        if (i > 0 && steps[i] <= steps[i - 1]) throw ConfigError("simulate: steps must be ascending");
        if (detail::step_count(steps[i], national.size()) == 0)
            throw ConfigError("simulate: too few countries for step fraction");
    }

    detail::NationalView view;
    for (const auto& n : national) {
        view.pbr.push_back(n.pbr);
        view.participants.push_back(n.participants_total);
        view.country.push_back(n.country.packed());
    }

    ScenarioResult result;
    result.scenario = scenario;
    result.baseline_median = stats::median(view.pbr);
    result.baseline_gini = gini(view.pbr);

    ScenarioStep baseline;
    baseline.gini = result.baseline_gini;
    result.steps.push_back(baseline);
    for (double f : steps) {
        ScenarioStep s;
        s.fraction = f;
        s.countries_adjusted = detail::step_count(f, view.pbr.size());
        const auto [gb, ga] = detail::run_adjustment(view, f, ranking);
        s.gini = ga;
        s.pct_reduction = detail::reduction_pct(gb, ga);
        result.steps.push_back(s);
    }

    if (bootstrap_iters > 0) {
        const std::size_t n = view.pbr.size();
        std::vector<std::vector<double>> step_reductions(steps.size(),
                                                         std::vector<double>(bootstrap_iters, 0));
        result.replicate_baseline_gini.resize(bootstrap_iters);
        result.replicate_final_gini.resize(bootstrap_iters);
        result.replicate_efficiency.resize(bootstrap_iters);

        stats::parallel_for(bootstrap_iters, threads, [&](std::size_t it) {
            // one stream per replicate, shared by both scenarios so their
            // replicates pair up
            RngStream stream(seed, "simulate-bootstrap", it);
            const auto idx = stream.resample_indices(n);
            detail::NationalView rv;
            for (std::size_t i : idx) {
                rv.pbr.push_back(view.pbr[i]);
                rv.participants.push_back(view.participants[i]);
                rv.country.push_back(view.country[i]);
            }
            double g_base = 0, g_final = 0;
            for (std::size_t si = 0; si < steps.size(); ++si) {
                const auto [gb, ga] = detail::run_adjustment(rv, steps[si], ranking);
                step_reductions[si][it] = detail::reduction_pct(gb, ga);
                g_base = gb;
                if (si + 1 == steps.size()) g_final = ga;
            }
            result.replicate_baseline_gini[it] = g_base;
            result.replicate_final_gini[it] = g_final;
            result.replicate_efficiency[it] =
                step_reductions.back()[it] / (steps.back() * 100.0);
        });

        for (std::size_t si = 0; si < steps.size(); ++si) {
            result.steps[si + 1].ci_low = stats::percentile(step_reductions[si], 2.5);
            result.steps[si + 1].ci_high = stats::percentile(step_reductions[si], 97.5);
        }
        result.p_value = stats::paired_t_test(result.replicate_baseline_gini, result.replicate_final_gini);
    }

    result.efficiency = result.steps.back().pct_reduction / (steps.back() * 100.0);
    return result;
}

// ---------------------------------------------------------------------------
// Efficiency comparison

struct EfficiencyResult {
    double ratio = 0; // targeted efficiency over full efficiency
    double ci_low = 0;
    double ci_high = 0;
    double p_value = 1; // paired test on per-replicate efficiencies
};

/// Targeted-vs-full efficiency. Requires both scenarios to have been run on
/// the same national list with the same seed so replicates pair.
inline EfficiencyResult efficiency(const ScenarioResult& full, const ScenarioResult& targeted) {
    if (!(full.efficiency > 0)) throw NumericError("efficiency: full-scenario efficiency is zero");
    EfficiencyResult out;
    out.ratio = targeted.efficiency / full.efficiency;

    const std::size_t n = std::min(full.replicate_efficiency.size(), targeted.replicate_efficiency.size());
    if (n >= 2) {
        std::vector<double> ratios;
        ratios.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            if (full.replicate_efficiency[i] > 0)
                ratios.push_back(targeted.replicate_efficiency[i] / full.replicate_efficiency[i]);
        if (!ratios.empty()) {
            out.ci_low = stats::percentile(ratios, 2.5);
            out.ci_high = stats::percentile(ratios, 97.5);
        }
        const std::vector<double> f(full.replicate_efficiency.begin(), full.replicate_efficiency.begin() + static_cast<std::ptrdiff_t>(n));
        const std::vector<double> t(targeted.replicate_efficiency.begin(), targeted.replicate_efficiency.begin() + static_cast<std::ptrdiff_t>(n));
        out.p_value = stats::paired_t_test(f, t);
    }
    return out;
}

/// Two-sided paired t-test between baseline and adjusted Gini replicates.
inline double paired_gini_test(const std::vector<double>& baseline_replicates,
                               const std::vector<double>& adjusted_replicates) {
    return stats::paired_t_test(baseline_replicates, adjusted_replicates);
}

} // namespace trialineq
