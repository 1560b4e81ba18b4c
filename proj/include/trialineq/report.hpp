#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "trialineq/csv.hpp"
#include "trialineq/decomposition.hpp"
#include "trialineq/metrics.hpp"
#include "trialineq/network.hpp"
#include "trialineq/simulation.hpp"

namespace trialineq::report {

inline std::string lorenz_csv(const LorenzCurve& curve) {
    std::ostringstream out;
    csv::write_row(out, {"cum_burden_share", "cum_participant_share"});
    for (const auto& [x, y] : curve.points)
        csv::write_row(out, {csv::format_double(x), csv::format_double(y)});
    return out.str();
}

inline std::string waterfall_csv(const ScenarioResult& scenario) {
    std::ostringstream out;
    csv::write_row(out, {"step", "fraction", "countries_adjusted", "gini", "pct_reduction", "ci_low",
                         "ci_high"});
    for (std::size_t i = 0; i < scenario.steps.size(); ++i) {
        const auto& s = scenario.steps[i];
        const std::string label =
            i == 0 ? "Baseline" : "Top " + csv::format_double(s.fraction * 100) + "%";
        csv::write_row(out, {label, csv::format_double(s.fraction),
                             std::to_string(s.countries_adjusted), csv::format_double(s.gini),
                             csv::format_double(s.pct_reduction), csv::format_double(s.ci_low),
                             csv::format_double(s.ci_high)});
    }
    return out.str();
}

inline constexpr double choropleth_clamp = 1.5;

/// Map-ready (iso3, log_pbr) rows on the diverging scale used by the PBR
/// maps: natural-log PBR clamped to [-1.5, 1.5] with a clamp flag.
inline std::string choropleth_csv(const std::vector<std::pair<CountryCode, double>>& log_pbr) {
    std::ostringstream out;
    csv::write_row(out, {"iso3", "log_pbr", "clamped"});
    for (const auto& [country, v] : log_pbr) {
        double clamped = v;
        bool flag = false;
        if (clamped > choropleth_clamp) {
            clamped = choropleth_clamp;
            flag = true;
        } else if (clamped < -choropleth_clamp) {
            clamped = -choropleth_clamp;
            flag = true;
        }
        csv::write_row(out, {country.str(), csv::format_double(clamped), flag ? "1" : "0"});
    }
    return out.str();
}

inline std::string cis_bars_csv(const std::vector<CisRecord>& records) {
    std::ostringstream out;
    csv::write_row(out, {"unit", "cis_percent", "ci_low", "ci_high", "weighting"});
    for (const auto& r : records) {
        csv::write_row(out, {r.unit_label, csv::format_double(r.cis_percent),
                             csv::format_double(r.ci_low), csv::format_double(r.ci_high),
                             r.weighting == CisWeighting::Equal ? "equal" : "participant_weighted"});
    }
    return out.str();
}

inline std::string theil_timeline_csv(const std::vector<std::pair<int, TheilDecomposition>>& bins) {
    std::ostringstream out;
    csv::write_row(out, {"bin", "total", "between", "within", "between_share", "within_share"});
    for (const auto& [bin, d] : bins) {
        const double bs = d.total > 0 ? d.between / d.total : 0;
        csv::write_row(out, {std::to_string(bin), csv::format_double(d.total),
                             csv::format_double(d.between), csv::format_double(d.within),
                             csv::format_double(bs), csv::format_double(d.total > 0 ? 1.0 - bs : 0)});
    }
    return out.str();
}

inline std::string network_metrics_csv(const NetworkMetrics& m) {
    std::ostringstream out;
    csv::write_row(out, {"metric", "value"});
    auto row = [&](const char* name, double v) { csv::write_row(out, {name, csv::format_double(v)}); };
    row("density", m.density);
    row("factor_homophily", m.factor_homophily);
    row("status_homophily", m.status_homophily);
    row("degree_assortativity", m.degree_assortativity);
    row("factor_assortativity", m.factor_assortativity);
    row("avg_clustering", m.avg_clustering);
    row("modularity", m.modularity);
    row("avg_path_length", m.avg_path_length);
    row("diameter", m.diameter);
    row("n_components", m.n_components);
    return out.str();
}

inline std::string evolution_csv(const std::vector<EvolutionStep>& steps) {
    std::ostringstream out;
    csv::write_row(out, {"delta_gini", "density", "density_lo", "density_hi", "homophily",
                         "homophily_lo", "homophily_hi", "modularity", "modularity_lo",
                         "modularity_hi", "avg_path_length", "path_lo", "path_hi"});
    for (const auto& s : steps) {
        csv::write_row(out, {csv::format_double(s.delta_gini),
                             csv::format_double(s.density.value), csv::format_double(s.density.ci_low),
                             csv::format_double(s.density.ci_high),
                             csv::format_double(s.homophily.value),
                             csv::format_double(s.homophily.ci_low),
                             csv::format_double(s.homophily.ci_high),
                             csv::format_double(s.modularity.value),
                             csv::format_double(s.modularity.ci_low),
                             csv::format_double(s.modularity.ci_high),
                             csv::format_double(s.avg_path_length.value),
                             csv::format_double(s.avg_path_length.ci_low),
                             csv::format_double(s.avg_path_length.ci_high)});
    }
    return out.str();
}

inline std::string edge_redistribution_csv(const EdgeRedistribution& r) {
    std::ostringstream out;
    csv::write_row(out, {"class", "before", "before_share", "after", "after_share"});
    auto share = [&](double v) { return csv::format_double(r.total_edges > 0 ? v / r.total_edges : 0); };
    csv::write_row(out, {"within_factor", csv::format_double(r.within_before), share(r.within_before),
                         csv::format_double(r.within_after), share(r.within_after)});
    csv::write_row(out, {"cross_factor", csv::format_double(r.cross_before), share(r.cross_before),
                         csv::format_double(r.cross_after), share(r.cross_after)});
    for (const auto& p : r.pairs) {
        csv::write_row(out, {std::string(factor_name(p.factor_a)) + "-" + std::string(factor_name(p.factor_b)),
                             csv::format_double(p.before), share(p.before), csv::format_double(p.after),
                             share(p.after)});
    }
    return out.str();
}

} // namespace trialineq::report
