#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trialineq/error.hpp"
#include "trialineq/metrics.hpp"
#include "trialineq/ols.hpp"
#include "trialineq/panel.hpp"
#include "trialineq/stats.hpp"

namespace trialineq {

/// Theil-T index, normalized form: (1/N) sum (x_i/mu) ln(x_i/mu).
/// Requires strictly positive values; zeros must be excluded upstream.
inline double theil(const std::vector<double>& values) {
    if (values.empty()) throw NumericError("theil of empty vector");
    double sum = 0;
    for (double v : values) {
        if (!(v > 0)) throw NumericError("theil: non-positive value");
        sum += v;
    }
    const double mu = sum / static_cast<double>(values.size());
    double t = 0;
    for (double v : values) {
        const double r = v / mu;
        t += r * std::log(r);
    }
    return t / static_cast<double>(values.size());
}

enum class TheilGrouping : std::uint8_t { Disease, Country };

struct TheilGroupTerm {
    std::string group;
    std::size_t n = 0;
    double mean = 0;
    double between_term = 0; // this group's contribution to the between component
    double within_term = 0;  // weighted within-group Theil contribution
};

struct TheilDecomposition {
    double total = 0;
    double between = 0;
    double within = 0;
    TheilGrouping grouping = TheilGrouping::Disease;
    std::vector<TheilGroupTerm> group_terms;
    std::size_t dropped_nonpositive = 0;
};

/// Standard population-and-mean-weighted Theil-T split: between + within
/// equals the total exactly. Group labels are free-form; at least two
/// nonempty groups, all values positive.
inline TheilDecomposition theil_decompose(const std::vector<double>& values,
                                          const std::vector<std::string>& groups,
                                          TheilGrouping grouping = TheilGrouping::Disease) {
    if (values.size() != groups.size()) throw NumericError("theil_decompose: length mismatch");
    if (values.empty()) throw NumericError("theil_decompose: empty input");

    std::map<std::string, std::vector<double>> by_group;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0)) throw NumericError("theil_decompose: non-positive value");
        by_group[groups[i]].push_back(values[i]);
    }
    if (by_group.size() < 2) throw NumericError("theil_decompose: need >= 2 groups");

    const double n_total = static_cast<double>(values.size());
    double grand_sum = 0;
    for (double v : values) grand_sum += v;
    const double mu = grand_sum / n_total;
    if (!(mu > 0)) throw NumericError("theil_decompose: zero mean");

    TheilDecomposition out;
    out.grouping = grouping;
    out.total = theil(values);
    for (const auto& [label, xs] : by_group) {
        TheilGroupTerm term;
        term.group = label;
        term.n = xs.size();
        double s = 0;
        for (double v : xs) s += v;
        term.mean = s / static_cast<double>(xs.size());
        const double pop_share = static_cast<double>(xs.size()) / n_total;
        const double income_ratio = term.mean / mu;
        term.between_term = pop_share * income_ratio * std::log(income_ratio);
        term.within_term = pop_share * income_ratio * theil(xs);
        out.between += term.between_term;
        out.within += term.within_term;
        out.group_terms.push_back(std::move(term));
    }
    return out;
}

/// Decomposes the PBR distribution of a pair set, dropping zero-participation
/// pairs (entropy needs positive values) with a count.
inline TheilDecomposition theil_decompose(const PairPbrSet& set, TheilGrouping grouping) {
    std::vector<double> values;
    std::vector<std::string> groups;
    std::size_t dropped = 0;
    for (const auto& p : set.pairs) {
        if (!(p.pbr > 0)) {
            ++dropped;
            continue;
        }
        values.push_back(p.pbr);
        groups.push_back(grouping == TheilGrouping::Disease ? std::string(p.disease.name())
                                                            : p.country.str());
    }
    auto out = theil_decompose(values, groups, grouping);
    out.dropped_nonpositive = dropped;
    return out;
}

// ---------------------------------------------------------------------------
// Two-way fixed-effects variance partition

struct FePanelObs {
    CountryCode country;
    DiseaseCategory disease;
    int year = 0;
    double value = 0; // log-PBR in the paper's usage
};

struct VariancePartition {
    double r2_country = 0;
    double r2_disease = 0;
    double r2_year = 0;
    double r2_residual = 0;
    std::size_t n_obs = 0;
    std::string estimation_variant; // "sequential" or "marginal"
};

struct VariancePartitionResult {
    VariancePartition sequential; // entry order: country, disease, year
    VariancePartition marginal;   // drop-one shares
    double r2_full = 0;
};

namespace detail {

// sum-to-zero (effect) coding: n_levels - 1 columns, last level coded -1
inline void fill_effect_block(Eigen::MatrixXd& X, long col0, const std::vector<int>& level_of,
                              std::size_t n_levels) {
    for (std::size_t i = 0; i < level_of.size(); ++i) {
        const int lv = level_of[i];
        if (lv == static_cast<int>(n_levels) - 1) {
            for (std::size_t k = 0; k + 1 < n_levels; ++k)
                X(static_cast<long>(i), col0 + static_cast<long>(k)) = -1.0;
        } else {
            X(static_cast<long>(i), col0 + lv) = 1.0;
        }
    }
}

inline double fe_rss(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
    if (X.cols() == 0) {
        const double ybar = y.mean();
        return (y.array() - ybar).matrix().squaredNorm();
    }
    Eigen::MatrixXd Z(X.rows(), X.cols() + 1);
    Z.col(0).setOnes();
    Z.rightCols(X.cols()) = X;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
    qr.setThreshold(1e-10);
    if (qr.rank() < Z.cols())
        throw NumericError("variance_partition: rank-deficient design (confounded factors)");
    return (y - Z * qr.solve(y)).squaredNorm();
}

} // namespace detail

/// Additive fixed-effects decomposition value ~ mu + country + disease + year,
/// fitted by least squares with sum-to-zero identification. Reports each
/// factor's share of total sum of squares under the sequential (entry order
/// country, disease, year) and marginal (drop-one) conventions. The two agree
/// on balanced designs; on unbalanced designs both are surfaced.
inline VariancePartitionResult variance_partition(const std::vector<FePanelObs>& obs) {
    if (obs.size() < 4) throw NumericError("variance_partition: too few observations");

    std::map<CountryCode, int> c_ix;
    std::map<std::uint8_t, int> d_ix;
    std::map<int, int> y_ix;
    for (const auto& o : obs) {
        c_ix.emplace(o.country, 0);
        d_ix.emplace(o.disease.id(), 0);
        y_ix.emplace(o.year, 0);
    }
    auto enumerate = [](auto& m) {
        int k = 0;
        for (auto& [key, v] : m) v = k++;
    };
    enumerate(c_ix);
    enumerate(d_ix);
    enumerate(y_ix);
    const std::size_t nc = c_ix.size(), nd = d_ix.size(), ny = y_ix.size();
    if (nc < 2 || nd < 2 || ny < 2)
        throw NumericError("variance_partition: each factor needs >= 2 levels");

    const long n = static_cast<long>(obs.size());
    Eigen::VectorXd y(n);
    std::vector<int> lc(obs.size()), ld(obs.size()), ly(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        y[static_cast<long>(i)] = obs[i].value;
        lc[i] = c_ix[obs[i].country];
        ld[i] = d_ix[obs[i].disease.id()];
        ly[i] = y_ix[obs[i].year];
    }

    const long pc = static_cast<long>(nc) - 1, pd = static_cast<long>(nd) - 1,
               py = static_cast<long>(ny) - 1;
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, pc);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, pd);
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, py);
    detail::fill_effect_block(C, 0, lc, nc);
    detail::fill_effect_block(D, 0, ld, nd);
    detail::fill_effect_block(Y, 0, ly, ny);

    auto hcat = [](std::initializer_list<const Eigen::MatrixXd*> parts) {
        long cols = 0, rows = 0;
        for (const auto* p : parts) {
            cols += p->cols();
            rows = p->rows();
        }
        Eigen::MatrixXd out(rows, cols);
        long at = 0;
        for (const auto* p : parts) {
            out.middleCols(at, p->cols()) = *p;
            at += p->cols();
        }
        return out;
    };

    const double tss = detail::fe_rss(y, Eigen::MatrixXd(n, 0));
    if (!(tss > 0)) throw NumericError("variance_partition: response has zero variance");

    const double rss_c = detail::fe_rss(y, C);
    const double rss_cd = detail::fe_rss(y, hcat({&C, &D}));
    const double rss_full = detail::fe_rss(y, hcat({&C, &D, &Y}));
    const double rss_dy = detail::fe_rss(y, hcat({&D, &Y}));
    const double rss_cy = detail::fe_rss(y, hcat({&C, &Y}));

    VariancePartitionResult res;
    res.r2_full = 1.0 - rss_full / tss;

    res.sequential.estimation_variant = "sequential";
    res.sequential.n_obs = obs.size();
    res.sequential.r2_country = (tss - rss_c) / tss;
    res.sequential.r2_disease = (rss_c - rss_cd) / tss;
    res.sequential.r2_year = (rss_cd - rss_full) / tss;
    res.sequential.r2_residual = rss_full / tss;

    res.marginal.estimation_variant = "marginal";
    res.marginal.n_obs = obs.size();
    res.marginal.r2_country = (rss_dy - rss_full) / tss;
    res.marginal.r2_disease = (rss_cy - rss_full) / tss;
    res.marginal.r2_year = (rss_cd - rss_full) / tss;
    res.marginal.r2_residual = rss_full / tss;
    return res;
}

/// Builds FE observations (log-PBR per country-disease-year) from a panel;
/// zero-participation cells are dropped with a count, matching the log-based
/// analysis convention.
struct FeObsResult {
    std::vector<FePanelObs> obs;
    std::size_t dropped_nonpositive = 0;
};

inline FeObsResult fe_observations(const Panel& panel, YearRange period = YearRange::all()) {
    std::map<std::pair<std::uint8_t, int>, Totals> disease_year;
    for (const auto& c : panel.cells()) {
        if (!period.contains(c.year)) continue;
        disease_year[{c.disease.id(), c.year}] += c;
    }
    FeObsResult out;
    for (const auto& c : panel.cells()) {
        if (!period.contains(c.year)) continue;
        const Totals& dy = disease_year[{c.disease.id(), c.year}];
        if (!(dy.participants > 0) || !(c.participants > 0)) {
            ++out.dropped_nonpositive;
            continue;
        }
        const double pbr = (c.participants / dy.participants) / (c.dalys / dy.dalys);
        out.obs.push_back({c.country, c.disease, c.year, std::log(pbr)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Temporal trends

struct TrendEstimate {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
    double p_value = 1;
    double ci_low = 0;
    double ci_high = 0;
};

/// Straight OLS of a metric series on time. Series points are (year, value).
inline TrendEstimate temporal_trend(const std::vector<std::pair<double, double>>& series) {
    if (series.size() < 3) throw NumericError("temporal_trend: need >= 3 time points");
    Eigen::VectorXd y(static_cast<long>(series.size()));
    Eigen::MatrixXd X(static_cast<long>(series.size()), 1);
    for (std::size_t i = 0; i < series.size(); ++i) {
        X(static_cast<long>(i), 0) = series[i].first;
        y[static_cast<long>(i)] = series[i].second;
    }
    const OlsFit fit = ols(y, X, true, {"year"});
    TrendEstimate out;
    out.intercept = fit.coef[0];
    out.slope = fit.coef[1];
    out.r2 = fit.r2;
    out.p_value = fit.p[1];
    out.ci_low = out.ci_high = out.slope;
    return out;
}

/// Trend of a per-bin metric with a cell-level bootstrap: cells are resampled
/// with replacement (duplicates accumulate), the metric is re-derived per bin
/// and the slope refitted. CI is the percentile interval over replicates.
inline TrendEstimate temporal_trend_bootstrap(const Panel& panel, int bin_width,
                                              const std::function<double(const Panel&)>& metric,
                                              std::size_t iterations = 1000, std::uint64_t seed = 0,
                                              unsigned threads = 1) {
    const auto& cells = panel.cells();
    if (cells.empty()) throw NumericError("temporal_trend_bootstrap: empty panel");
    int min_year = cells.front().year;
    for (const auto& c : cells) min_year = std::min(min_year, c.year);

    auto bin_of = [&](int year) { return min_year + ((year - min_year) / bin_width) * bin_width; };

    auto slope_of = [&](const std::vector<std::size_t>& idx) -> double {
        std::map<std::uint64_t, PanelCell> merged;
        for (std::size_t i : idx) {
            const auto& c = cells[i];
            auto [it, inserted] = merged.emplace(detail::cell_key(c.country, c.disease, c.year), c);
            if (!inserted) {
                it->second.participants += c.participants;
                it->second.dalys += c.dalys;
            }
        }
        std::map<int, std::vector<PanelCell>> by_bin;
        for (const auto& [k, c] : merged) by_bin[bin_of(c.year)].push_back(c);

        std::vector<std::pair<double, double>> series;
        for (const auto& [bin, bin_cells] : by_bin) {
            try {
                const Panel sub{std::vector<PanelCell>(bin_cells)};
                series.emplace_back(static_cast<double>(bin), metric(sub));
            } catch (const NumericError&) {
                // bin metric undefined on this resample; skip the point
            } catch (const DataError&) {
            }
        }
        if (series.size() < 3) return std::numeric_limits<double>::quiet_NaN();
        try {
            return temporal_trend(series).slope;
        } catch (const NumericError&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };

    stats::BootstrapSpec spec;
    spec.n_iterations = iterations;
    spec.seed = seed;
    spec.stage = "trend-bootstrap";
    spec.threads = threads;
    const auto boot = stats::bootstrap(cells.size(), slope_of, spec);

    // full point fit for the remaining fields
    std::vector<std::size_t> identity(cells.size());
    for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
    std::map<int, std::vector<PanelCell>> by_bin;
    for (const auto& c : cells) by_bin[bin_of(c.year)].push_back(c);
    std::vector<std::pair<double, double>> series;
    for (const auto& [bin, bin_cells] : by_bin) {
        const Panel sub{std::vector<PanelCell>(bin_cells)};
        series.emplace_back(static_cast<double>(bin), metric(sub));
    }
    TrendEstimate out = temporal_trend(series);
    out.ci_low = boot.ci_low;
    out.ci_high = boot.ci_high;
    return out;
}

} // namespace trialineq
