#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trialineq/error.hpp"
#include "trialineq/ols.hpp"
#include "trialineq/panel.hpp"
#include "trialineq/predictors.hpp"
#include "trialineq/stats.hpp"

namespace trialineq {

/// Participation-to-burden ratio for one country-disease (-year) unit.
/// log_pbr is absent for zero-participation records rather than -inf.
struct PbrRecord {
    CountryCode country;
    DiseaseCategory disease;
    std::optional<int> year; // empty when period-aggregated
    double pbr = 0;
    std::optional<double> log_pbr;
};

namespace detail {

inline std::optional<double> log_of(double pbr) {
    if (pbr > 0) return std::log(pbr);
    return std::nullopt;
}

} // namespace detail

/// Share-of-participants over share-of-burden for one country-disease pair,
/// aggregated over the period. Zero participation yields pbr = 0; a pair with
/// zero burden has no defined ratio and raises.
inline PbrRecord pbr(const Panel& panel, const CountryCode& country, DiseaseCategory disease,
                     YearRange period = YearRange::all()) {
    Totals cell, global_d;
    for (const auto& c : panel.cells()) {
        if (!period.contains(c.year) || !(c.disease == disease)) continue;
        global_d += c;
        if (c.country == country) cell += c;
    }
    if (!(global_d.participants > 0))
        throw NumericError("pbr: disease has zero global participants in period");
    if (!(cell.dalys > 0)) throw NumericError("pbr: country-disease pair has zero burden in period");

    PbrRecord rec;
    rec.country = country;
    rec.disease = disease;
    const double p_share = cell.participants / global_d.participants;
    const double b_share = cell.dalys / global_d.dalys;
    rec.pbr = p_share / b_share;
    rec.log_pbr = detail::log_of(rec.pbr);
    return rec;
}

/// The within-country normalization of the same ratio: disease d's share of
/// country c's participants over d's share of c's burden. The paper treats
/// the two formulations as interchangeable; they are not algebraically
/// identical in general, so this one is exposed under its own name.
inline PbrRecord pbr_within_country(const Panel& panel, const CountryCode& country,
                                    DiseaseCategory disease, YearRange period = YearRange::all()) {
    Totals cell, country_all;
    for (const auto& c : panel.cells()) {
        if (!period.contains(c.year) || !(c.country == country)) continue;
        country_all += c;
        if (c.disease == disease) cell += c;
    }
    if (!(country_all.participants > 0))
        throw NumericError("pbr_within_country: country has zero participants in period");
    if (!(cell.dalys > 0)) throw NumericError("pbr_within_country: pair has zero burden in period");

    PbrRecord rec;
    rec.country = country;
    rec.disease = disease;
    rec.pbr = (cell.participants / country_all.participants) / (cell.dalys / country_all.dalys);
    rec.log_pbr = detail::log_of(rec.pbr);
    return rec;
}

/// Specialization index: country c's portfolio share of disease d relative to
/// the global portfolio share. SI > 1 means the country concentrates effort
/// on d beyond the world average.
inline double specialization_index(const Panel& panel, const CountryCode& country,
                                   DiseaseCategory disease, YearRange period = YearRange::all()) {
    double p_cd = 0, p_c = 0, p_d = 0, p_all = 0;
    for (const auto& c : panel.cells()) {
        if (!period.contains(c.year)) continue;
        p_all += c.participants;
        if (c.country == country) p_c += c.participants;
        if (c.disease == disease) p_d += c.participants;
        if (c.country == country && c.disease == disease) p_cd += c.participants;
    }
    if (!(p_c > 0)) throw NumericError("specialization_index: country has zero participants in period");
    if (!(p_d > 0)) throw NumericError("specialization_index: disease has zero participants in period");
    return (p_cd / p_c) / (p_d / p_all);
}

// ---------------------------------------------------------------------------
// Gini

/// Gini coefficient, standard formulation over ascending-sorted values:
/// sum((2i - n - 1) x_(i)) / (n sum(x)). Result in [0, 1).
inline double gini(std::vector<double> values) {
    if (values.empty()) throw NumericError("gini of empty vector");
    double sum = 0;
    for (double v : values) {
        if (v < 0 || !std::isfinite(v)) throw NumericError("gini: negative or non-finite value");
        sum += v;
    }
    if (!(sum > 0)) throw NumericError("gini: all values zero");
    std::sort(values.begin(), values.end());
    if (values.front() == values.back()) return 0.0; // equality is exactly zero
    const double n = static_cast<double>(values.size());
    double acc = 0;
    for (std::size_t i = 0; i < values.size(); ++i)
        acc += (2.0 * static_cast<double>(i + 1) - n - 1.0) * values[i];
    return acc / (n * sum);
}

/// Weighted Gini via the exact pairwise mean-absolute-difference identity on
/// sorted values (O(n log n)). Equal weights reduce to gini().
inline double weighted_gini(std::vector<double> values, std::vector<double> weights) {
    if (values.size() != weights.size()) throw NumericError("weighted_gini: length mismatch");
    if (values.empty()) throw NumericError("weighted_gini of empty vector");
    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    double total_w = 0, total_wx = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] < 0 || weights[i] < 0) throw NumericError("weighted_gini: negative input");
        total_w += weights[i];
        total_wx += weights[i] * values[i];
    }
    if (!(total_w > 0) || !(total_wx > 0)) throw NumericError("weighted_gini: zero total weight or mass");

    double cum_w = 0, cum_wx = 0, acc = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const double x = values[order[k]], w = weights[order[k]];
        acc += w * (x * cum_w - cum_wx);
        cum_w += w;
        cum_wx += w * x;
    }
    return acc / (total_w * total_wx);
}

// ---------------------------------------------------------------------------
// Pair-level PBR sets

/// One country-disease pair with its period totals and share-normalized PBR.
struct PairPbr {
    CountryCode country;
    DiseaseCategory disease;
    double participants = 0;
    double dalys = 0;
    double pbr = 0;

    std::pair<std::uint32_t, std::uint8_t> key() const { return {country.packed(), disease.id()}; }
};

struct PairPbrSet {
    std::vector<PairPbr> pairs;            // sorted by (country, disease)
    std::size_t excluded_undefined = 0;    // pairs of diseases with zero global participants
    std::size_t zero_participation = 0;    // retained pairs with pbr = 0
};

/// Builds the (country, disease) PBR universe over a period. Zero-participation
/// pairs are retained with pbr = 0; pairs belonging to diseases nobody studies
/// in the period have undefined ratios and are dropped with a count.
inline PairPbrSet pair_pbrs(const Panel& panel, YearRange period = YearRange::all()) {
    std::map<std::pair<CountryCode, std::uint8_t>, Totals> cell;
    std::map<std::uint8_t, Totals> disease_tot;
    for (const auto& c : panel.cells()) {
        if (!period.contains(c.year)) continue;
        cell[{c.country, c.disease.id()}] += c;
        disease_tot[c.disease.id()] += c;
    }

    PairPbrSet out;
    for (const auto& [key, tot] : cell) {
        const Totals& dt = disease_tot[key.second];
        if (!(dt.participants > 0)) {
            ++out.excluded_undefined;
            continue;
        }
        PairPbr p;
        p.country = key.first;
        p.disease = DiseaseCategory(key.second);
        p.participants = tot.participants;
        p.dalys = tot.dalys;
        const double p_share = tot.participants / dt.participants;
        const double b_share = tot.dalys / dt.dalys;
        p.pbr = p_share / b_share;
        if (!(p.pbr > 0)) ++out.zero_participation;
        out.pairs.push_back(p);
    }
    return out;
}

inline std::vector<double> pbr_values(const PairPbrSet& set) {
    std::vector<double> v;
    v.reserve(set.pairs.size());
    for (const auto& p : set.pairs) v.push_back(p.pbr);
    return v;
}

// ---------------------------------------------------------------------------
// Lorenz curve

struct LorenzCurve {
    // (cumulative burden share, cumulative participant share), (0,0) .. (1,1)
    std::vector<std::pair<double, double>> points;
    double gini = 0;         // area-derived coefficient
    double area_between = 0; // area between curve and diagonal
};

/// Lorenz curve of participant share against burden share. Pairs are ordered
/// by their participants/burden ratio — the pair-level PBR under the
/// all-disease (global-totals) normalization, which is the ratio the curve's
/// own axes encode. Only this ordering makes the area between curve and
/// diagonal reproduce the Gini coefficient exactly; ties break by country
/// then disease.
inline LorenzCurve lorenz(const PairPbrSet& set) {
    if (set.pairs.size() < 2) throw NumericError("lorenz: need at least 2 pairs");
    double total_p = 0, total_b = 0;
    for (const auto& p : set.pairs) {
        total_p += p.participants;
        total_b += p.dalys;
    }
    if (!(total_p > 0) || !(total_b > 0)) throw NumericError("lorenz: zero total participants or burden");

    std::vector<const PairPbr*> ordered;
    ordered.reserve(set.pairs.size());
    for (const auto& p : set.pairs) ordered.push_back(&p);
    std::sort(ordered.begin(), ordered.end(), [](const PairPbr* a, const PairPbr* b) {
        const double ra = a->participants / a->dalys, rb = b->participants / b->dalys;
        if (ra != rb) return ra < rb;
        return a->key() < b->key();
    });

    LorenzCurve curve;
    curve.points.reserve(ordered.size() + 1);
    curve.points.emplace_back(0.0, 0.0);
    double cum_b = 0, cum_p = 0, auc2 = 0; // auc2 accumulates 2*area under curve
    double prev_x = 0, prev_y = 0;
    for (const PairPbr* p : ordered) {
        cum_b += p->dalys / total_b;
        cum_p += p->participants / total_p;
        auc2 += (cum_b - prev_x) * (cum_p + prev_y);
        curve.points.emplace_back(cum_b, cum_p);
        prev_x = cum_b;
        prev_y = cum_p;
    }
    // endpoints are exact by construction
    curve.points.back() = {1.0, 1.0};
    curve.gini = 1.0 - auc2;
    curve.area_between = curve.gini / 2.0;
    return curve;
}

// ---------------------------------------------------------------------------
// Contribution-to-inequality score

enum class CisUnit : std::uint8_t { Disease, Country };
enum class CisWeighting : std::uint8_t { Equal, ParticipantWeighted };

struct CisRecord {
    std::string unit_label;
    double cis_percent = 0;
    double ci_low = 0;
    double ci_high = 0;
    CisWeighting weighting = CisWeighting::Equal;
};

namespace detail {

inline double gini_of_pairs(const std::vector<PairPbr>& pairs, CisWeighting weighting) {
    std::vector<double> values;
    values.reserve(pairs.size());
    for (const auto& p : pairs) values.push_back(p.pbr);
    if (weighting == CisWeighting::Equal) return gini(std::move(values));
    std::vector<double> weights;
    weights.reserve(pairs.size());
    for (const auto& p : pairs) weights.push_back(p.participants);
    return weighted_gini(std::move(values), std::move(weights));
}

// CIS of a pair multiset given a drop predicate; 0 when both Ginis are 0
// (all-equal panels) by documented convention.
template <typename DropFn>
double cis_value(const std::vector<PairPbr>& pairs, DropFn&& drop, CisWeighting weighting) {
    std::vector<PairPbr> kept;
    kept.reserve(pairs.size());
    for (const auto& p : pairs)
        if (!drop(p)) kept.push_back(p);
    if (kept.empty()) return std::numeric_limits<double>::quiet_NaN();
    double g_all, g_minus;
    try {
        g_all = gini_of_pairs(pairs, weighting);
        g_minus = gini_of_pairs(kept, weighting);
    } catch (const NumericError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (g_all == 0) return 0.0;
    return (g_all - g_minus) / g_all * 100.0;
}

} // namespace detail

/// Leave-one-out contribution of a unit (disease or country) to the global
/// Gini, in percent; positive means removing the unit reduces inequality.
/// Bootstrap CI resamples country-disease pairs.
template <typename UnitPredicate>
CisRecord cis_for(const PairPbrSet& set, UnitPredicate&& belongs_to_target, std::string label,
                  CisWeighting weighting, const stats::BootstrapSpec& boot) {
    if (set.pairs.size() < 2) throw NumericError("cis: need at least 2 pairs");
    const bool present =
        std::any_of(set.pairs.begin(), set.pairs.end(),
                    [&](const PairPbr& p) { return belongs_to_target(p); });
    if (!present) throw DataError("cis: target '" + label + "' absent from panel");

    CisRecord rec;
    rec.unit_label = std::move(label);
    rec.weighting = weighting;
    rec.cis_percent = detail::cis_value(set.pairs, belongs_to_target, weighting);
    if (std::isnan(rec.cis_percent)) throw NumericError("cis: undefined on full data");

    auto statistic = [&](const std::vector<std::size_t>& idx) {
        std::vector<PairPbr> resampled;
        resampled.reserve(idx.size());
        for (std::size_t i : idx) resampled.push_back(set.pairs[i]);
        return detail::cis_value(resampled, belongs_to_target, weighting);
    };
    const auto b = stats::bootstrap(set.pairs.size(), statistic, boot);
    rec.ci_low = b.ci_low;
    rec.ci_high = b.ci_high;
    return rec;
}

inline CisRecord cis(const PairPbrSet& set, DiseaseCategory target,
                     CisWeighting weighting = CisWeighting::Equal,
                     stats::BootstrapSpec boot = {}) {
    boot.stage = "cis-bootstrap";
    return cis_for(
        set, [target](const PairPbr& p) { return p.disease == target; },
        std::string(target.name()), weighting, boot);
}

inline CisRecord cis(const PairPbrSet& set, const CountryCode& target,
                     CisWeighting weighting = CisWeighting::Equal,
                     stats::BootstrapSpec boot = {}) {
    boot.stage = "cis-bootstrap";
    return cis_for(
        set, [target](const PairPbr& p) { return p.country == target; }, target.str(), weighting,
        boot);
}

/// Point CIS for every unit along one axis, no bootstrap. Used for ranking.
inline std::vector<std::pair<std::string, double>> cis_all_units(const PairPbrSet& set, CisUnit unit,
                                                                 CisWeighting weighting = CisWeighting::Equal) {
    std::map<std::string, bool> labels;
    for (const auto& p : set.pairs)
        labels[unit == CisUnit::Disease ? std::string(p.disease.name()) : p.country.str()] = true;
    std::vector<std::pair<std::string, double>> out;
    for (const auto& [label, _] : labels) {
        const double v = detail::cis_value(
            set.pairs,
            [&](const PairPbr& p) {
                return (unit == CisUnit::Disease ? std::string(p.disease.name()) : p.country.str()) == label;
            },
            weighting);
        out.emplace_back(label, v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Leave-out analysis

enum class LeaveOutRanking : std::uint8_t { Cis, ParticipantVolume };

struct LeaveOutResult {
    double gini_before = 0;
    double gini_after = 0;
    std::vector<std::string> excluded;
};

/// Removes the top fraction of units (diseases or countries) under the given
/// ranking and reports the global Gini before and after.
inline LeaveOutResult leave_out_gini(const PairPbrSet& set, CisUnit unit, LeaveOutRanking ranking,
                                     double top_fraction,
                                     CisWeighting weighting = CisWeighting::Equal) {
    if (!(top_fraction > 0 && top_fraction < 1))
        throw ConfigError("leave_out_gini: top_fraction must be in (0, 1)");

    std::vector<std::pair<std::string, double>> scored;
    if (ranking == LeaveOutRanking::Cis) {
        scored = cis_all_units(set, unit, weighting);
    } else {
        std::map<std::string, double> volume;
        for (const auto& p : set.pairs)
            volume[unit == CisUnit::Disease ? std::string(p.disease.name()) : p.country.str()] +=
                p.participants;
        scored.assign(volume.begin(), volume.end());
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    const std::size_t k = static_cast<std::size_t>(top_fraction * static_cast<double>(scored.size()) + 1e-9);
    LeaveOutResult out;
    for (std::size_t i = 0; i < k && i < scored.size(); ++i) out.excluded.push_back(scored[i].first);

    std::vector<PairPbr> kept;
    for (const auto& p : set.pairs) {
        const std::string label = unit == CisUnit::Disease ? std::string(p.disease.name()) : p.country.str();
        if (std::find(out.excluded.begin(), out.excluded.end(), label) == out.excluded.end())
            kept.push_back(p);
    }
    if (kept.empty()) throw NumericError("leave_out_gini: exclusion empties the panel");
    out.gini_before = detail::gini_of_pairs(set.pairs, weighting);
    out.gini_after = detail::gini_of_pairs(kept, weighting);
    return out;
}

// ---------------------------------------------------------------------------
// Burden-participation alignment regression

struct AlignmentResult {
    double beta = 0;   // slope of log participants on log DALYs
    double p_value = 1;
    std::size_t n = 0; // country-disease pairs used
};

/// Within one income group, regresses log average-annual participants on log
/// average-annual DALYs across country-disease pairs (positive totals only).
inline AlignmentResult alignment_regression(const Panel& panel, const PredictorTable& predictors,
                                            IncomeGroup group, YearRange period = YearRange::all()) {
    std::map<std::pair<CountryCode, std::uint8_t>, Totals> cell;
    std::map<int, bool> years;
    for (const auto& c : panel.cells()) {
        if (!period.contains(c.year)) continue;
        cell[{c.country, c.disease.id()}] += c;
        years[c.year] = true;
    }
    const double n_years = std::max<std::size_t>(years.size(), 1);

    std::vector<double> x, y;
    for (const auto& [key, tot] : cell) {
        const auto row = predictors.row_of(key.first);
        if (!row || predictors.income_group(*row) != group) continue;
        if (!(tot.participants > 0) || !(tot.dalys > 0)) continue;
        x.push_back(std::log(tot.dalys / n_years));
        y.push_back(std::log(tot.participants / n_years));
    }
    if (x.size() < 3) throw NumericError("alignment_regression: fewer than 3 usable pairs in group");

    Eigen::VectorXd yv = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<long>(y.size()));
    Eigen::MatrixXd X(static_cast<long>(x.size()), 1);
    for (std::size_t i = 0; i < x.size(); ++i) X(static_cast<long>(i), 0) = x[i];

    const OlsFit fit = ols(yv, X, true, {"log_dalys"});
    AlignmentResult out;
    out.beta = fit.coef[1];
    out.p_value = fit.p[1];
    out.n = x.size();
    return out;
}

} // namespace trialineq
