#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "trialineq/attribution.hpp"
#include "trialineq/error.hpp"
#include "trialineq/metrics.hpp"
#include "trialineq/ols.hpp"
#include "trialineq/predictors.hpp"

namespace trialineq {

enum class PerformanceStatus : std::uint8_t { OverPerforming, AsExpected, UnderPerforming, Unclassified };

/// Fixed tie-break ordering: ResearchInvestment, Governance,
/// HealthInfrastructure, MultipleFactors.
enum class LimitingFactor : std::uint8_t {
    ResearchInvestment,
    Governance,
    HealthInfrastructure,
    MultipleFactors,
    Unassigned
};

inline std::string_view status_name(PerformanceStatus s) {
    switch (s) {
        case PerformanceStatus::OverPerforming: return "OverPerforming";
        case PerformanceStatus::AsExpected: return "AsExpected";
        case PerformanceStatus::UnderPerforming: return "UnderPerforming";
        case PerformanceStatus::Unclassified: return "Unclassified";
    }
    return "?";
}

inline std::string_view factor_name(LimitingFactor f) {
    switch (f) {
        case LimitingFactor::ResearchInvestment: return "ResearchInvestment";
        case LimitingFactor::Governance: return "Governance";
        case LimitingFactor::HealthInfrastructure: return "HealthInfrastructure";
        case LimitingFactor::MultipleFactors: return "MultipleFactors";
        case LimitingFactor::Unassigned: return "Unassigned";
    }
    return "?";
}

/// Maps a block label to its factor by keyword ("research" / "governance" /
/// "health"); block configs are free to use the paper's underscored names.
inline LimitingFactor factor_from_block_name(std::string_view name) {
    std::string lower;
    for (char c : name) lower += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    if (lower.find("research") != std::string::npos) return LimitingFactor::ResearchInvestment;
    if (lower.find("governance") != std::string::npos || lower.find("social") != std::string::npos)
        return LimitingFactor::Governance;
    if (lower.find("health") != std::string::npos) return LimitingFactor::HealthInfrastructure;
    return LimitingFactor::Unassigned;
}

struct PairResidual {
    CountryCode country;
    DiseaseCategory disease;
    double residual = 0;
};

struct ClassifiedPair {
    CountryCode country;
    DiseaseCategory disease;
    double residual = 0;
    PerformanceStatus status = PerformanceStatus::Unclassified;
    LimitingFactor factor = LimitingFactor::Unassigned;
    double cis_contribution = 0;
};

struct ClassificationThresholds {
    double over = 0.5;  // residual above this: over-performing
    double band = 0.3;  // |residual| below this: as expected; below -band: under
};

/// Residual-threshold classification. Residuals falling in the gap between
/// the as-expected band and the over-performing cut (and exactly on the lower
/// band edge) are reported as Unclassified rather than folded into a class,
/// so the statuses always partition the input.
inline std::vector<ClassifiedPair> classify(const std::vector<PairResidual>& residuals,
                                            const ClassificationThresholds& t = {}) {
    if (!(t.over >= t.band && t.band > 0))
        throw ConfigError("classify: thresholds must satisfy over >= band > 0");
    std::vector<ClassifiedPair> out;
    out.reserve(residuals.size());
    for (const auto& r : residuals) {
        ClassifiedPair c;
        c.country = r.country;
        c.disease = r.disease;
        c.residual = r.residual;
        if (r.residual > t.over) c.status = PerformanceStatus::OverPerforming;
        else if (r.residual < -t.band) c.status = PerformanceStatus::UnderPerforming;
        else if (std::abs(r.residual) < t.band) c.status = PerformanceStatus::AsExpected;
        else c.status = PerformanceStatus::Unclassified;
        out.push_back(c);
    }
    return out;
}

struct ClassificationCounts {
    std::size_t over = 0, as_expected = 0, under = 0, unclassified = 0;
};

inline ClassificationCounts count_statuses(const std::vector<ClassifiedPair>& pairs) {
    ClassificationCounts c;
    for (const auto& p : pairs) {
        switch (p.status) {
            case PerformanceStatus::OverPerforming: ++c.over; break;
            case PerformanceStatus::AsExpected: ++c.as_expected; break;
            case PerformanceStatus::UnderPerforming: ++c.under; break;
            case PerformanceStatus::Unclassified: ++c.unclassified; break;
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// Limiting-factor diagnosis from a disease-specific regression

struct BlockScore {
    std::string block;
    double mean_abs_beta = 0; // over significant members only
    std::size_t n_significant = 0;
};

struct BlockDiagnosis {
    std::vector<BlockScore> scores;
    std::string winning_block;
    bool multiple_factors = false;
    LimitingFactor factor = LimitingFactor::Unassigned;
};

/// Per block, the mean absolute coefficient among members significant at the
/// given level; the block with the largest mean wins. Two or more blocks
/// within the multi threshold of the max mean MultipleFactors; no significant
/// predictor anywhere means Unassigned.
inline BlockDiagnosis limiting_factor(const OlsFit& fit, const std::vector<BlockSpec>& blocks,
                                      double significance = 0.1, double multi_threshold = 0.7) {
    BlockDiagnosis out;
    for (const auto& block : blocks) {
        BlockScore s;
        s.block = block.name;
        double sum = 0;
        for (const auto& member : block.members) {
            for (std::size_t j = 0; j < fit.names.size(); ++j) {
                if (fit.names[j] != member) continue;
                if (fit.p[static_cast<long>(j)] < significance) {
                    sum += std::abs(fit.coef[static_cast<long>(j)]);
                    ++s.n_significant;
                }
            }
        }
        s.mean_abs_beta = s.n_significant > 0 ? sum / static_cast<double>(s.n_significant) : 0.0;
        out.scores.push_back(std::move(s));
    }

    double best = 0;
    for (const auto& s : out.scores) {
        if (s.mean_abs_beta > best) {
            best = s.mean_abs_beta;
            out.winning_block = s.block;
        }
    }
    if (best == 0) {
        out.factor = LimitingFactor::Unassigned;
        return out;
    }
    std::size_t strong = 0;
    for (const auto& s : out.scores)
        if (s.mean_abs_beta > multi_threshold * best) ++strong;
    out.multiple_factors = strong >= 2;
    out.factor = out.multiple_factors ? LimitingFactor::MultipleFactors
                                      : factor_from_block_name(out.winning_block);
    return out;
}

// ---------------------------------------------------------------------------
// Disease-specific regressions

struct DiseaseDiagnosis {
    DiseaseCategory disease;
    OlsFit fit;
    BlockDiagnosis diagnosis;
    std::vector<PairResidual> residuals;
};

struct DiseaseRegressionResult {
    std::vector<DiseaseDiagnosis> diagnoses;
    std::vector<std::string> skipped; // diseases with too few usable countries
};

/// Regresses log-PBR on the standardized structural predictors disease by
/// disease; residuals feed classify(), coefficients feed limiting_factor().
/// Zero-participation pairs have no log-PBR and are skipped.
inline DiseaseRegressionResult disease_regressions(const PairPbrSet& pairs, const PredictorTable& table,
                                                   const std::vector<std::string>& predictor_fields,
                                                   const std::vector<BlockSpec>& blocks,
                                                   double significance = 0.1, double multi_threshold = 0.7) {
    std::map<std::uint8_t, std::vector<const PairPbr*>> by_disease;
    for (const auto& p : pairs.pairs)
        if (p.pbr > 0) by_disease[p.disease.id()].push_back(&p);

    DiseaseRegressionResult out;
    for (const auto& [did, rows] : by_disease) {
        const DiseaseCategory disease{did};
        std::vector<std::size_t> table_rows;
        std::vector<const PairPbr*> used;
        for (const PairPbr* p : rows) {
            if (auto r = table.row_of(p->country)) {
                table_rows.push_back(*r);
                used.push_back(p);
            }
        }
        if (used.size() <= predictor_fields.size() + 1) {
            out.skipped.push_back(std::string(disease.name()));
            continue;
        }
        Eigen::VectorXd y(static_cast<long>(used.size()));
        Eigen::MatrixXd X(static_cast<long>(used.size()), static_cast<long>(predictor_fields.size()));
        const Eigen::MatrixXd full = predictor_matrix(table, predictor_fields);
        for (std::size_t i = 0; i < used.size(); ++i) {
            y[static_cast<long>(i)] = std::log(used[i]->pbr);
            X.row(static_cast<long>(i)) = full.row(static_cast<long>(table_rows[i]));
        }

        DiseaseDiagnosis diag;
        diag.disease = disease;
        try {
            diag.fit = ols(y, X, true, predictor_fields);
        } catch (const NumericError&) {
            out.skipped.push_back(std::string(disease.name()));
            continue;
        }
        diag.diagnosis = limiting_factor(diag.fit, blocks, significance, multi_threshold);
        for (std::size_t i = 0; i < used.size(); ++i)
            diag.residuals.push_back(
                {used[i]->country, disease, diag.fit.residuals[static_cast<long>(i)]});
        out.diagnoses.push_back(std::move(diag));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Factor assignment passes

namespace detail {

inline constexpr LimitingFactor factor_tie_order[] = {
    LimitingFactor::ResearchInvestment,
    LimitingFactor::Governance,
    LimitingFactor::HealthInfrastructure,
    LimitingFactor::MultipleFactors,
};

inline std::optional<LimitingFactor> modal_factor(const std::map<LimitingFactor, std::size_t>& counts) {
    std::size_t best = 0;
    for (const auto& [f, n] : counts) best = std::max(best, n);
    if (best == 0) return std::nullopt;
    for (LimitingFactor f : factor_tie_order) {
        auto it = counts.find(f);
        if (it != counts.end() && it->second == best) return f;
    }
    return std::nullopt;
}

} // namespace detail

/// Copies each under-performing pair's factor from its disease's block
/// diagnosis.
inline void assign_factor_underperforming(std::vector<ClassifiedPair>& pairs,
                                          const std::vector<DiseaseDiagnosis>& diagnoses) {
    std::map<std::uint8_t, LimitingFactor> by_disease;
    for (const auto& d : diagnoses) by_disease[d.disease.id()] = d.diagnosis.factor;
    for (auto& p : pairs) {
        if (p.status != PerformanceStatus::UnderPerforming) continue;
        auto it = by_disease.find(p.disease.id());
        if (it != by_disease.end()) p.factor = it->second;
    }
}

/// Hierarchical matching against the under-performing factor patterns: modal
/// limiting factor of the same disease's under-performers, then the same
/// country's, then the global mode. Ties break by the fixed factor ordering.
inline void assign_factor_matching(std::vector<ClassifiedPair>& pairs, PerformanceStatus target) {
    std::map<std::uint8_t, std::map<LimitingFactor, std::size_t>> by_disease;
    std::map<CountryCode, std::map<LimitingFactor, std::size_t>> by_country;
    std::map<LimitingFactor, std::size_t> global;
    for (const auto& p : pairs) {
        if (p.status != PerformanceStatus::UnderPerforming || p.factor == LimitingFactor::Unassigned)
            continue;
        ++by_disease[p.disease.id()][p.factor];
        ++by_country[p.country][p.factor];
        ++global[p.factor];
    }
    if (global.empty())
        throw DataError("assign_factor_matching: no under-performing pairs to match against");

    for (auto& p : pairs) {
        if (p.status != target) continue;
        if (auto f = detail::modal_factor(by_disease[p.disease.id()])) p.factor = *f;
        else if (auto fc = detail::modal_factor(by_country[p.country])) p.factor = *fc;
        else p.factor = *detail::modal_factor(global);
    }
}

inline void assign_factor_overperforming(std::vector<ClassifiedPair>& pairs) {
    assign_factor_matching(pairs, PerformanceStatus::OverPerforming);
}

/// Normalized structural components for one pair; the data columns are inputs
/// (the toolkit does not derive them).
struct ComponentRecord {
    CountryCode country;
    DiseaseCategory disease;
    double authorship = 0;
    double burden = 0;
    double recruitment = 0;
};

/// Component-to-factor mapping for as-expected pairs; configurable because
/// the assignment is an interpretation, and logged in pipeline output.
struct ComponentMapping {
    LimitingFactor authorship = LimitingFactor::ResearchInvestment;
    LimitingFactor burden = LimitingFactor::Governance;
    LimitingFactor recruitment = LimitingFactor::HealthInfrastructure;
};

struct AsExpectedAssignment {
    std::size_t assigned = 0;
    std::size_t ties = 0; // pairs where equal components fell back to fixed order
};

/// As-expected pairs take the factor of their largest component, each
/// component first normalized by its maximum across pairs. Exact ties go to
/// the first component in (authorship, burden, recruitment) order and are
/// counted.
inline AsExpectedAssignment assign_factor_as_expected(std::vector<ClassifiedPair>& pairs,
                                                      const std::vector<ComponentRecord>& components,
                                                      const ComponentMapping& mapping = {}) {
    double max_a = 0, max_b = 0, max_r = 0;
    for (const auto& c : components) {
        if (c.authorship < 0 || c.burden < 0 || c.recruitment < 0)
            throw DataError("assign_factor_as_expected: negative component");
        max_a = std::max(max_a, c.authorship);
        max_b = std::max(max_b, c.burden);
        max_r = std::max(max_r, c.recruitment);
    }
    std::map<std::pair<std::uint32_t, std::uint8_t>, const ComponentRecord*> index;
    for (const auto& c : components) index[{c.country.packed(), c.disease.id()}] = &c;

    AsExpectedAssignment out;
    for (auto& p : pairs) {
        if (p.status != PerformanceStatus::AsExpected) continue;
        auto it = index.find({p.country.packed(), p.disease.id()});
        if (it == index.end()) continue;
        const ComponentRecord& c = *it->second;
        const double na = max_a > 0 ? c.authorship / max_a : 0;
        const double nb = max_b > 0 ? c.burden / max_b : 0;
        const double nr = max_r > 0 ? c.recruitment / max_r : 0;
        if (na == 0 && nb == 0 && nr == 0)
            throw DataError("assign_factor_as_expected: all components zero for " + p.country.str());
        const double best = std::max({na, nb, nr});
        if ((na == best) + (nb == best) + (nr == best) > 1) ++out.ties;
        if (na == best) p.factor = mapping.authorship;
        else if (nb == best) p.factor = mapping.burden;
        else p.factor = mapping.recruitment;
        ++out.assigned;
    }
    return out;
}

} // namespace trialineq
