#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "trialineq/error.hpp"
#include "trialineq/ols.hpp"
#include "trialineq/predictors.hpp"
#include "trialineq/rng.hpp"
#include "trialineq/stats.hpp"

namespace trialineq {

/// Dense matrix of the named predictor columns, in the table's row order.
/// Missing values are a hard error here: impute first.
inline Eigen::MatrixXd predictor_matrix(const PredictorTable& table, const std::vector<std::string>& fields) {
    Eigen::MatrixXd X(static_cast<long>(table.n_rows()), static_cast<long>(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
        const auto& col = table.values(fields[j]);
        for (std::size_t i = 0; i < col.size(); ++i) {
            if (std::isnan(col[i]))
                throw NumericError("predictor '" + fields[j] + "' has missing values; impute before analysis");
            X(static_cast<long>(i), static_cast<long>(j)) = col[i];
        }
    }
    return X;
}

/// Block members minus anything the table has flagged for exclusion.
inline std::vector<std::string> usable_members(const BlockSpec& block, const PredictorTable& table) {
    std::vector<std::string> out;
    for (const auto& m : block.members)
        if (!table.is_excluded(m)) out.push_back(m);
    return out;
}

// ---------------------------------------------------------------------------
// Hierarchical (sequential) block partition

struct BlockR2 {
    std::string name;
    std::size_t n_vars = 0;
    double incremental = 0;
    double cumulative = 0;
};

/// Sequential nested OLS over the block order given. Incremental R-squared is
/// the gain of each block beyond everything entered before it.
inline std::vector<BlockR2> hierarchical_partition(const Eigen::VectorXd& y, const PredictorTable& table,
                                                   const std::vector<BlockSpec>& blocks) {
    validate_blocks(blocks, table);
    if (y.size() != static_cast<long>(table.n_rows()))
        throw NumericError("hierarchical_partition: response length mismatch");

    std::vector<BlockR2> out;
    std::vector<std::string> entered;
    double prev_r2 = 0;
    for (const auto& block : blocks) {
        const auto members = usable_members(block, table);
        BlockR2 row;
        row.name = block.name;
        row.n_vars = members.size();
        if (members.empty()) {
            row.incremental = 0;
            row.cumulative = prev_r2;
            out.push_back(std::move(row));
            continue;
        }
        entered.insert(entered.end(), members.begin(), members.end());
        const double r2 = ols_r2(y, predictor_matrix(table, entered), true);
        row.cumulative = r2;
        row.incremental = r2 - prev_r2;
        prev_r2 = r2;
        out.push_back(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shapley R-squared decomposition

struct ShapleyOptions {
    std::size_t n_permutations = 100;      // 0 = exhaustive enumeration
    std::size_t n_bootstrap = 100;         // 0 = no confidence intervals
    std::size_t bootstrap_permutations = 50;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct ShapleyEntry {
    std::string predictor;
    double mean_phi = 0;  // average marginal R-squared gain
    double mean_pct = 0;  // share of full-model R-squared, percent
    double ci_low = 0;
    double ci_high = 0;
};

struct ShapleyResult {
    std::vector<ShapleyEntry> predictors;
    std::vector<std::pair<std::string, double>> block_totals; // exact sums of member percentages
    double r2_full = 0;
    std::size_t n_permutations = 0;
    std::size_t n_bootstrap = 0;
    std::size_t bootstrap_skipped = 0;
};

namespace detail {

// R-squared of a predictor subset identified by bitmask, memoized.
class SubsetR2 {
  public:
    SubsetR2(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) : y_(y), X_(X) {}

    double operator()(std::uint32_t mask) {
        auto it = cache_.find(mask);
        if (it != cache_.end()) return it->second;
        Eigen::MatrixXd sub(X_.rows(), static_cast<long>(std::popcount(mask)));
        long at = 0;
        for (long j = 0; j < X_.cols(); ++j)
            if (mask & (1u << j)) sub.col(at++) = X_.col(j);
        const double r2 = ols_r2(y_, sub, true);
        cache_.emplace(mask, r2);
        return r2;
    }

  private:
    const Eigen::VectorXd& y_;
    const Eigen::MatrixXd& X_;
    std::unordered_map<std::uint32_t, double> cache_;
};

// Mean marginal gains, either over sampled orderings or the exact subset sum.
// Negative gains (suppression) are averaged as-is; clamping would break the
// efficiency identity.
inline std::vector<double> shapley_phis(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                        std::size_t n_permutations, RngStream& stream) {
    const std::size_t p = static_cast<std::size_t>(X.cols());
    SubsetR2 r2(y, X);
    std::vector<double> phi(p, 0.0);

    if (n_permutations == 0) {
        if (p > 12) throw NumericError("exhaustive Shapley limited to 12 predictors");
        // phi_i = sum over subsets S not containing i of w(|S|) [R2(S+i) - R2(S)]
        // with w(s) = s!(p-1-s)!/p!
        std::vector<double> weight(p);
        for (std::size_t s = 0; s < p; ++s) {
            double w = 1.0;
            for (std::size_t t = 1; t <= s; ++t) w *= static_cast<double>(t) / static_cast<double>(p - t);
            weight[s] = w / static_cast<double>(p);
        }
        const std::uint32_t full = (p == 32) ? ~0u : ((1u << p) - 1u);
        for (std::uint32_t mask = 0; mask <= full; ++mask) {
            const auto s = static_cast<std::size_t>(std::popcount(mask));
            if (s == p) continue;
            const double base = r2(mask);
            for (std::size_t i = 0; i < p; ++i) {
                if (mask & (1u << i)) continue;
                phi[i] += weight[s] * (r2(mask | (1u << i)) - base);
            }
        }
        return phi;
    }

    std::vector<std::size_t> order(p);
    for (std::size_t perm = 0; perm < n_permutations; ++perm) {
        for (std::size_t i = 0; i < p; ++i) order[i] = i;
        stream.shuffle(order);
        std::uint32_t mask = 0;
        double prev = 0.0;
        for (std::size_t i : order) {
            mask |= (1u << i);
            const double cur = r2(mask);
            phi[i] += cur - prev;
            prev = cur;
        }
    }
    for (double& v : phi) v /= static_cast<double>(n_permutations);
    return phi;
}

} // namespace detail

/// Permutation-approximated Shapley decomposition of explained variance.
/// Each predictor's phi is its marginal R-squared gain averaged over sampled
/// orderings (or all orderings when n_permutations is 0), reported as a
/// percentage of the full-model R-squared. Bootstrap CIs resample rows
/// (countries) with replacement, re-running the decomposition with the
/// reduced permutation budget.
inline ShapleyResult shapley_r2(const Eigen::VectorXd& y, const PredictorTable& table,
                                const std::vector<std::string>& predictors, const ShapleyOptions& opt = {},
                                const std::vector<BlockSpec>& blocks = {}) {
    if (predictors.empty()) throw NumericError("shapley_r2: no predictors");
    if (predictors.size() > 31) throw NumericError("shapley_r2: too many predictors");
    const Eigen::MatrixXd X = predictor_matrix(table, predictors);
    if (y.size() != X.rows()) throw NumericError("shapley_r2: response length mismatch");
    if (y.size() <= static_cast<long>(predictors.size()) + 1)
        throw NumericError("shapley_r2: n too small for predictor count");

    const double r2_full = ols_r2(y, X, true);
    if (!(r2_full > 0)) throw NumericError("shapley_r2: full-model R-squared is zero");

    RngStream stream(opt.seed, "shapley-perm");
    const auto phi = detail::shapley_phis(y, X, opt.n_permutations, stream);

    ShapleyResult result;
    result.r2_full = r2_full;
    result.n_permutations = opt.n_permutations;
    result.n_bootstrap = opt.n_bootstrap;
    result.predictors.resize(predictors.size());
    for (std::size_t i = 0; i < predictors.size(); ++i) {
        result.predictors[i].predictor = predictors[i];
        result.predictors[i].mean_phi = phi[i];
        result.predictors[i].mean_pct = phi[i] / r2_full * 100.0;
    }

    if (opt.n_bootstrap > 0) {
        const std::size_t n = static_cast<std::size_t>(y.size());
        std::vector<std::vector<double>> pct_reps(opt.n_bootstrap);
        stats::parallel_for(opt.n_bootstrap, opt.threads, [&](std::size_t it) {
            RngStream bs(opt.seed, "shapley-bootstrap", it);
            const auto idx = bs.resample_indices(n);
            Eigen::VectorXd yb(static_cast<long>(n));
            Eigen::MatrixXd Xb(static_cast<long>(n), X.cols());
            for (std::size_t i = 0; i < n; ++i) {
                yb[static_cast<long>(i)] = y[static_cast<long>(idx[i])];
                Xb.row(static_cast<long>(i)) = X.row(static_cast<long>(idx[i]));
            }
            try {
                const double r2b = ols_r2(yb, Xb, true);
                if (!(r2b > 0)) return; // leave empty -> skipped
                const auto phib = detail::shapley_phis(yb, Xb, opt.bootstrap_permutations, bs);
                auto& rep = pct_reps[it];
                rep.resize(phib.size());
                for (std::size_t i = 0; i < phib.size(); ++i) rep[i] = phib[i] / r2b * 100.0;
            } catch (const NumericError&) {
                // degenerate resample (rank loss); skipped
            }
        });

        for (std::size_t i = 0; i < predictors.size(); ++i) {
            std::vector<double> shares;
            for (const auto& rep : pct_reps)
                if (!rep.empty()) shares.push_back(rep[i]);
            if (shares.empty()) throw NumericError("shapley_r2: every bootstrap resample degenerate");
            result.predictors[i].ci_low = stats::percentile(shares, 2.5);
            result.predictors[i].ci_high = stats::percentile(shares, 97.5);
        }
        for (const auto& rep : pct_reps)
            if (rep.empty()) ++result.bootstrap_skipped;
    }

    if (!blocks.empty()) {
        for (const auto& block : blocks) {
            double total = 0;
            for (const auto& e : result.predictors)
                if (std::find(block.members.begin(), block.members.end(), e.predictor) != block.members.end())
                    total += e.mean_pct;
            result.block_totals.emplace_back(block.name, total);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Part-2 residualization

struct ResidualRecord {
    CountryCode country;
    double residual = 0; // log-PBR minus structural prediction
};

struct ResidualizeResult {
    std::vector<ResidualRecord> records;
    OlsFit fit;
    double residual_variance_share = 0; // fraction of original variance left
};

/// Strips the structural baseline: OLS of national log-PBR on log GDP and log
/// population, returning per-country residuals and the share of variance they
/// retain.
inline ResidualizeResult residualize_part2(const Eigen::VectorXd& log_pbr, const PredictorTable& table,
                                           const std::string& gdp_field = "log_gdp",
                                           const std::string& pop_field = "log_population") {
    if (log_pbr.size() != static_cast<long>(table.n_rows()))
        throw NumericError("residualize_part2: response length mismatch");
    const Eigen::MatrixXd X = predictor_matrix(table, {gdp_field, pop_field});

    ResidualizeResult out;
    out.fit = ols(log_pbr, X, true, {gdp_field, pop_field});
    out.residual_variance_share = out.fit.tss > 0 ? out.fit.rss / out.fit.tss : 0.0;
    out.records.resize(table.n_rows());
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        out.records[i].country = table.countries()[i];
        out.records[i].residual = out.fit.residuals[static_cast<long>(i)];
    }
    return out;
}

} // namespace trialineq
