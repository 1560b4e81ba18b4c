#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "trialineq/error.hpp"
#include "trialineq/rng.hpp"

namespace trialineq::stats {

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw NumericError("mean of empty vector");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
    if (v.size() < 2) throw NumericError("sample variance needs n >= 2");
    const double m = mean(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
}

inline double population_sd(const std::vector<double>& v) {
    const double m = mean(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw NumericError("median of empty vector");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Linear-interpolation percentile (the numpy default). p in [0, 100].
inline double percentile(std::vector<double> v, double p) {
    if (v.empty()) throw NumericError("percentile of empty vector");
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    const double pos = (p / 100.0) * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

inline double student_t_two_sided_p(double t, double df) {
    if (df <= 0) return std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(t)) return 0.0;
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

inline double chi_squared_upper_p(double x, double df) {
    if (df <= 0) return std::numeric_limits<double>::quiet_NaN();
    if (x <= 0) return 1.0;
    boost::math::chi_squared dist(df);
    return boost::math::cdf(boost::math::complement(dist, x));
}

// ---------------------------------------------------------------------------
// Deterministic task parallelism: iteration i always runs the same work on
// the same substream regardless of thread count, and writes only slot i.

inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Bootstrap engine

enum class ResampleUnit { Observation, Pair, Country };

struct BootstrapSpec {
    std::size_t n_iterations = 1000;
    ResampleUnit unit = ResampleUnit::Observation;
    double percentile_low = 2.5;
    double percentile_high = 97.5;
    std::uint64_t seed = 0;
    std::string stage = "bootstrap"; // substream label
    unsigned threads = 1;

    void validate() const {
        if (n_iterations < 1) throw ConfigError("bootstrap iterations must be >= 1");
        if (!(percentile_low > 0 && percentile_high < 100 && percentile_low < percentile_high))
            throw ConfigError("bootstrap percentiles must satisfy 0 < low < high < 100");
    }
};

struct BootstrapResult {
    double point = 0;
    double ci_low = 0;
    double ci_high = 0;
    std::vector<double> replicates; // retained for paired tests
    std::size_t skipped = 0;        // resamples where the statistic was undefined (NaN)
};

/// Percentile bootstrap over n exchangeable units. The statistic receives a
/// with-replacement index resample; returning NaN skips that replicate. More
/// than 10% skipped replicates is a failure.
inline BootstrapResult bootstrap(std::size_t n_units,
                                 const std::function<double(const std::vector<std::size_t>&)>& statistic,
                                 const BootstrapSpec& spec) {
    spec.validate();
    if (n_units == 0) throw NumericError("bootstrap over zero units");

    std::vector<std::size_t> identity(n_units);
    std::iota(identity.begin(), identity.end(), std::size_t{0});

    BootstrapResult result;
    result.point = statistic(identity);

    std::vector<double> raw(spec.n_iterations, std::numeric_limits<double>::quiet_NaN());
    parallel_for(spec.n_iterations, spec.threads, [&](std::size_t i) {
        RngStream stream(spec.seed, spec.stage, i);
        raw[i] = statistic(stream.resample_indices(n_units));
    });

    for (double v : raw) {
        if (std::isnan(v)) ++result.skipped;
        else result.replicates.push_back(v);
    }
    if (result.skipped * 10 > spec.n_iterations)
        throw NumericError("bootstrap: statistic undefined on more than 10% of resamples");
    result.ci_low = percentile(result.replicates, spec.percentile_low);
    result.ci_high = percentile(result.replicates, spec.percentile_high);
    return result;
}

// ---------------------------------------------------------------------------
// Permutation test

namespace detail {

inline double binom(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    double r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

} // namespace detail

/// Two-sided two-sample permutation test on an arbitrary statistic of
/// (group_a, group_b). When the permutation budget covers the full
/// combination space the test enumerates it exactly (no smoothing);
/// otherwise Monte Carlo sampling with +1 smoothing is used.
inline double permutation_test(
    const std::vector<double>& a, const std::vector<double>& b,
    const std::function<double(const std::vector<double>&, const std::vector<double>&)>& statistic,
    std::size_t n_perm = 10000, std::uint64_t seed = 0, unsigned threads = 1) {
    if (a.empty() || b.empty()) throw NumericError("permutation test needs non-empty groups");

    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    const bool degenerate =
        std::all_of(pooled.begin(), pooled.end(), [&](double v) { return v == pooled.front(); });
    if (degenerate) return 1.0;

    const double observed = std::abs(statistic(a, b));
    const std::size_t n = pooled.size(), na = a.size();
    constexpr double eps = 1e-12;

    const double total = detail::binom(n, na);
    if (total <= static_cast<double>(n_perm)) {
        // exact enumeration of all assignments of na pooled values to group A
        std::vector<std::size_t> comb(na);
        std::iota(comb.begin(), comb.end(), std::size_t{0});
        std::size_t hits = 0, count = 0;
        std::vector<double> ga(na), gb(n - na);
        while (true) {
            std::size_t ai = 0, bi = 0, ci = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (ci < na && comb[ci] == i) {
                    ga[ai++] = pooled[i];
                    ++ci;
                } else {
                    gb[bi++] = pooled[i];
                }
            }
            if (std::abs(statistic(ga, gb)) >= observed - eps) ++hits;
            ++count;
            // next combination
            std::size_t k = na;
            while (k > 0 && comb[k - 1] == n - na + k - 1) --k;
            if (k == 0) break;
            ++comb[k - 1];
            for (std::size_t j = k; j < na; ++j) comb[j] = comb[j - 1] + 1;
        }
        return static_cast<double>(hits) / static_cast<double>(count);
    }

    std::vector<std::uint8_t> hits(n_perm, 0);
    parallel_for(n_perm, threads, [&](std::size_t i) {
        RngStream stream(seed, "permutation", i);
        std::vector<double> shuffled = pooled;
        stream.shuffle(shuffled);
        const std::vector<double> ga(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(na));
        const std::vector<double> gb(shuffled.begin() + static_cast<std::ptrdiff_t>(na), shuffled.end());
        hits[i] = std::abs(statistic(ga, gb)) >= observed - eps ? 1 : 0;
    });
    const std::size_t h = std::accumulate(hits.begin(), hits.end(), std::size_t{0});
    return (1.0 + static_cast<double>(h)) / (static_cast<double>(n_perm) + 1.0);
}

inline double mean_difference(const std::vector<double>& a, const std::vector<double>& b) {
    return mean(a) - mean(b);
}

// ---------------------------------------------------------------------------
// Rank statistics

namespace detail {

// midranks; also returns the tie-correction sum T = sum(t^3 - t)
inline std::pair<std::vector<double>, double> midranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> ranks(n);
    double tie_sum = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0; // average of ranks i+1..j+1
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        const double t = static_cast<double>(j - i + 1);
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    return {std::move(ranks), tie_sum};
}

} // namespace detail

struct KruskalWallisResult {
    double h = 0;
    double p = 1;
    double df = 0;
};

/// Rank-based one-way test with tie correction; p from the chi-square
/// approximation with g-1 degrees of freedom.
inline KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw NumericError("kruskal_wallis needs >= 2 groups");
    std::vector<double> pooled;
    for (const auto& g : groups) {
        if (g.empty()) throw NumericError("kruskal_wallis: empty group");
        pooled.insert(pooled.end(), g.begin(), g.end());
    }
    const std::size_t n = pooled.size();
    if (std::all_of(pooled.begin(), pooled.end(), [&](double v) { return v == pooled.front(); }))
        throw NumericError("kruskal_wallis: all values identical");

    auto [ranks, tie_sum] = detail::midranks(pooled);
    double h = 0;
    std::size_t offset = 0;
    for (const auto& g : groups) {
        double rank_sum = 0;
        for (std::size_t i = 0; i < g.size(); ++i) rank_sum += ranks[offset + i];
        h += rank_sum * rank_sum / static_cast<double>(g.size());
        offset += g.size();
    }
    const double nn = static_cast<double>(n);
    h = 12.0 / (nn * (nn + 1.0)) * h - 3.0 * (nn + 1.0);
    const double correction = 1.0 - tie_sum / (nn * nn * nn - nn);
    h /= correction;

    KruskalWallisResult out;
    out.h = h;
    out.df = static_cast<double>(groups.size() - 1);
    out.p = chi_squared_upper_p(h, out.df);
    return out;
}

struct CorrelationResult {
    double rho = 0;
    double p = 1;
    std::size_t n = 0;
};

/// Spearman rank correlation (tie-averaged ranks), t-approximation p value.
inline CorrelationResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw NumericError("spearman: length mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw NumericError("spearman needs n >= 3");
    auto [rx, tx] = detail::midranks(x);
    auto [ry, ty] = detail::midranks(y);
    const double mx = mean(rx), my = mean(ry);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) throw NumericError("spearman: zero rank variance");
    CorrelationResult out;
    out.n = n;
    out.rho = sxy / std::sqrt(sxx * syy);
    const double r2 = std::min(out.rho * out.rho, 1.0);
    if (1.0 - r2 < 1e-15) {
        out.p = 0.0;
    } else {
        const double t = out.rho * std::sqrt((static_cast<double>(n) - 2.0) / (1.0 - r2));
        out.p = student_t_two_sided_p(t, static_cast<double>(n) - 2.0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Contingency tables

struct ContingencyTable {
    std::vector<std::vector<double>> counts; // r x k, nonnegative
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;

    std::size_t n_rows() const { return counts.size(); }
    std::size_t n_cols() const { return counts.empty() ? 0 : counts[0].size(); }

    void validate() const {
        if (n_rows() < 2 || n_cols() < 2) throw DataError("contingency table must be at least 2x2");
        double total = 0;
        for (const auto& row : counts) {
            if (row.size() != n_cols()) throw DataError("ragged contingency table");
            for (double v : row) {
                if (v < 0 || !std::isfinite(v)) throw DataError("negative or non-finite count");
                total += v;
            }
        }
        if (!(total > 0)) throw DataError("contingency table has zero grand total");
    }

    double grand_total() const {
        double t = 0;
        for (const auto& row : counts)
            for (double v : row) t += v;
        return t;
    }
};

struct ChiSquareResult {
    double chi2 = 0;
    double df = 0;
    double p = 1;
};

inline ChiSquareResult chi_square(const ContingencyTable& table) {
    table.validate();
    const std::size_t r = table.n_rows(), k = table.n_cols();
    std::vector<double> row_sum(r, 0), col_sum(k, 0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            row_sum[i] += table.counts[i][j];
            col_sum[j] += table.counts[i][j];
        }
    for (double v : row_sum)
        if (!(v > 0)) throw NumericError("chi_square: zero row margin");
    for (double v : col_sum)
        if (!(v > 0)) throw NumericError("chi_square: zero column margin");

    const double n = table.grand_total();
    double chi2 = 0;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const double expected = row_sum[i] * col_sum[j] / n;
            const double d = table.counts[i][j] - expected;
            chi2 += d * d / expected;
        }
    ChiSquareResult out;
    out.chi2 = chi2;
    out.df = static_cast<double>((r - 1) * (k - 1));
    out.p = chi_squared_upper_p(chi2, out.df);
    return out;
}

inline double cramers_v(const ContingencyTable& table) {
    const auto cs = chi_square(table);
    const double n = table.grand_total();
    const double m = static_cast<double>(std::min(table.n_rows(), table.n_cols())) - 1.0;
    return std::sqrt(cs.chi2 / (n * m));
}

inline std::string_view effect_size_band(double v) {
    if (v < 0.1) return "very small";
    if (v <= 0.3) return "small";
    if (v <= 0.5) return "medium";
    return "large";
}

struct CramersVResult {
    double v = 0;
    std::string_view interpretation;
};

/// Bias-corrected Cramér's V (Bergsma correction): shrinks phi-squared and
/// the effective row/column counts before normalizing.
inline CramersVResult cramers_v_corrected(const ContingencyTable& table) {
    const auto cs = chi_square(table);
    const double n = table.grand_total();
    const double r = static_cast<double>(table.n_rows());
    const double k = static_cast<double>(table.n_cols());
    if (n <= 1) throw NumericError("cramers_v_corrected needs n > 1");

    const double phi2 = cs.chi2 / n;
    const double phi2_corr = std::max(0.0, phi2 - (k - 1.0) * (r - 1.0) / (n - 1.0));
    const double k_corr = k - (k - 1.0) * (k - 1.0) / (n - 1.0);
    const double r_corr = r - (r - 1.0) * (r - 1.0) / (n - 1.0);
    const double denom = std::min(k_corr - 1.0, r_corr - 1.0);
    if (!(denom > 0)) throw NumericError("cramers_v_corrected: corrected dimension collapse");

    CramersVResult out;
    out.v = std::sqrt(phi2_corr / denom);
    out.interpretation = effect_size_band(out.v);
    return out;
}

// ---------------------------------------------------------------------------
// Paired t-test

/// Two-sided paired t-test. All-zero differences are the exact-tie case and
/// reported as p = 1.
inline double paired_t_test(const std::vector<double>& baseline, const std::vector<double>& adjusted) {
    if (baseline.size() != adjusted.size()) throw NumericError("paired_t_test: length mismatch");
    const std::size_t n = baseline.size();
    if (n < 2) throw NumericError("paired_t_test needs n >= 2");
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = adjusted[i] - baseline[i];
    const double m = mean(diff);
    double ss = 0;
    for (double d : diff) ss += (d - m) * (d - m);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0) return m == 0 ? 1.0 : 0.0;
    const double t = m / (sd / std::sqrt(static_cast<double>(n)));
    return student_t_two_sided_p(t, static_cast<double>(n - 1));
}

} // namespace trialineq::stats
