#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trialineq/stats.hpp"

using namespace trialineq;
using Catch::Matchers::WithinAbs;

TEST_CASE("bootstrap of a constant statistic collapses to the point") {
    stats::BootstrapSpec spec;
    spec.n_iterations = 100;
    const auto r = stats::bootstrap(10, [](const std::vector<std::size_t>&) { return 3.5; }, spec);
    REQUIRE(r.point == 3.5);
    REQUIRE(r.ci_low == 3.5);
    REQUIRE(r.ci_high == 3.5);
}

TEST_CASE("bootstrap CI brackets the mean of 1..100") {
    std::vector<double> data(100);
    std::iota(data.begin(), data.end(), 1.0);
    stats::BootstrapSpec spec;
    spec.n_iterations = 10000;
    spec.seed = 4;
    const auto r = stats::bootstrap(
        data.size(),
        [&](const std::vector<std::size_t>& idx) {
            double s = 0;
            for (auto i : idx) s += data[i];
            return s / static_cast<double>(idx.size());
        },
        spec);
    REQUIRE_THAT(r.point, WithinAbs(50.5, 1e-12));
    REQUIRE(r.ci_low < 50.5);
    REQUIRE(r.ci_high > 50.5);
    // analytic standard error is ~2.887, so the 95% CI half-width sits near 5.7
    REQUIRE(r.ci_high - r.ci_low > 8.0);
    REQUIRE(r.ci_high - r.ci_low < 15.0);
}

TEST_CASE("bootstrap fails when the statistic is undefined too often") {
    stats::BootstrapSpec spec;
    spec.n_iterations = 100;
    spec.seed = 9;
    REQUIRE_THROWS_AS(stats::bootstrap(
                          5,
                          [](const std::vector<std::size_t>&) {
                              return std::numeric_limits<double>::quiet_NaN();
                          },
                          spec),
                      NumericError);
}

TEST_CASE("bootstrap replicates are identical across thread counts") {
    std::vector<double> data(40);
    std::iota(data.begin(), data.end(), 0.0);
    auto statistic = [&](const std::vector<std::size_t>& idx) {
        double s = 0;
        for (auto i : idx) s += data[i];
        return s;
    };
    stats::BootstrapSpec one;
    one.n_iterations = 500;
    one.seed = 12;
    one.threads = 1;
    stats::BootstrapSpec four = one;
    four.threads = 4;
    const auto a = stats::bootstrap(data.size(), statistic, one);
    const auto b = stats::bootstrap(data.size(), statistic, four);
    REQUIRE(a.replicates == b.replicates);
}

namespace {

// independent exact enumerator for the two-sample mean-difference test
double exact_permutation_p(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    const std::size_t n = pooled.size(), na = a.size();
    const double observed = std::abs(stats::mean_difference(a, b));
    std::size_t hits = 0, total = 0;
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(na), true);
    std::sort(pick.begin(), pick.end());
    do {
        std::vector<double> ga, gb;
        for (std::size_t i = 0; i < n; ++i) (pick[i] ? ga : gb).push_back(pooled[i]);
        if (std::abs(stats::mean_difference(ga, gb)) >= observed - 1e-12) ++hits;
        ++total;
    } while (std::next_permutation(pick.begin(), pick.end()));
    return static_cast<double>(hits) / static_cast<double>(total);
}

} // namespace

TEST_CASE("permutation test: identical samples give p = 1") {
    REQUIRE(stats::permutation_test({1, 1, 1}, {1, 1, 1}, stats::mean_difference, 100, 0) == 1.0);
}

TEST_CASE("permutation test equals exact enumeration on 3+3 fixtures") {
    const std::vector<double> a{1.0, 2.0, 3.0}, b{10.0, 11.0, 12.0};
    // budget covers C(6,3) = 20, so the library enumerates exactly
    const double p = stats::permutation_test(a, b, stats::mean_difference, 10000, 0);
    REQUIRE_THAT(p, WithinAbs(exact_permutation_p(a, b), 1e-12));
    REQUIRE_THAT(p, WithinAbs(2.0 / 20.0, 1e-12)); // disjoint ranges: only the two extreme splits

    const std::vector<double> c{1.0, 5.0, 2.0}, d{4.0, 3.0, 6.0};
    REQUIRE_THAT(stats::permutation_test(c, d, stats::mean_difference, 10000, 0),
                 WithinAbs(exact_permutation_p(c, d), 1e-12));
}

TEST_CASE("permutation test monte carlo path is seeded and smoothed") {
    std::vector<double> a(12), b(12);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = static_cast<double>(i);
        b[i] = static_cast<double>(i) + 0.25;
    }
    const double p1 = stats::permutation_test(a, b, stats::mean_difference, 2000, 7);
    const double p2 = stats::permutation_test(a, b, stats::mean_difference, 2000, 7);
    REQUIRE(p1 == p2);
    REQUIRE(p1 > 0.0);
    REQUIRE(p1 <= 1.0);
}

TEST_CASE("kruskal-wallis on identical group distributions is zero") {
    const auto r = stats::kruskal_wallis({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
    REQUIRE_THAT(r.h, WithinAbs(0.0, 1e-12));
    REQUIRE(r.df == 2.0);
}

TEST_CASE("kruskal-wallis matches a hand-ranked computation") {
    // classic 3-group example; ranks computed by hand:
    // pooled sorted: 6,7,8,9,10,11,12,13,14 -> ranks 1..9, no ties
    // groups: {6,9,12} ranks {1,4,7}=12; {7,10,13} ranks {2,5,8}=15; {8,11,14} ranks {3,6,9}=18
    const auto r = stats::kruskal_wallis({{6, 9, 12}, {7, 10, 13}, {8, 11, 14}});
    const double expected = 12.0 / (9.0 * 10.0) * (144.0 / 3 + 225.0 / 3 + 324.0 / 3) - 3.0 * 10.0;
    REQUIRE_THAT(r.h, WithinAbs(expected, 1e-12));
    REQUIRE(r.p > 0.0);
    REQUIRE(r.p < 1.0);
}

TEST_CASE("kruskal-wallis handles ties and rejects degenerate input") {
    REQUIRE_NOTHROW(stats::kruskal_wallis({{1, 1, 2}, {2, 3, 3}}));
    REQUIRE_THROWS_AS(stats::kruskal_wallis({{1, 1}, {1, 1}}), NumericError);
    REQUIRE_THROWS_AS(stats::kruskal_wallis({{1.0, 2.0}}), NumericError);
}

TEST_CASE("kruskal-wallis is invariant under group relabeling") {
    const std::vector<std::vector<double>> g{{1, 5, 2}, {9, 3, 7}, {4, 8, 6}};
    const auto a = stats::kruskal_wallis(g);
    const auto b = stats::kruskal_wallis({g[2], g[0], g[1]});
    REQUIRE_THAT(a.h, WithinAbs(b.h, 1e-12));
}

TEST_CASE("spearman endpoints") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y{2, 4, 9, 16, 30};
    REQUIRE_THAT(stats::spearman(x, y).rho, WithinAbs(1.0, 1e-12));
    std::reverse(y.begin(), y.end());
    REQUIRE_THAT(stats::spearman(x, y).rho, WithinAbs(-1.0, 1e-12));
    REQUIRE(stats::spearman(x, {2, 4, 9, 16, 30}).p < 1e-6);
    REQUIRE_THROWS_AS(stats::spearman({1, 1, 1}, {1, 2, 3}), NumericError);
}

TEST_CASE("chi-square at independence is zero") {
    stats::ContingencyTable t;
    t.counts = {{10, 20}, {30, 60}};
    const auto r = stats::chi_square(t);
    REQUIRE_THAT(r.chi2, WithinAbs(0.0, 1e-12));
    REQUIRE(r.df == 1.0);
    REQUIRE_THAT(r.p, WithinAbs(1.0, 1e-12));
}

TEST_CASE("chi-square hand computation on a diagonal 2x2") {
    stats::ContingencyTable t;
    t.counts = {{10, 0}, {0, 10}};
    const auto r = stats::chi_square(t);
    REQUIRE_THAT(r.chi2, WithinAbs(20.0, 1e-12));
    REQUIRE(r.p < 1e-4);
}

TEST_CASE("corrected cramers v is zero at independence and near one for perfect association") {
    stats::ContingencyTable indep;
    indep.counts = {{10, 20}, {30, 60}};
    REQUIRE_THAT(stats::cramers_v_corrected(indep).v, WithinAbs(0.0, 1e-12));

    stats::ContingencyTable perfect;
    perfect.counts = {{5000, 0}, {0, 5000}};
    const auto r = stats::cramers_v_corrected(perfect);
    REQUIRE(r.v > 0.99);
    REQUIRE(r.interpretation == "large");
}

TEST_CASE("corrected cramers v never exceeds the uncorrected value") {
    RngStream rng(3, "stats-cramers");
    for (int rep = 0; rep < 50; ++rep) {
        stats::ContingencyTable t;
        const std::size_t r = 2 + rng.uniform_int(3), k = 2 + rng.uniform_int(3);
        t.counts.assign(r, std::vector<double>(k));
        for (auto& row : t.counts)
            for (auto& v : row) v = 1 + rng.uniform_int(50);
        const double corrected = stats::cramers_v_corrected(t).v;
        const double plain = stats::cramers_v(t);
        REQUIRE(corrected <= plain + 1e-12);
        REQUIRE(corrected >= 0.0);
        REQUIRE(plain <= 1.0 + 1e-12);
    }
}

TEST_CASE("contingency validation") {
    stats::ContingencyTable bad;
    bad.counts = {{1, 2}};
    REQUIRE_THROWS_AS(bad.validate(), DataError);
    stats::ContingencyTable zero_margin;
    zero_margin.counts = {{0, 0}, {1, 2}};
    REQUIRE_THROWS_AS(stats::chi_square(zero_margin), NumericError);
}

TEST_CASE("paired t-test edge cases") {
    REQUIRE(stats::paired_t_test({1, 2, 3}, {1, 2, 3}) == 1.0);
    REQUIRE(stats::paired_t_test({1, 2, 3}, {2, 3, 4}) == 0.0); // constant shift, zero variance
    std::vector<double> base(100), shifted(100);
    RngStream rng(8, "stats-paired");
    for (std::size_t i = 0; i < base.size(); ++i) {
        base[i] = rng.normal();
        shifted[i] = base[i] + 1.0 + 0.01 * rng.normal();
    }
    REQUIRE(stats::paired_t_test(base, shifted) < 1e-10);
}

TEST_CASE("percentile interpolation") {
    REQUIRE_THAT(stats::percentile({1, 2, 3, 4}, 50), WithinAbs(2.5, 1e-12));
    REQUIRE_THAT(stats::percentile({4, 1, 3, 2}, 0), WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(stats::percentile({4, 1, 3, 2}, 100), WithinAbs(4.0, 1e-12));
    REQUIRE_THAT(stats::median({3.0, 1.0, 2.0}), WithinAbs(2.0, 1e-12));
    REQUIRE_THAT(stats::median({4.0, 1.0, 3.0, 2.0}), WithinAbs(2.5, 1e-12));
}
