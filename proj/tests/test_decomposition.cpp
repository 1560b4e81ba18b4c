#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "trialineq/decomposition.hpp"
#include "trialineq/rng.hpp"

using namespace trialineq;
using Catch::Matchers::WithinAbs;

TEST_CASE("theil of an equal distribution is zero") {
    REQUIRE_THAT(theil({3, 3, 3}), WithinAbs(0.0, 1e-15));
}

TEST_CASE("theil hand evaluation on [1, 3]") {
    // (1/2)[(1/2)ln(1/2) + (3/2)ln(3/2)]
    const double expected = 0.5 * (0.5 * std::log(0.5) + 1.5 * std::log(1.5));
    REQUIRE_THAT(theil({1, 3}), WithinAbs(expected, 1e-15));
    REQUIRE_THAT(theil({1, 3}), WithinAbs(0.13081, 1e-5));
}

TEST_CASE("theil rejects non-positive values") {
    REQUIRE_THROWS_AS(theil({1.0, 0.0}), NumericError);
    REQUIRE_THROWS_AS(theil({}), NumericError);
    REQUIRE(theil({0.5, 2.0}) >= 0.0);
}

TEST_CASE("identical within-group values leave only the between component") {
    const auto d = theil_decompose({2, 2, 2, 8, 8, 8}, {"a", "a", "a", "b", "b", "b"});
    REQUIRE_THAT(d.within, WithinAbs(0.0, 1e-14));
    REQUIRE_THAT(d.between, WithinAbs(d.total, 1e-14));
}

TEST_CASE("equal group means zero the between component") {
    const auto d = theil_decompose({1, 2, 3, 1, 2, 3}, {"a", "a", "a", "b", "b", "b"});
    REQUIRE_THAT(d.between, WithinAbs(0.0, 1e-14));
    REQUIRE_THAT(d.within, WithinAbs(d.total, 1e-14));
}

TEST_CASE("2x2 decomposition matches the direct two-group formula") {
    const std::vector<double> values{1, 4, 2, 9};
    const std::vector<std::string> groups{"g1", "g1", "g2", "g2"};
    const auto d = theil_decompose(values, groups);

    // brute-force two-group oracle evaluated straight from the definitions
    const double mu = (1 + 4 + 2 + 9) / 4.0;
    const double mu1 = 2.5, mu2 = 5.5;
    const double between = 0.5 * (mu1 / mu) * std::log(mu1 / mu) + 0.5 * (mu2 / mu) * std::log(mu2 / mu);
    auto group_theil = [](double a, double b) {
        const double m = (a + b) / 2;
        return 0.5 * ((a / m) * std::log(a / m) + (b / m) * std::log(b / m));
    };
    const double within = 0.5 * (mu1 / mu) * group_theil(1, 4) + 0.5 * (mu2 / mu) * group_theil(2, 9);
    REQUIRE_THAT(d.between, WithinAbs(between, 1e-12));
    REQUIRE_THAT(d.within, WithinAbs(within, 1e-12));
    REQUIRE_THAT(d.between + d.within, WithinAbs(d.total, 1e-12));
}

TEST_CASE("theil additivity holds on random panels for both groupings") {
    RngStream rng(77, "theil-additivity");
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 6 + rng.uniform_int(40);
        std::vector<double> values(n);
        std::vector<std::string> by_disease(n), by_country(n);
        for (std::size_t i = 0; i < n; ++i) {
            values[i] = 0.01 + rng.uniform() * 20;
            by_disease[i] = "d" + std::to_string(rng.uniform_int(4));
            by_country[i] = "c" + std::to_string(rng.uniform_int(5));
        }
        for (const auto& labels : {by_disease, by_country}) {
            std::map<std::string, int> distinct;
            for (const auto& l : labels) distinct[l] = 1;
            if (distinct.size() < 2) continue;
            const auto d = theil_decompose(values, labels);
            REQUIRE_THAT(d.between + d.within, WithinAbs(d.total, 1e-10));
            REQUIRE(d.total >= -1e-14);
        }
    }
}

TEST_CASE("pair-set decomposition drops zero participation with a count") {
    std::vector<PanelCell> cells{
        {CountryCode::from_string("USA"), DiseaseCategory(0), 2010, 5, 10},
        {CountryCode::from_string("BRA"), DiseaseCategory(0), 2010, 0, 10},
        {CountryCode::from_string("USA"), DiseaseCategory(1), 2010, 2, 10},
        {CountryCode::from_string("BRA"), DiseaseCategory(1), 2010, 3, 10},
    };
    const auto d = theil_decompose(pair_pbrs(Panel(std::move(cells))), TheilGrouping::Country);
    REQUIRE(d.dropped_nonpositive == 1);
}

// ---------------------------------------------------------------------------
// variance partition

namespace {

FePanelObs obs(const char* c, std::uint8_t d, int y, double v) {
    return {CountryCode::from_string(c), DiseaseCategory(d), y, v};
}

} // namespace

TEST_CASE("pure country effects claim all the variance") {
    RngStream rng(6, "vp-pure");
    static const char* codes[] = {"USA", "BRA", "KEN"};
    const double effect[] = {-2.0, 0.5, 1.5};
    std::vector<FePanelObs> data;
    for (int c = 0; c < 3; ++c)
        for (std::uint8_t d = 0; d < 3; ++d)
            for (int y : {2010, 2011})
                data.push_back(obs(codes[c], d, y, effect[c] + 1e-9 * rng.normal()));
    const auto vp = variance_partition(data);
    REQUIRE(vp.sequential.r2_country > 0.999);
    REQUIRE(vp.sequential.r2_disease < 1e-6);
    REQUIRE(vp.sequential.r2_year < 1e-6);
}

TEST_CASE("balanced 3x3x2 design recovers analytic shares") {
    // planted sum-to-zero effects on a fully crossed, noise-free design
    static const char* codes[] = {"USA", "BRA", "KEN"};
    const double alpha[] = {1.0, -0.5, -0.5};
    const double beta[] = {0.8, -0.3, -0.5};
    const double gamma[] = {0.6, -0.6};
    std::vector<FePanelObs> data;
    for (int c = 0; c < 3; ++c)
        for (std::uint8_t d = 0; d < 3; ++d)
            for (int y = 0; y < 2; ++y)
                data.push_back(obs(codes[c], d, 2010 + y, 3.0 + alpha[c] + beta[d] + gamma[y]));

    // closed-form sums of squares for a balanced design
    double ss_a = 0, ss_b = 0, ss_g = 0;
    for (double a : alpha) ss_a += a * a * 3 * 2; // each country level spans 3 diseases x 2 years
    for (double b : beta) ss_b += b * b * 3 * 2;
    for (double g : gamma) ss_g += g * g * 3 * 3;
    const double tss = ss_a + ss_b + ss_g;

    const auto vp = variance_partition(data);
    REQUIRE_THAT(vp.sequential.r2_country, WithinAbs(ss_a / tss, 1e-6));
    REQUIRE_THAT(vp.sequential.r2_disease, WithinAbs(ss_b / tss, 1e-6));
    REQUIRE_THAT(vp.sequential.r2_year, WithinAbs(ss_g / tss, 1e-6));
    REQUIRE_THAT(vp.sequential.r2_residual, WithinAbs(0.0, 1e-9));

    // orthogonal design: sequential and marginal shares agree
    REQUIRE_THAT(vp.sequential.r2_country, WithinAbs(vp.marginal.r2_country, 1e-9));
    REQUIRE_THAT(vp.sequential.r2_disease, WithinAbs(vp.marginal.r2_disease, 1e-9));
    REQUIRE_THAT(vp.sequential.r2_year, WithinAbs(vp.marginal.r2_year, 1e-9));
}

TEST_CASE("unbalanced designs surface both variants") {
    RngStream rng(15, "vp-unbalanced");
    std::vector<FePanelObs> data;
    static const char* codes[] = {"USA", "BRA", "KEN", "DEU"};
    for (int c = 0; c < 4; ++c)
        for (std::uint8_t d = 0; d < 3; ++d)
            for (int y : {2010, 2011, 2012}) {
                if (rng.uniform() < 0.3) continue; // knock out cells
                data.push_back(obs(codes[c], d, y, rng.normal() + c * 0.7 - d * 0.2));
            }
    const auto vp = variance_partition(data);
    REQUIRE(vp.sequential.estimation_variant == "sequential");
    REQUIRE(vp.marginal.estimation_variant == "marginal");
    const double seq_sum = vp.sequential.r2_country + vp.sequential.r2_disease + vp.sequential.r2_year +
                           vp.sequential.r2_residual;
    REQUIRE_THAT(seq_sum, WithinAbs(1.0, 1e-9));
    for (double f : {vp.marginal.r2_country, vp.marginal.r2_disease, vp.marginal.r2_year})
        REQUIRE(f >= -1e-9);
}

TEST_CASE("confounded factors are rejected") {
    // disease perfectly tracks country: design rank-deficient
    std::vector<FePanelObs> data;
    for (int y : {2010, 2011, 2012, 2013}) {
        data.push_back(obs("USA", 0, y, 1.0 + y * 0.1));
        data.push_back(obs("BRA", 1, y, 2.0 - y * 0.05));
    }
    REQUIRE_THROWS_AS(variance_partition(data), NumericError);
}

TEST_CASE("fe observations use within-disease-year shares and drop zeros") {
    std::vector<PanelCell> cells{
        {CountryCode::from_string("USA"), DiseaseCategory(0), 2010, 30, 100},
        {CountryCode::from_string("BRA"), DiseaseCategory(0), 2010, 10, 300},
        {CountryCode::from_string("KEN"), DiseaseCategory(0), 2010, 0, 500},
    };
    const auto fe = fe_observations(Panel(std::move(cells)));
    REQUIRE(fe.obs.size() == 2);
    REQUIRE(fe.dropped_nonpositive == 1);
    // cells sort by country: obs[0] = BRA, obs[1] = USA
    REQUIRE_THAT(fe.obs[0].value, WithinAbs(std::log((10.0 / 40.0) / (300.0 / 900.0)), 1e-12));
    REQUIRE_THAT(fe.obs[1].value, WithinAbs(std::log((30.0 / 40.0) / (100.0 / 900.0)), 1e-12));
}

// ---------------------------------------------------------------------------
// temporal trends

TEST_CASE("noise-free linear series recovers the slope exactly") {
    std::vector<std::pair<double, double>> series;
    for (int y = 2000; y <= 2010; y += 2) series.emplace_back(y, 3.5 * y - 20.0);
    const auto t = temporal_trend(series);
    REQUIRE_THAT(t.slope, WithinAbs(3.5, 1e-12));
    REQUIRE_THAT(t.r2, WithinAbs(1.0, 1e-12));
    REQUIRE(t.p_value < 1e-10);
}

TEST_CASE("constant series has zero slope") {
    std::vector<std::pair<double, double>> series{{2000, 4}, {2002, 4}, {2004, 4}, {2006, 4}};
    const auto t = temporal_trend(series);
    REQUIRE_THAT(t.slope, WithinAbs(0.0, 1e-12));
}

TEST_CASE("trend requires three points and a varying regressor") {
    REQUIRE_THROWS_AS(temporal_trend({{2000, 1}, {2001, 2}}), NumericError);
    REQUIRE_THROWS_AS(temporal_trend({{2000, 1}, {2000, 2}, {2000, 3}}), NumericError);
}

TEST_CASE("bootstrap trend is deterministic and brackets the point slope") {
    RngStream rng(10, "trend-boot");
    std::vector<PanelCell> cells;
    static const char* codes[] = {"USA", "BRA", "KEN", "DEU"};
    for (int y = 2006; y <= 2016; ++y)
        for (const char* c : codes)
            for (std::uint8_t d = 0; d < 2; ++d)
                cells.push_back({CountryCode::from_string(c), DiseaseCategory(d), y,
                                 1 + rng.uniform() * 50, 10 + rng.uniform() * 200});
    const Panel panel(std::move(cells));
    auto metric = [](const Panel& sub) { return gini(pbr_values(pair_pbrs(sub))); };
    const auto a = temporal_trend_bootstrap(panel, 2, metric, 200, 5);
    const auto b = temporal_trend_bootstrap(panel, 2, metric, 200, 5);
    REQUIRE(a.slope == b.slope);
    REQUIRE(a.ci_low == b.ci_low);
    REQUIRE(a.ci_low <= a.ci_high);
}
