#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <sstream>

#include "trialineq/metrics.hpp"
#include "trialineq/rng.hpp"

using namespace trialineq;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

PanelCell cell(const char* country, std::uint8_t disease, int year, double p, double b) {
    return {CountryCode::from_string(country), DiseaseCategory(disease), year, p, b};
}

// Independent share calculator: recomputes every pair PBR from scratch with
// plain maps, no reuse of the library's aggregation path.
std::map<std::pair<std::string, int>, double> oracle_pair_pbrs(const Panel& panel) {
    std::map<int, double> disease_p, disease_b;
    std::map<std::pair<std::string, int>, double> pair_p, pair_b;
    for (const auto& c : panel.cells()) {
        disease_p[c.disease.id()] += c.participants;
        disease_b[c.disease.id()] += c.dalys;
        pair_p[{c.country.str(), c.disease.id()}] += c.participants;
        pair_b[{c.country.str(), c.disease.id()}] += c.dalys;
    }
    std::map<std::pair<std::string, int>, double> out;
    for (const auto& [key, p] : pair_p) {
        if (disease_p[key.second] <= 0) continue;
        out[key] = (p / disease_p[key.second]) / (pair_b[key] / disease_b[key.second]);
    }
    return out;
}

Panel two_country_panel() {
    // A and B split one disease 9:1 on participants and 1:9 on burden
    return Panel({cell("USA", 0, 2010, 9, 1), cell("BRA", 0, 2010, 1, 9)});
}

} // namespace

TEST_CASE("pbr of a proportional pair is one") {
    // USA holds 10% of participants and 10% of burden
    const Panel p({cell("USA", 0, 2010, 10, 100), cell("BRA", 0, 2010, 90, 900)});
    const auto rec = pbr(p, CountryCode::from_string("USA"), DiseaseCategory(0));
    REQUIRE_THAT(rec.pbr, WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(*rec.log_pbr, WithinAbs(0.0, 1e-12));
}

TEST_CASE("pbr on the 2-country synthetic") {
    const Panel p = two_country_panel();
    const auto rec = pbr(p, CountryCode::from_string("USA"), DiseaseCategory(0));
    REQUIRE_THAT(rec.pbr, WithinAbs(9.0, 1e-12)); // (0.9)/(0.1)
    const auto oracle = oracle_pair_pbrs(p);
    REQUIRE_THAT(rec.pbr, WithinAbs(oracle.at({"USA", 0}), 1e-12));
}

TEST_CASE("pbr error cases") {
    const Panel p = two_country_panel();
    // disease 1 never appears
    REQUIRE_THROWS_AS(pbr(p, CountryCode::from_string("USA"), DiseaseCategory(1)), NumericError);
    // country absent from the disease: burden zero for that pair
    REQUIRE_THROWS_AS(pbr(p, CountryCode::from_string("KEN"), DiseaseCategory(0)), NumericError);
}

TEST_CASE("pair pbrs match the independent share oracle") {
    RngStream rng(11, "metrics-pairs");
    static const char* codes[] = {"USA", "BRA", "KEN", "DEU"};
    std::vector<PanelCell> cells;
    for (const char* c : codes)
        for (std::uint8_t d = 0; d < 3; ++d)
            for (int y : {2010, 2011})
                cells.push_back(cell(c, d, y, rng.uniform() < 0.2 ? 0.0 : rng.uniform() * 100,
                                     1 + rng.uniform() * 1000));
    const Panel panel(std::move(cells));
    const auto set = pair_pbrs(panel);
    const auto oracle = oracle_pair_pbrs(panel);
    REQUIRE(set.pairs.size() == oracle.size());
    for (const auto& p : set.pairs)
        REQUIRE_THAT(p.pbr, WithinAbs(oracle.at({p.country.str(), p.disease.id()}), 1e-12));
}

TEST_CASE("pbr is invariant under global rescaling of participants and burden") {
    RngStream rng(23, "metrics-rescale");
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<PanelCell> cells;
        static const char* codes[] = {"USA", "BRA", "KEN"};
        for (const char* c : codes)
            for (std::uint8_t d = 0; d < 2; ++d)
                cells.push_back(cell(c, d, 2010, 0.1 + rng.uniform() * 50, 1 + rng.uniform() * 500));
        const double a = 0.01 + rng.uniform() * 100, b = 0.01 + rng.uniform() * 100;
        std::vector<PanelCell> scaled = cells;
        for (auto& s : scaled) {
            s.participants *= a;
            s.dalys *= b;
        }
        const auto before = pair_pbrs(Panel(std::move(cells)));
        const auto after = pair_pbrs(Panel(std::move(scaled)));
        for (std::size_t i = 0; i < before.pairs.size(); ++i)
            REQUIRE_THAT(after.pairs[i].pbr, WithinRel(before.pairs[i].pbr, 1e-12));
    }
}

TEST_CASE("within-country pbr variant is exposed separately") {
    const Panel p({cell("USA", 0, 2010, 10, 100), cell("USA", 1, 2010, 30, 100),
                   cell("BRA", 0, 2010, 40, 800), cell("BRA", 1, 2010, 20, 100)});
    const auto rec = pbr_within_country(p, CountryCode::from_string("USA"), DiseaseCategory(0));
    // USA: disease 0 holds 25% of participants, 50% of burden
    REQUIRE_THAT(rec.pbr, WithinAbs(0.5, 1e-12));
}

TEST_CASE("specialization index identity portfolio") {
    // both countries split participants across diseases in the same ratio
    const Panel p({cell("USA", 0, 2010, 60, 1), cell("USA", 1, 2010, 40, 1),
                   cell("BRA", 0, 2010, 6, 1), cell("BRA", 1, 2010, 4, 1)});
    for (std::uint8_t d : {0, 1}) {
        REQUIRE_THAT(specialization_index(p, CountryCode::from_string("USA"), DiseaseCategory(d)),
                     WithinAbs(1.0, 1e-12));
        REQUIRE_THAT(specialization_index(p, CountryCode::from_string("BRA"), DiseaseCategory(d)),
                     WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("single-disease country si collapses to global inverse share") {
    const Panel p({cell("USA", 0, 2010, 10, 1), cell("USA", 1, 2010, 30, 1),
                   cell("BRA", 0, 2010, 20, 1)});
    // BRA is all-in on disease 0; P_all = 60, P_d0 = 30 -> SI = 60/30 = 2
    REQUIRE_THAT(specialization_index(p, CountryCode::from_string("BRA"), DiseaseCategory(0)),
                 WithinAbs(2.0, 1e-12));
}

TEST_CASE("si weighted by global disease shares averages to one") {
    RngStream rng(31, "metrics-si");
    std::vector<PanelCell> cells;
    static const char* codes[] = {"USA", "BRA", "KEN"};
    for (const char* c : codes)
        for (std::uint8_t d = 0; d < 3; ++d)
            cells.push_back(cell(c, d, 2010, 1 + rng.uniform() * 100, 1 + rng.uniform() * 100));
    const Panel p(std::move(cells));
    const double p_all = p.global().participants;
    for (const char* c : codes) {
        double acc = 0;
        for (std::uint8_t d = 0; d < 3; ++d) {
            const double share = p.disease_total(DiseaseCategory(d)).participants / p_all;
            acc += share * specialization_index(p, CountryCode::from_string(c), DiseaseCategory(d));
        }
        REQUIRE_THAT(acc, WithinAbs(1.0, 1e-9));
    }
}

TEST_CASE("gini closed forms") {
    REQUIRE_THAT(gini({5, 5, 5, 5}), WithinAbs(0.0, 1e-15));
    REQUIRE_THAT(gini({0, 0, 0, 1}), WithinAbs(0.75, 1e-15));
    REQUIRE_THAT(gini({1, 1, 1, 1, 500, 1000}), WithinAbs(gini({1000, 1, 500, 1, 1, 1}), 1e-15));
}

TEST_CASE("gini scale invariance and bounds") {
    RngStream rng(5, "metrics-gini");
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 2 + rng.uniform_int(50);
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform() * 100;
        const double g = gini(v);
        REQUIRE(g >= 0.0);
        REQUIRE(g < 1.0);
        const double k = 0.001 + rng.uniform() * 1000;
        std::vector<double> scaled = v;
        for (auto& x : scaled) x *= k;
        REQUIRE_THAT(gini(scaled), WithinAbs(g, 1e-12));
    }
}

TEST_CASE("gini error paths") {
    REQUIRE_THROWS_AS(gini({}), NumericError);
    REQUIRE_THROWS_AS(gini({0.0, 0.0}), NumericError);
    REQUIRE_THROWS_AS(gini({1.0, -0.5}), NumericError);
    REQUIRE_THAT(gini({7.0}), WithinAbs(0.0, 1e-15)); // n = 1 degenerates to equality
}

TEST_CASE("weighted gini reduces to plain gini under equal weights") {
    RngStream rng(17, "metrics-wgini");
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 2 + rng.uniform_int(30);
        std::vector<double> v(n), w(n, 1.0);
        for (auto& x : v) x = rng.uniform() * 10;
        if (gini(v) >= 0) REQUIRE_THAT(weighted_gini(v, w), WithinAbs(gini(v), 1e-12));
    }
}

TEST_CASE("lorenz curve of a proportional panel is the diagonal") {
    const Panel p({cell("USA", 0, 2010, 10, 100), cell("BRA", 0, 2010, 30, 300),
                   cell("KEN", 0, 2010, 60, 600)});
    const auto curve = lorenz(pair_pbrs(p));
    for (const auto& [x, y] : curve.points) REQUIRE_THAT(y, WithinAbs(x, 1e-12));
    REQUIRE_THAT(curve.gini, WithinAbs(0.0, 1e-12));
}

TEST_CASE("lorenz vertices match hand cumulative sums on a 3-pair set") {
    // pbr order: KEN (0.25), BRA (1), USA (4)
    const Panel p({cell("USA", 0, 2010, 40, 100), cell("BRA", 0, 2010, 30, 300),
                   cell("KEN", 0, 2010, 10, 400)});
    const auto curve = lorenz(pair_pbrs(p));
    REQUIRE(curve.points.size() == 4);
    // manual cumulative-share oracle: burden 400,300,100 of 800; participants 10,30,40 of 80
    REQUIRE_THAT(curve.points[1].first, WithinAbs(400.0 / 800.0, 1e-12));
    REQUIRE_THAT(curve.points[1].second, WithinAbs(10.0 / 80.0, 1e-12));
    REQUIRE_THAT(curve.points[2].first, WithinAbs(700.0 / 800.0, 1e-12));
    REQUIRE_THAT(curve.points[2].second, WithinAbs(40.0 / 80.0, 1e-12));
    REQUIRE(curve.points[3].first == 1.0);
    REQUIRE(curve.points[3].second == 1.0);
    // curve below diagonal, coordinates nondecreasing
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        REQUIRE(curve.points[i].first >= curve.points[i - 1].first);
        REQUIRE(curve.points[i].second >= curve.points[i - 1].second);
        REQUIRE(curve.points[i].second <= curve.points[i].first + 1e-12);
    }
}

TEST_CASE("lorenz area gini agrees with the burden-weighted gini formula") {
    RngStream rng(41, "metrics-lorenz");
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<PanelCell> cells;
        static const char* codes[] = {"USA", "BRA", "KEN", "DEU", "JPN"};
        for (const char* c : codes)
            for (std::uint8_t d = 0; d < 2; ++d)
                cells.push_back(cell(c, d, 2010, rng.uniform() * 100, 1 + rng.uniform() * 900));
        const auto set = pair_pbrs(Panel(std::move(cells)));
        const auto curve = lorenz(set);
        // the curve's implied value is the raw participants/burden ratio;
        // its burden-weighted Gini must equal the area-derived coefficient
        std::vector<double> values, weights;
        for (const auto& p : set.pairs) {
            values.push_back(p.participants / p.dalys);
            weights.push_back(p.dalys);
        }
        REQUIRE_THAT(curve.gini, WithinAbs(weighted_gini(values, weights), 1e-9));
    }
}

TEST_CASE("lorenz rejects degenerate input") {
    const Panel p = two_country_panel();
    PairPbrSet single;
    single.pairs = {pair_pbrs(p).pairs[0]};
    REQUIRE_THROWS_AS(lorenz(single), NumericError);
}

namespace {

// two-call oracle: CIS recomputed from two direct Gini evaluations
double cis_oracle(const PairPbrSet& set, DiseaseCategory target) {
    std::vector<double> all, kept;
    for (const auto& p : set.pairs) {
        all.push_back(p.pbr);
        if (!(p.disease == target)) kept.push_back(p.pbr);
    }
    const double g_all = gini(all), g_minus = gini(kept);
    return (g_all - g_minus) / g_all * 100.0;
}

} // namespace

TEST_CASE("cis on an all-equal panel is zero by convention") {
    const Panel p({cell("USA", 0, 2010, 10, 100), cell("BRA", 0, 2010, 20, 200),
                   cell("USA", 1, 2010, 5, 50), cell("BRA", 1, 2010, 8, 80)});
    stats::BootstrapSpec boot;
    boot.n_iterations = 50;
    boot.seed = 1;
    const auto rec = cis(pair_pbrs(p), DiseaseCategory(0), CisWeighting::Equal, boot);
    REQUIRE_THAT(rec.cis_percent, WithinAbs(0.0, 1e-12));
}

TEST_CASE("cis matches the two-call oracle on a 4-pair synthetic") {
    const Panel p({cell("USA", 0, 2010, 50, 100), cell("BRA", 0, 2010, 5, 300),
                   cell("USA", 1, 2010, 20, 100), cell("BRA", 1, 2010, 10, 100)});
    const auto set = pair_pbrs(p);
    stats::BootstrapSpec boot;
    boot.n_iterations = 200;
    boot.seed = 3;
    const auto rec = cis(set, DiseaseCategory(0), CisWeighting::Equal, boot);
    REQUIRE_THAT(rec.cis_percent, WithinAbs(cis_oracle(set, DiseaseCategory(0)), 1e-12));
    REQUIRE(rec.ci_low <= rec.cis_percent);
    REQUIRE(rec.cis_percent <= rec.ci_high);
}

TEST_CASE("cis sign convention: removal that raises the gini scores negative") {
    // disease 0 pairs sit at the distribution center; removing them leaves the
    // extremes and raises inequality
    const Panel p({cell("USA", 0, 2010, 100, 100), cell("BRA", 0, 2010, 99, 100),
                   cell("USA", 1, 2010, 1000, 100), cell("BRA", 1, 2010, 1, 100)});
    const auto set = pair_pbrs(p);
    stats::BootstrapSpec boot;
    boot.n_iterations = 50;
    boot.seed = 5;
    const auto rec = cis(set, DiseaseCategory(0), CisWeighting::Equal, boot);
    REQUIRE(rec.cis_percent < 0.0);
    REQUIRE_THAT(rec.cis_percent, WithinAbs(cis_oracle(set, DiseaseCategory(0)), 1e-12));
}

TEST_CASE("cis rejects absent targets and supports participant weighting") {
    const Panel p({cell("USA", 0, 2010, 50, 100), cell("BRA", 0, 2010, 5, 300),
                   cell("USA", 1, 2010, 20, 100), cell("BRA", 1, 2010, 10, 100),
                   cell("KEN", 0, 2010, 2, 400), cell("KEN", 1, 2010, 1, 100)});
    const auto set = pair_pbrs(p);
    stats::BootstrapSpec boot;
    boot.n_iterations = 50;
    boot.seed = 2;
    REQUIRE_THROWS_AS(cis(set, DiseaseCategory(5), CisWeighting::Equal, boot), DataError);
    const auto weighted = cis(set, CountryCode::from_string("USA"), CisWeighting::ParticipantWeighted, boot);
    const auto equal = cis(set, CountryCode::from_string("USA"), CisWeighting::Equal, boot);
    REQUIRE(weighted.cis_percent != equal.cis_percent); // weighting matters
}

TEST_CASE("cis bootstrap is deterministic under a fixed seed") {
    const Panel p({cell("USA", 0, 2010, 50, 100), cell("BRA", 0, 2010, 5, 300),
                   cell("USA", 1, 2010, 20, 100), cell("BRA", 1, 2010, 10, 100),
                   cell("KEN", 0, 2010, 2, 400), cell("KEN", 1, 2010, 1, 100)});
    const auto set = pair_pbrs(p);
    stats::BootstrapSpec boot;
    boot.n_iterations = 100;
    boot.seed = 17;
    const auto a = cis(set, DiseaseCategory(0), CisWeighting::Equal, boot);
    const auto b = cis(set, DiseaseCategory(0), CisWeighting::Equal, boot);
    REQUIRE(a.ci_low == b.ci_low);
    REQUIRE(a.ci_high == b.ci_high);
}

TEST_CASE("leave-out with a fraction too small to pick anything is a no-op") {
    const Panel p({cell("USA", 0, 2010, 50, 100), cell("BRA", 0, 2010, 5, 300),
                   cell("USA", 1, 2010, 20, 100), cell("BRA", 1, 2010, 10, 100)});
    const auto r = leave_out_gini(pair_pbrs(p), CisUnit::Disease, LeaveOutRanking::Cis, 0.05);
    REQUIRE(r.excluded.empty());
    REQUIRE(r.gini_after == r.gini_before);
}

TEST_CASE("leave-out removes the top-ranked units") {
    const Panel p({cell("USA", 0, 2010, 900, 100), cell("BRA", 0, 2010, 5, 300),
                   cell("USA", 1, 2010, 20, 100), cell("BRA", 1, 2010, 10, 100),
                   cell("KEN", 0, 2010, 1, 500), cell("KEN", 1, 2010, 2, 300)});
    const auto set = pair_pbrs(p);
    const auto r = leave_out_gini(set, CisUnit::Country, LeaveOutRanking::ParticipantVolume, 0.4);
    REQUIRE(r.excluded == std::vector<std::string>{"USA"}); // floor(0.4*3) = 1
    // removing the volume leader reshapes the distribution; recompute directly
    std::vector<double> kept;
    for (const auto& pr : set.pairs)
        if (pr.country.str() != "USA") kept.push_back(pr.pbr);
    REQUIRE_THAT(r.gini_after, WithinAbs(gini(kept), 1e-12));
}

TEST_CASE("alignment regression recovers a perfect fit") {
    std::vector<PanelCell> cells;
    std::vector<CountryCode> countries;
    std::map<std::string, std::vector<double>> cols;
    std::vector<std::optional<IncomeGroup>> income;
    // y = x exactly: participants equal to dalys for every pair
    static const char* codes[] = {"BRA", "KEN", "USA"};
    for (const char* c : codes) {
        countries.push_back(CountryCode::from_string(c));
        income.emplace_back(IncomeGroup::High);
    }
    double v = 10;
    for (const char* c : codes)
        for (std::uint8_t d = 0; d < 2; ++d) {
            cells.push_back(cell(c, d, 2010, v, v));
            v *= 2.7;
        }
    const Panel panel(std::move(cells));
    const PredictorTable table(countries, {}, income);
    const auto fit = alignment_regression(panel, table, IncomeGroup::High);
    REQUIRE_THAT(fit.beta, WithinAbs(1.0, 1e-9));
    REQUIRE(fit.p_value < 1e-6);
    REQUIRE(fit.n == 6);
    REQUIRE_THROWS_AS(alignment_regression(panel, table, IncomeGroup::Low), NumericError);
}
